"""
Standing Wave Sync - Settings

Settings classes for different environments.
"""

import os

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Base settings class."""

    model_config = SettingsConfigDict(env_prefix="ATOMSYNC_", extra="ignore")

    # Logging Configuration
    log_level: str = "INFO"
    log_format: str = "console"

    # Sweep Configuration
    workers: int = 1

    # Output Configuration
    output_dir: str = "./runs"

    # Written into every manifest
    code_version: str = "1.0.0"


class DevelopmentSettings(Settings):
    """Development settings."""

    log_level: str = "DEBUG"


class ProductionSettings(Settings):
    """Batch runs on shared machines."""

    log_level: str = "WARNING"
    log_format: str = "json"


class TestingSettings(Settings):
    """Testing settings."""

    log_level: str = "WARNING"
    workers: int = 1
    output_dir: str = "./test-runs"


# Settings mapping
config_by_name = {
    "development": DevelopmentSettings,
    "production": ProductionSettings,
    "testing": TestingSettings,
    "default": DevelopmentSettings,
}


def get_config() -> Settings:
    """Get settings based on environment."""
    env = os.getenv("ATOMSYNC_ENV", "development")
    return config_by_name.get(env, DevelopmentSettings)()

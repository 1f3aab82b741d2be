"""
Standing Wave Sync - Experiment Configuration

Sectioned key/value experiment files. Every section is validated by a
pydantic model that rejects unknown keys; the [command] section is
validated by the model of the command named in [run].
"""

import configparser
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Type, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from atomsync.errors import ConfigError
from atomsync.models import NoiseSpec, ReducedState, SystemParams
from atomsync.services.chaos_service import LyapunovSettings
from atomsync.services.cycles_service import ClassifierSettings
from atomsync.services.integrator_service import IntegratorConfig

COMMANDS = (
    "simulate",
    "friction",
    "cycle-classify",
    "bifurcation",
    "sync-map",
    "lyapunov",
    "lyapunov-map",
    "basins",
    "spectrum",
    "exit-scan",
)

NONE_TOKENS = {"", "none", "null"}


class Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


def _float_list(value: Any) -> Any:
    if value is None:
        return []
    if isinstance(value, str):
        return [float(x) for x in value.replace(";", ",").split(",") if x.strip()]
    return value


class RunSection(Section):
    command: Literal[COMMANDS] = "simulate"
    seed: int = 0
    workers: Optional[int] = Field(default=None, ge=1, description="Defaults to the ATOMSYNC_WORKERS setting")
    out: Optional[str] = None


class InitialSection(Section):
    xi: float = 0.0
    p: float = 60.0
    u: float = 0.0
    v: float = 0.0
    z: float = Field(default=-1.0, ge=-1.0, le=1.0)

    def state(self) -> ReducedState:
        return ReducedState(xi=self.xi, p=self.p, u=self.u, v=self.v, z=self.z).require_finite()


class SimulateSection(Section):
    system: Literal["reduced", "full"] = "reduced"
    node_events: bool = True
    section_events: bool = False
    episodes: bool = True


class FrictionSection(Section):
    p_min: float = Field(default=20.0, gt=0)
    p_max: float = Field(default=400.0, gt=0)
    p_steps: int = Field(default=39, ge=2)
    flights: int = Field(default=20, ge=3)
    settle_flights: int = Field(default=2, ge=0)
    grouping_p0: List[float] = Field(default_factory=list)
    grouping_horizon: float = Field(default=2e4, gt=0)
    spread_tol: float = Field(default=0.05, gt=0)

    @field_validator("grouping_p0", mode="before")
    @classmethod
    def _split(cls, value: Any) -> Any:
        return _float_list(value)


class ClassifySection(Section):
    pass


class BifurcationSection(Section):
    n_min: float = Field(default=3000.0, ge=0)
    n_max: float = Field(default=24000.0, ge=0)
    n_steps: int = Field(default=85, ge=1)
    noise_fraction: float = Field(default=0.0, ge=0, description="Calibrated weak noise when no [noise] section")


class GridSection(Section):
    n_min: float = Field(default=0.0, ge=0)
    n_max: float = Field(default=24000.0, ge=0)
    n_steps: int = Field(default=25, ge=1)
    delta_min: float = -30.0
    delta_max: float = 30.0
    delta_steps: int = Field(default=25, ge=1)


class LyapunovSection(Section):
    box_counting: bool = False
    box_samples: int = Field(default=100000, ge=10)
    box_interval: float = Field(default=0.5, gt=0)


class BasinsSection(Section):
    z0_min: float = Field(default=-1.0, ge=-1.0, le=1.0)
    z0_max: float = Field(default=1.0, ge=-1.0, le=1.0)
    p0_min: float = 0.0
    p0_max: float = 100.0
    z0_steps: int = Field(default=200, ge=2)
    p0_steps: int = Field(default=200, ge=2)
    refine: bool = False
    refine_z0_min: float = Field(default=0.8, ge=-1.0, le=1.0)
    refine_z0_max: float = Field(default=1.0, ge=-1.0, le=1.0)
    refine_p0_min: float = 60.0
    refine_p0_max: float = 70.0
    refine_factor: int = Field(default=2, ge=1)

    @model_validator(mode="after")
    def _refine_needs_extent(self) -> "BasinsSection":
        if self.refine and (self.z0_min == self.z0_max or self.p0_min == self.p0_max):
            raise ValueError("refine needs a parent grid with nonzero z0 and p0 extent")
        return self


class SpectrumSection(Section):
    transient: float = Field(default=2e3, ge=0)
    carrier: Optional[float] = Field(default=None, gt=0)
    window: str = "hann"
    slowest_line: float = Field(default=0.25, gt=0)
    threshold_factor: float = Field(default=10.0, gt=0)
    base: Optional[float] = Field(default=None, gt=0, description="Sideband base offset; trap frequency when unset")


class ExitScanSection(Section):
    axis: Literal["n", "delta"] = "delta"
    start: float = -5.0
    stop: float = -1.0
    steps: int = Field(default=101, ge=2)
    detector_span: float = Field(default=2.0, gt=0)
    p0: float = 50.0
    tau_max: float = Field(default=1e5, gt=0)
    depth: int = Field(default=3, ge=0)
    zoom: int = Field(default=10, ge=2)
    max_flagged: int = Field(default=32, ge=1)
    threshold_factor: float = Field(default=5.0, gt=0)


COMMAND_SECTIONS: Dict[str, Type[Section]] = {
    "simulate": SimulateSection,
    "friction": FrictionSection,
    "cycle-classify": ClassifySection,
    "bifurcation": BifurcationSection,
    "sync-map": GridSection,
    "lyapunov": LyapunovSection,
    "lyapunov-map": GridSection,
    "basins": BasinsSection,
    "spectrum": SpectrumSection,
    "exit-scan": ExitScanSection,
}

SECTION_MODELS: Dict[str, Type[BaseModel]] = {
    "run": RunSection,
    "params": SystemParams,
    "initial": InitialSection,
    "integrator": IntegratorConfig,
    "classifier": ClassifierSettings,
    "lyapunov": LyapunovSettings,
    "noise": NoiseSpec,
}


class ExperimentConfig(BaseModel):
    """Fully resolved experiment: one validated model per section."""

    model_config = ConfigDict(frozen=True)

    run: RunSection
    params: SystemParams
    initial: InitialSection
    integrator: IntegratorConfig
    command: Section
    classifier: ClassifierSettings
    lyapunov: LyapunovSettings
    noise: Optional[NoiseSpec] = None

    @classmethod
    def from_sections(cls, sections: Dict[str, Dict[str, Any]]) -> "ExperimentConfig":
        unknown = set(sections) - set(SECTION_MODELS) - {"command"}
        if unknown:
            raise ConfigError(f"Unknown section(s): {', '.join(sorted(unknown))}")
        cleaned = {name: _none_tokens(body) for name, body in sections.items()}
        try:
            run = RunSection(**cleaned.get("run", {}))
            noise = None
            if "noise" in cleaned:
                body = dict(cleaned["noise"])
                body.setdefault("seed", run.seed)
                noise = NoiseSpec(**body)
            return cls(
                run=run,
                params=SystemParams(**cleaned.get("params", {})),
                initial=InitialSection(**cleaned.get("initial", {})),
                integrator=IntegratorConfig(**cleaned.get("integrator", {})),
                command=COMMAND_SECTIONS[run.command](**cleaned.get("command", {})),
                classifier=ClassifierSettings(**cleaned.get("classifier", {})),
                lyapunov=LyapunovSettings(**cleaned.get("lyapunov", {})),
                noise=noise,
            )
        except ValidationError as e:
            raise ConfigError(_describe(e)) from e
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def to_sections(self) -> Dict[str, Dict[str, Any]]:
        out = {
            "run": self.run.model_dump(),
            "params": self.params.model_dump(),
            "initial": self.initial.model_dump(),
            "integrator": self.integrator.model_dump(),
            "command": self.command.model_dump(),
            "classifier": self.classifier.model_dump(),
            "lyapunov": self.lyapunov.model_dump(),
        }
        if self.noise is not None:
            out["noise"] = self.noise.model_dump()
        return out

    def to_ini(self) -> str:
        lines: List[str] = []
        for name, body in self.to_sections().items():
            lines.append(f"[{name}]")
            for key, value in body.items():
                lines.append(f"{key} = {_format(value)}")
            lines.append("")
        return "\n".join(lines)

    def with_overrides(self, overrides: Sequence[str]) -> "ExperimentConfig":
        sections = self.to_sections()
        apply_overrides(sections, overrides)
        return ExperimentConfig.from_sections(sections)


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        loc = ".".join(str(x) for x in item.get("loc", ()))
        parts.append(f"{loc}: {item.get('msg')}" if loc else str(item.get("msg")))
    return "; ".join(parts)


def _none_tokens(body: Dict[str, Any]) -> Dict[str, Any]:
    return {
        k: None if isinstance(v, str) and v.strip().lower() in NONE_TOKENS else v
        for k, v in body.items()
    }


def _format(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_format(v) for v in value)
    return str(value)


def parse_override(item: str) -> Tuple[str, str, str]:
    """Split 'section.key=value'."""
    if "=" not in item:
        raise ConfigError(f"Override '{item}' is not of the form section.key=value")
    target, value = item.split("=", 1)
    if "." not in target:
        raise ConfigError(f"Override '{item}' needs a section prefix")
    section, key = target.split(".", 1)
    return section.strip(), key.strip(), value.strip()


def apply_overrides(sections: Dict[str, Dict[str, Any]], overrides: Sequence[str]) -> None:
    for item in overrides:
        section, key, value = parse_override(item)
        sections.setdefault(section, {})[key] = value


def read_ini(source: Union[str, Path]) -> Dict[str, Dict[str, Any]]:
    parser = configparser.ConfigParser(interpolation=None)
    # keys are case-sensitive (params.Delta vs params.delta)
    parser.optionxform = str
    inline = isinstance(source, str) and ("\n" in source or source.lstrip().startswith("["))
    try:
        if inline:
            parser.read_string(source)
        elif Path(source).exists():
            parser.read(Path(source))
        else:
            raise ConfigError(f"Experiment file not found: {source}")
    except configparser.Error as e:
        raise ConfigError(f"Cannot parse experiment file: {e}") from e
    return {name: dict(parser.items(name)) for name in parser.sections()}


def load_experiment(
    source: Optional[Union[str, Path]] = None,
    overrides: Sequence[str] = (),
    command: Optional[str] = None,
) -> ExperimentConfig:
    """
    Read an experiment file (or start from defaults), apply overrides and validate.

    `command` forces [run] command so a file can be reused across subcommands.
    """
    sections: Dict[str, Dict[str, Any]] = read_ini(source) if source is not None else {}
    apply_overrides(sections, overrides)
    if command is not None:
        sections.setdefault("run", {})["command"] = command
    return ExperimentConfig.from_sections(sections)

"""
Standing Wave Sync - Errors

Exception hierarchy shared by the simulation services and the CLI.
"""

from typing import Optional

import numpy as np


class AtomSyncError(Exception):
    """Base class for all library errors."""

    category = "library"


class InvalidStateError(AtomSyncError):
    """A state vector contains NaN or infinite components."""

    category = "invalid_state"


class DegenerateParametersError(AtomSyncError):
    """A closed-form expression has a vanishing denominator for these parameters."""

    category = "degenerate_parameters"


class NoTrappedOscillationError(AtomSyncError):
    """The small-oscillation frequency is imaginary or no node well exists."""

    category = "no_trapped_oscillation"


class IntegrationError(AtomSyncError):
    """
    The ODE solver could not continue.

    Carries the last time and state the solver accepted so callers can log
    where the trajectory broke down.
    """

    category = "integration"

    def __init__(
        self,
        message: str,
        last_time: Optional[float] = None,
        last_state: Optional[np.ndarray] = None,
    ):
        super().__init__(message)
        self.last_time = last_time
        self.last_state = None if last_state is None else np.array(last_state, dtype=float)


class InsufficientDataError(AtomSyncError):
    """Not enough samples, events or points for the requested estimate."""

    category = "insufficient_data"


class ResolutionError(AtomSyncError):
    """A record is too short to resolve the requested spectral lines."""

    category = "resolution"


class ConfigError(AtomSyncError):
    """An experiment configuration is invalid."""

    category = "config"


class AllTrappedError(InsufficientDataError):
    """Every grid momentum led to trapping; no ballistic branch to analyse."""

    category = "all_trapped"

    def __init__(self, message: str, p_cr_bound: float):
        super().__init__(message)
        self.p_cr_bound = p_cr_bound


class ParameterError(ConfigError, ValueError):
    """A service argument lies outside the range the computation accepts."""

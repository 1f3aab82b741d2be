"""
Standing Wave Sync - Domain Models

Control parameters, phase-space states and the broadband noise description
for a two-level atom in a standing laser wave. All frequencies are in units
of the single-photon Rabi frequency, positions in units of the inverse wave
number and momenta in units of the photon momentum.
"""

import math
from dataclasses import astuple, dataclass
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from atomsync.errors import InvalidStateError

PUMP_PHASE = math.pi / 4


class SystemParams(BaseModel):
    """Control constants of the full and reduced equations of motion."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(default=0.01, gt=0, description="Photon recoil frequency")
    delta: float = Field(default=24.0, description="Atom-field detuning")
    n: float = Field(default=3000.0, ge=0, description="Mean photon number")
    gamma_a: float = Field(default=0.3, ge=0, description="Spontaneous emission rate")
    gamma_f: float = Field(default=0.0, ge=0, description="Cavity decay rate (full system)")
    Delta: float = Field(default=0.0, description="Cavity-laser detuning (full system)")
    E: float = Field(default=0.0, description="Pump amplitude (full system)")
    phi: float = Field(default=PUMP_PHASE, description="Pump phase (full system)")

    @model_validator(mode="after")
    def _finite(self) -> "SystemParams":
        for name, value in self.model_dump().items():
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
        return self

    @classmethod
    def from_full(
        cls,
        alpha: float,
        delta: float,
        gamma_a: float,
        gamma_f: float,
        E: float,
        Delta: float = 0.0,
        phi: float = PUMP_PHASE,
    ) -> "SystemParams":
        """Build parameters from pump data, setting n to the saturation photon number."""
        n = (E / (2.0 * gamma_f)) ** 2 if gamma_f > 0 else 0.0
        return cls(
            alpha=alpha, delta=delta, n=n, gamma_a=gamma_a,
            gamma_f=gamma_f, Delta=Delta, E=E, phi=phi,
        )

    def reduced_validity(self, rel_tol: float = 1e-9) -> bool:
        """
        Whether the five-dimensional reduced system describes these full-system parameters.

        Requires exact cavity-laser resonance and n equal to the saturation number
        (E/2γ_f)². Parameter sets without a pump (E = 0) are treated as reduced-only
        and always pass.
        """
        if self.E == 0.0:
            return True
        if self.Delta != 0.0 or self.gamma_f <= 0.0:
            return False
        saturation = (self.E / (2.0 * self.gamma_f)) ** 2
        return math.isclose(self.n, saturation, rel_tol=rel_tol)

    def with_updates(self, **changes: float) -> "SystemParams":
        """Copy with some fields replaced (validated)."""
        data = self.model_dump()
        data.update(changes)
        return SystemParams(**data)


@dataclass(frozen=True)
class ReducedState:
    """Phase point (ξ, p, u, v, z) of the reduced equations."""

    xi: float = 0.0
    p: float = 0.0
    u: float = 0.0
    v: float = 0.0
    z: float = -1.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, values) -> "ReducedState":
        arr = np.asarray(values, dtype=float)
        if arr.shape != (5,):
            raise ValueError(f"Reduced state needs 5 components, got shape {arr.shape}")
        return cls(*(float(x) for x in arr))

    def is_finite(self) -> bool:
        return all(math.isfinite(x) for x in astuple(self))

    def require_finite(self) -> "ReducedState":
        if not self.is_finite():
            raise InvalidStateError(f"Non-finite reduced state: {self}")
        return self


@dataclass(frozen=True)
class FullState:
    """Phase point (ξ, p, e, g, x, y, z) of the pumped-cavity equations."""

    xi: float = 0.0
    p: float = 0.0
    e: float = 0.0
    g: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = -1.0

    @property
    def photon_number(self) -> float:
        return (self.e ** 2 + self.g ** 2) / 4.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, values) -> "FullState":
        arr = np.asarray(values, dtype=float)
        if arr.shape != (7,):
            raise ValueError(f"Full state needs 7 components, got shape {arr.shape}")
        return cls(*(float(x) for x in arr))

    def is_finite(self) -> bool:
        return all(math.isfinite(x) for x in astuple(self))

    def require_finite(self) -> "FullState":
        if not self.is_finite():
            raise InvalidStateError(f"Non-finite full state: {self}")
        return self

    def to_reduced(self) -> ReducedState:
        """Project onto the reduced variables u = (ex − gy)/2, v = (gx + ey)/2."""
        return ReducedState(
            xi=self.xi,
            p=self.p,
            u=(self.e * self.x - self.g * self.y) / 2.0,
            v=(self.g * self.x + self.e * self.y) / 2.0,
            z=self.z,
        )

    @classmethod
    def from_reduced(cls, state: ReducedState, prm: SystemParams) -> "FullState":
        """
        Embed a reduced state into the full system with the pumped steady field.

        Uses the stationary field e = E sin φ / γ_f, g = −E cos φ / γ_f and inverts
        u, v for the dipole components x, y.
        """
        if prm.gamma_f <= 0.0 or prm.E == 0.0:
            raise ValueError("A steady field needs gamma_f > 0 and E != 0")
        e = prm.E * math.sin(prm.phi) / prm.gamma_f
        g = -prm.E * math.cos(prm.phi) / prm.gamma_f
        # [[e, -g], [g, e]] @ [x, y] = 2 [u, v]
        det = e * e + g * g
        x = 2.0 * (e * state.u + g * state.v) / det
        y = 2.0 * (-g * state.u + e * state.v) / det
        return cls(xi=state.xi, p=state.p, e=e, g=g, x=x, y=y, z=state.z)


class NoiseSpec(BaseModel):
    """Broadband forcing built from equidistant harmonics with seeded random phases."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    amplitude: float = Field(default=0.0, ge=0, description="Force amplitude per harmonic")
    n_harmonics: int = Field(default=100, ge=1, description="Number of harmonics")
    f_min: float = Field(default=0.05, gt=0, description="Lowest angular frequency")
    f_max: float = Field(default=5.0, gt=0, description="Highest angular frequency")
    seed: int = Field(default=0, description="Phase RNG seed")

    @model_validator(mode="after")
    def _band(self) -> "NoiseSpec":
        if not self.f_min < self.f_max:
            raise ValueError("f_min must be below f_max")
        return self

    def frequencies(self) -> np.ndarray:
        if self.n_harmonics == 1:
            return np.array([self.f_min])
        return np.linspace(self.f_min, self.f_max, self.n_harmonics)

    def phases(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.uniform(0.0, 2.0 * math.pi, self.n_harmonics)

    def harmonics(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.frequencies(), self.phases()

    @classmethod
    def calibrated(
        cls,
        max_force: float,
        fraction: float = 0.01,
        n_harmonics: int = 100,
        f_min: float = 0.05,
        f_max: float = 5.0,
        seed: int = 0,
    ) -> "NoiseSpec":
        """
        Weak-noise default: RMS of the summed force equals `fraction` of `max_force`.

        A sum of N unit cosines with independent uniform phases has RMS sqrt(N/2).
        `max_force` is normally max |u sin ξ| along the unperturbed attractor.
        """
        rms_unit = math.sqrt(n_harmonics / 2.0)
        return cls(
            amplitude=fraction * abs(max_force) / rms_unit,
            n_harmonics=n_harmonics,
            f_min=f_min,
            f_max=f_max,
            seed=seed,
        )


def ground_state(xi: float = 0.0, p: float = 0.0) -> ReducedState:
    """Atom prepared in its ground state: u = v = 0, z = −1."""
    return ReducedState(xi=xi, p=p, u=0.0, v=0.0, z=-1.0)

"""
Standing Wave Sync - Dynamics Service

Right-hand sides of the pumped-cavity and reduced equations of motion,
closed-form results of the adiabatic and Fourier-truncation analyses, and
the broadband noise force.
"""

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from atomsync.errors import (
    DegenerateParametersError,
    InvalidStateError,
    NoTrappedOscillationError,
)
from atomsync.models import FullState, NoiseSpec, ReducedState, SystemParams

# "much less than" conditions are checked as lhs <= VALIDITY_RATIO * rhs
VALIDITY_RATIO = 0.1

FD_STEP = 1e-4


@dataclass(frozen=True)
class ApproximateSolution:
    """Closed-form phase point with the validity flag of its derivation."""

    state: ReducedState
    amplitude: float
    valid: bool
    validity_ratio: float


def _check_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise InvalidStateError(f"Non-finite state components: {values}")


def reduced_rhs_array(y: np.ndarray, alpha: float, delta: float, n: float, gamma_a: float) -> np.ndarray:
    """Vector form of the reduced equations used inside the ODE solvers."""
    xi, p, u, v, z = y
    c = math.cos(xi)
    s = math.sin(xi)
    half_gamma = 0.5 * gamma_a
    return np.array((
        alpha * p,
        -u * s,
        delta * v - half_gamma * u,
        -delta * u + 2.0 * n * z * c - half_gamma * v,
        -2.0 * v * c - gamma_a * (z + 1.0),
    ))


def full_rhs_array(y: np.ndarray, tau: float, prm: SystemParams) -> np.ndarray:
    """Vector form of the pumped-cavity equations."""
    xi, p, e, g, x, yy, z = y
    c = math.cos(xi)
    s = math.sin(xi)
    phase = prm.Delta * tau + prm.phi
    return np.array((
        prm.alpha * p,
        0.5 * (g * yy - e * x) * s,
        yy * c - 2.0 * prm.gamma_f * e + 2.0 * prm.E * math.sin(phase),
        x * c - 2.0 * prm.gamma_f * g - 2.0 * prm.E * math.cos(phase),
        prm.delta * yy + z * g * c - 0.5 * prm.gamma_a * x,
        -prm.delta * x + z * e * c - 0.5 * prm.gamma_a * yy,
        -(g * x + e * yy) * c - prm.gamma_a * (z + 1.0),
    ))


def rhs_reduced(state: ReducedState, prm: SystemParams) -> ReducedState:
    """Time derivative of a reduced phase point (returned in state layout)."""
    y = state.as_array()
    _check_finite(y)
    return ReducedState.from_array(reduced_rhs_array(y, prm.alpha, prm.delta, prm.n, prm.gamma_a))


def rhs_full(state: FullState, prm: SystemParams, tau: float) -> FullState:
    """Time derivative of a full-system phase point at time tau."""
    y = state.as_array()
    _check_finite(y)
    if not math.isfinite(tau):
        raise InvalidStateError(f"Non-finite time {tau}")
    return FullState.from_array(full_rhs_array(y, tau, prm))


def _saturation_denominator(xi: float, prm: SystemParams) -> float:
    c = math.cos(xi)
    denom = prm.delta ** 2 + 2.0 * prm.n * c * c + 0.25 * prm.gamma_a ** 2
    if denom == 0.0:
        raise DegenerateParametersError(
            f"Stationary Bloch solution undefined at xi={xi} (delta=0, gamma_a=0, n cos xi=0)"
        )
    return denom


def steady_state_bloch(xi: float, prm: SystemParams) -> Tuple[float, float, float]:
    """
    Stationary (u_s, v_s, z_s) for an atom held at position xi.

    Obtained by setting u̇ = v̇ = ż = 0 in the reduced equations, so the Bloch
    residual vanishes identically; z_s lies in [−1, 0) and equals −1 at nodes.
    """
    c = math.cos(xi)
    denom = _saturation_denominator(xi, prm)
    u_s = -2.0 * prm.n * prm.delta * c / denom
    v_s = -prm.gamma_a * prm.n * c / denom
    z_s = -(prm.delta ** 2 + 0.25 * prm.gamma_a ** 2) / denom
    return u_s, v_s, z_s


def dipole_force_adiabatic(xi: float, prm: SystemParams) -> float:
    """Gradient force nδ sin 2ξ / D felt by a slow atom (equals −u_s sin ξ)."""
    denom = _saturation_denominator(xi, prm)
    return prm.n * prm.delta * math.sin(2.0 * xi) / denom


def optical_potential(xi: float, prm: SystemParams) -> float:
    """
    Optical potential Π = (δ/2) ln(γ_a²/4 + δ² + 2n cos²ξ).

    The prefactor is the one for which −dΠ/dξ reproduces dipole_force_adiabatic.
    """
    if prm.delta == 0.0:
        return 0.0
    c = math.cos(xi)
    return 0.5 * prm.delta * math.log(0.25 * prm.gamma_a ** 2 + prm.delta ** 2 + 2.0 * prm.n * c * c)


def friction_force_analytic(p_s: float, prm: SystemParams) -> float:
    """
    Velocity-averaged friction force F ≡ −d|p̄|/dτ for a fast atom at large detuning.

    Intended for |δ| ≫ 1 and |αp_s| > γ_a; outside that range it is only a
    qualitative guide. Positive F decelerates.
    """
    doppler = prm.alpha * abs(p_s)
    resonance = doppler ** 2 - prm.delta ** 2 + 0.25 * prm.gamma_a ** 2
    denom = (prm.gamma_a * prm.delta) ** 2 + resonance ** 2
    if denom == 0.0:
        return 0.0
    return -2.0 * prm.n * prm.delta * prm.gamma_a * doppler / denom


def period1_ballistic_solution(tau: float, p_s: float, prm: SystemParams) -> ApproximateSolution:
    """Truncated-Fourier period-1 cycle of an atom flying with mean momentum p_s."""
    wp = prm.alpha * p_s
    gap = prm.delta ** 2 - wp ** 2 + 0.25 * prm.gamma_a ** 2
    denom = gap + prm.n
    if denom == 0.0:
        raise DegenerateParametersError("Ballistic amplitude denominator vanishes")
    amp = prm.n / denom
    ratio = prm.n / gap if gap > 0 else math.inf
    if prm.n == 0.0:
        ratio = 0.0

    phase = wp * tau
    if wp != 0.0:
        p = p_s - (prm.delta * amp / (2.0 * wp)) * math.cos(2.0 * phase)
    else:
        p = p_s
    state = ReducedState(
        xi=phase,
        p=p,
        u=-2.0 * prm.delta * amp * math.cos(phase),
        v=-prm.gamma_a * amp * math.cos(phase) + 2.0 * wp * amp * math.sin(phase),
        z=-1.0 + amp * (1.0 + math.cos(2.0 * phase)),
    )
    return ApproximateSolution(
        state=state, amplitude=amp, valid=ratio <= VALIDITY_RATIO, validity_ratio=ratio
    )


def trap_frequency(prm: SystemParams) -> float:
    """Frequency ω_ξ of small oscillations about the bottom of a node well."""
    a = prm.delta ** 2 + 0.25 * prm.gamma_a ** 2
    radicand = -0.5 * prm.delta ** 2 - 0.125 * prm.gamma_a ** 2 + 0.5 * math.sqrt(
        a * a + 8.0 * prm.n * prm.alpha * abs(prm.delta)
    )
    if radicand < 0.0:
        # round-off below zero when n = 0
        if radicand > -1e-12 * max(a, 1.0):
            return 0.0
        raise NoTrappedOscillationError(f"Squared trap frequency is negative ({radicand})")
    return math.sqrt(radicand)


def period1_trapped_solution(
    tau: float, xi_m: float, prm: SystemParams, well: int = 0
) -> ApproximateSolution:
    """
    Period-1 cycle of an atom oscillating with amplitude xi_m in node well `well`.

    The well sits at ξ = π/2 + π·well; node wells only attract for δ > 0.
    """
    if prm.delta <= 0.0:
        raise NoTrappedOscillationError("Node wells require positive detuning")
    omega = trap_frequency(prm)
    gap = prm.delta ** 2 - omega ** 2 + 0.25 * prm.gamma_a ** 2
    denom = gap + prm.n * xi_m ** 2
    if denom == 0.0:
        raise DegenerateParametersError("Trapped amplitude denominator vanishes")
    amp = prm.n / denom
    ratio = prm.n * xi_m ** 2 / gap if gap > 0 else math.inf

    sign = -1.0 if well % 2 else 1.0
    centre = 0.5 * math.pi + math.pi * well
    c = math.cos(omega * tau)
    s = math.sin(omega * tau)
    p = -(2.0 * prm.delta * amp * xi_m / omega) * s if omega > 0 else 0.0
    state = ReducedState(
        xi=centre + xi_m * c,
        p=p,
        u=2.0 * sign * prm.delta * amp * xi_m * c,
        v=sign * amp * xi_m * (prm.gamma_a * c - 2.0 * omega * s),
        z=-1.0 + amp * xi_m ** 2 * (1.0 + math.cos(2.0 * omega * tau)),
    )
    return ApproximateSolution(
        state=state, amplitude=amp, valid=ratio <= VALIDITY_RATIO, validity_ratio=ratio
    )


def transition_time_estimate(p_s: float, prm: SystemParams, step: float = FD_STEP) -> float:
    """
    Relaxation time τ_s ≈ 1/F′(p_s) toward a quasistationary momentum.

    F′ is a central finite difference of friction_force_analytic; the result is
    positive near an attracting zero and scales as 1/n.
    """
    h = step * max(1.0, abs(p_s))
    derivative = (friction_force_analytic(p_s + h, prm) - friction_force_analytic(p_s - h, prm)) / (2.0 * h)
    if derivative == 0.0 or not math.isfinite(derivative):
        raise DegenerateParametersError(f"Friction slope vanishes at p_s={p_s}")
    return 1.0 / derivative


def lab_frame_dipole(
    u: Union[float, np.ndarray],
    v: Union[float, np.ndarray],
    tau: Union[float, np.ndarray],
    carrier: float,
    prm: SystemParams,
) -> Union[float, np.ndarray]:
    """Dipole moment (units of μ) radiated in the laboratory frame at carrier frequency."""
    if prm.n <= 0.0:
        raise DegenerateParametersError("Lab-frame dipole requires n > 0")
    phase = np.multiply(carrier, tau)
    value = ((np.subtract(u, v)) * np.cos(phase) - (np.add(u, v)) * np.sin(phase)) / math.sqrt(2.0 * prm.n)
    if np.ndim(value) == 0:
        return float(value)
    return value


class NoiseForce:
    """Callable harmonic sum; phases are drawn once at construction."""

    def __init__(self, spec: NoiseSpec):
        self.spec = spec
        self.omegas, self.phases = spec.harmonics()

    def __call__(self, tau: float) -> float:
        if self.spec.amplitude == 0.0:
            return 0.0
        return self.spec.amplitude * float(np.sum(np.cos(self.omegas * tau + self.phases)))

    def series(self, taus: np.ndarray) -> np.ndarray:
        taus = np.asarray(taus, dtype=float)
        if self.spec.amplitude == 0.0:
            return np.zeros_like(taus)
        return self.spec.amplitude * np.cos(np.outer(taus, self.omegas) + self.phases).sum(axis=1)


def noise_force(spec: NoiseSpec, tau: float) -> float:
    """Broadband stochastic-like force at time tau (deterministic for a given seed)."""
    return NoiseForce(spec)(tau)


def rabi_frequency(prm: SystemParams) -> float:
    """Free Rabi frequency √(δ² + 4n)."""
    return math.sqrt(prm.delta ** 2 + 4.0 * prm.n)


def small_oscillation_estimate(prm: SystemParams) -> float:
    """Order-of-magnitude trapped frequency α^{1/2} n^{1/4}."""
    return math.sqrt(prm.alpha) * prm.n ** 0.25


def conserved_quantities(state: ReducedState, prm: SystemParams) -> Tuple[float, float]:
    """Bloch norm u² + v² + n z² and energy αp²/2 − u cos ξ − (δ/2) z."""
    bloch = state.u ** 2 + state.v ** 2 + prm.n * state.z ** 2
    energy = 0.5 * prm.alpha * state.p ** 2 - state.u * math.cos(state.xi) - 0.5 * prm.delta * state.z
    return bloch, energy


def conserved_derivatives(state: ReducedState, prm: SystemParams) -> Tuple[float, float]:
    """
    Time derivatives of the two conserved quantities along the flow.

    Both vanish identically when γ_a = 0.
    """
    d = rhs_reduced(state, prm)
    bloch_dot = 2.0 * (state.u * d.u + state.v * d.v + prm.n * state.z * d.z)
    energy_dot = (
        prm.alpha * state.p * d.p
        + state.u * math.sin(state.xi) * d.xi
        - d.u * math.cos(state.xi)
        - 0.5 * prm.delta * d.z
    )
    return bloch_dot, energy_dot

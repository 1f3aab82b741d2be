"""
Standing Wave Sync - Integrator Service

Adaptive (and optional fixed-step) integration of the equations of motion
with root-polished event detection: node crossings, u = 0 Poincaré sections,
detector hits and user-supplied scalar functions.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from atomsync.errors import IntegrationError, InvalidStateError
from atomsync.models import FullState, NoiseSpec, ReducedState, SystemParams
from atomsync.services.dynamics_service import (
    NoiseForce,
    full_rhs_array,
    reduced_rhs_array,
)

logger = structlog.get_logger(__name__)

REDUCED_COLUMNS = ("xi", "p", "u", "v", "z")
FULL_COLUMNS = ("xi", "p", "e", "g", "x", "y", "z")

EVENT_XTOL = 1e-12
# exact zeros count as non-negative so a scalar stuck at 0 never fires
ZERO_AS_POSITIVE = np.finfo(float).tiny

RhsFunction = Callable[[float, np.ndarray], np.ndarray]


class SystemKind(str, Enum):
    """Which set of equations to integrate."""
    REDUCED = "reduced"
    FULL = "full"


class EventKind(str, Enum):
    """Kinds of scalar event functions."""
    NODE_CROSSING = "node_crossing"
    SECTION_U0 = "section_u0"
    DETECTOR_HIT = "detector_hit"
    CUSTOM = "custom"


class IntegratorConfig(BaseModel):
    """Step control, horizon and recording stride."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rel_tol: float = Field(default=1e-9, gt=0)
    abs_tol: float = Field(default=1e-11, gt=0)
    max_step: float = Field(default=math.inf, gt=0)
    max_tau: float = Field(default=1000.0, gt=0)
    sample_interval: Optional[float] = Field(default=0.1, gt=0)
    method: Literal["DOP853", "RK45", "RK4"] = "DOP853"
    fixed_step: float = Field(default=1e-3, gt=0, description="Step of the RK4 path")


def _u_of(system: SystemKind, y: np.ndarray) -> float:
    if system is SystemKind.REDUCED:
        return y[2]
    return 0.5 * (y[2] * y[4] - y[3] * y[5])


@dataclass(frozen=True)
class EventSpec:
    """
    Scalar event function with a crossing-direction filter.

    direction: +1 keeps rising crossings, −1 falling, 0 both.
    """

    kind: EventKind
    direction: int = 0
    position: Optional[float] = None
    function: Optional[Callable[[float, np.ndarray], float]] = None
    terminal: bool = False
    label: Optional[str] = None

    @classmethod
    def node_crossing(cls) -> "EventSpec":
        return cls(kind=EventKind.NODE_CROSSING)

    @classmethod
    def section_u0(cls) -> "EventSpec":
        return cls(kind=EventKind.SECTION_U0, direction=1)

    @classmethod
    def detector(cls, position: float, terminal: bool = True) -> "EventSpec":
        return cls(kind=EventKind.DETECTOR_HIT, position=position, terminal=terminal)

    @classmethod
    def custom(
        cls,
        function: Callable[[float, np.ndarray], float],
        label: str = "custom",
        direction: int = 0,
        terminal: bool = False,
    ) -> "EventSpec":
        return cls(kind=EventKind.CUSTOM, function=function, label=label,
                   direction=direction, terminal=terminal)

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        return self.kind.value

    def scalar(self, system: SystemKind) -> Callable[[float, np.ndarray], float]:
        if self.kind is EventKind.NODE_CROSSING:
            return lambda t, y: math.cos(y[0])
        if self.kind is EventKind.SECTION_U0:
            return lambda t, y: _u_of(system, y)
        if self.kind is EventKind.DETECTOR_HIT:
            if self.position is None:
                raise ValueError("Detector events need a position")
            position = self.position
            return lambda t, y: y[0] - position
        if self.function is None:
            raise ValueError("Custom events need a function")
        return self.function


@dataclass(frozen=True)
class Event:
    """A located event: kind name, polished time and the state there."""

    kind: str
    time: float
    state: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Recorded samples plus located events; arrays are read-only."""

    system: SystemKind
    times: np.ndarray
    states: np.ndarray
    events: Tuple[Event, ...] = ()
    terminated: bool = False
    columns: Tuple[str, ...] = field(default=REDUCED_COLUMNS)

    def __post_init__(self):
        self.times.setflags(write=False)
        self.states.setflags(write=False)

    def __len__(self) -> int:
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.columns.index(name)]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    def state_at(self, index: int) -> Union[ReducedState, FullState]:
        if self.system is SystemKind.REDUCED:
            return ReducedState.from_array(self.states[index])
        return FullState.from_array(self.states[index])

    def events_of(self, kind: Union[str, EventKind]) -> List[Event]:
        name = kind.value if isinstance(kind, EventKind) else kind
        return [e for e in self.events if e.kind == name]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.states, columns=list(self.columns))
        frame.insert(0, "tau", self.times)
        return frame

    def events_frame(self) -> pd.DataFrame:
        rows = [[e.kind, e.time, *e.state] for e in self.events]
        return pd.DataFrame(rows, columns=["kind", "tau", *self.columns])

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.12g")

    def events_to_csv(self, path: Union[str, Path]) -> None:
        self.events_frame().to_csv(path, index=False, float_format="%.12g")


def make_rhs(
    system: SystemKind, prm: SystemParams, noise: Optional[NoiseSpec] = None
) -> RhsFunction:
    """Right-hand side closure f(τ, y) for the solver, with optional ṗ forcing."""
    force = NoiseForce(noise) if noise is not None and noise.amplitude > 0 else None

    if system is SystemKind.REDUCED:
        alpha, delta, n, gamma_a = prm.alpha, prm.delta, prm.n, prm.gamma_a

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            dy = reduced_rhs_array(y, alpha, delta, n, gamma_a)
            if force is not None:
                dy[1] += force(t)
            return dy
    else:
        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            dy = full_rhs_array(y, t, prm)
            if force is not None:
                dy[1] += force(t)
            return dy

    return rhs


def _sample_grid(t0: float, t1: float, interval: Optional[float]) -> np.ndarray:
    if interval is None:
        return np.array([t1])
    count = int(math.floor((t1 - t0) / interval + 1e-9)) + 1
    grid = t0 + interval * np.arange(count)
    grid = grid[grid <= t1]
    if grid[-1] < t1:
        grid = np.append(grid, t1)
    return grid


def _hermite(t0, y0, f0, t1, y1, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    h00 = 2 * s ** 3 - 3 * s ** 2 + 1
    h10 = s ** 3 - 2 * s ** 2 + s
    h01 = -2 * s ** 3 + 3 * s ** 2
    h11 = s ** 3 - s ** 2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def _crossed(v0: float, v1: float, direction: int) -> bool:
    if direction > 0:
        return v0 < 0.0 <= v1
    if direction < 0:
        return v0 > 0.0 >= v1
    return (v0 < 0.0 <= v1) or (v0 > 0.0 >= v1)


def _rk4_solve(
    rhs: RhsFunction,
    y0: np.ndarray,
    t0: float,
    t1: float,
    cfg: IntegratorConfig,
    t_eval: np.ndarray,
    scalars: Sequence[Callable[[float, np.ndarray], float]],
    specs: Sequence[EventSpec],
):
    """Classical RK4 with fixed step, Hermite dense output and bisection events."""
    h_nominal = cfg.fixed_step
    t, y = t0, y0.copy()
    f = rhs(t, y)
    out_t: List[float] = []
    out_y: List[np.ndarray] = []
    eval_idx = 0
    while eval_idx < len(t_eval) and t_eval[eval_idx] <= t0:
        out_t.append(t_eval[eval_idx])
        out_y.append(y.copy())
        eval_idx += 1
    found: List[List[Tuple[float, np.ndarray]]] = [[] for _ in specs]
    values = [s(t, y) for s in scalars]
    terminated = False

    while t < t1 and not terminated:
        h = min(h_nominal, t1 - t)
        k1 = f
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y_new = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t_new = t + h
        if not np.all(np.isfinite(y_new)):
            raise IntegrationError(f"Non-finite state at tau={t_new}", last_time=t, last_state=y)
        f_new = rhs(t_new, y_new)

        step_end = t_new
        for i, (scalar, spec) in enumerate(zip(scalars, specs)):
            v_new = scalar(t_new, y_new)
            if _crossed(values[i], v_new, spec.direction):
                def g(tt, _s=scalar):
                    return _s(tt, _hermite(t, y, f, t_new, y_new, f_new, tt))
                try:
                    t_root = brentq(g, t, t_new, xtol=EVENT_XTOL)
                except ValueError:
                    t_root = t_new
                y_root = _hermite(t, y, f, t_new, y_new, f_new, t_root)
                found[i].append((t_root, y_root))
                if spec.terminal:
                    terminated = True
                    step_end = min(step_end, t_root)
            values[i] = v_new

        while eval_idx < len(t_eval) and t_eval[eval_idx] <= step_end:
            te = t_eval[eval_idx]
            out_t.append(te)
            out_y.append(_hermite(t, y, f, t_new, y_new, f_new, te))
            eval_idx += 1

        t, y, f = t_new, y_new, f_new

    return np.array(out_t), np.array(out_y).reshape(-1, len(y0)), found, terminated


def _solve(
    rhs: RhsFunction,
    y0: np.ndarray,
    t0: float,
    t1: float,
    cfg: IntegratorConfig,
    t_eval: np.ndarray,
    system: SystemKind,
    events: Sequence[EventSpec],
):
    scalars = [spec.scalar(system) for spec in events]

    if cfg.method == "RK4":
        return _rk4_solve(rhs, y0, t0, t1, cfg, t_eval, scalars, events)

    ivp_events = []
    for scalar, spec in zip(scalars, events):
        def event_fn(t, y, _s=scalar):
            value = _s(t, y)
            return value if value != 0.0 else ZERO_AS_POSITIVE
        event_fn.terminal = spec.terminal
        event_fn.direction = spec.direction
        ivp_events.append(event_fn)

    sol = solve_ivp(
        rhs,
        (t0, t1),
        y0,
        method=cfg.method,
        t_eval=t_eval,
        events=ivp_events or None,
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=cfg.max_step,
    )
    if sol.status < 0:
        last_t = float(sol.t[-1]) if sol.t.size else t0
        last_y = sol.y[:, -1] if sol.t.size else y0
        raise IntegrationError(f"Solver failed: {sol.message}", last_time=last_t, last_state=last_y)
    if sol.y.size and not np.all(np.isfinite(sol.y)):
        bad = int(np.argmax(~np.all(np.isfinite(sol.y), axis=0)))
        good = max(bad - 1, 0)
        raise IntegrationError(
            "Non-finite state in trajectory",
            last_time=float(sol.t[good]),
            last_state=sol.y[:, good],
        )

    found = []
    for i in range(len(events)):
        if sol.t_events is None:
            found.append([])
            continue
        found.append(list(zip(sol.t_events[i].tolist(), list(sol.y_events[i]))))
    return sol.t, sol.y.T, found, sol.status == 1


def _as_initial(system: SystemKind, s0) -> np.ndarray:
    if isinstance(s0, (ReducedState, FullState)):
        y0 = s0.as_array()
    else:
        y0 = np.asarray(s0, dtype=float).copy()
    expected = 5 if system is SystemKind.REDUCED else 7
    if y0.shape != (expected,):
        raise ValueError(f"{system.value} system needs {expected} components, got {y0.shape}")
    if not np.all(np.isfinite(y0)):
        raise InvalidStateError(f"Non-finite initial state {y0}")
    return y0


def integrate(
    system: SystemKind,
    s0: Union[ReducedState, FullState, np.ndarray],
    prm: SystemParams,
    cfg: IntegratorConfig,
    events: Sequence[EventSpec] = (),
    noise: Optional[NoiseSpec] = None,
    t0: float = 0.0,
) -> Trajectory:
    """
    Integrate one system from s0 over [t0, t0 + max_tau].

    Samples are recorded every sample_interval (or only at the ends when it is
    None). Event roots are polished on the solver's dense output, independently
    of the recording stride. A terminal event stops the run and its state
    becomes the last sample.
    """
    y0 = _as_initial(system, s0)
    t1 = t0 + cfg.max_tau
    rhs = make_rhs(system, prm, noise)
    t_eval = _sample_grid(t0, t1, cfg.sample_interval)

    times, states, found, terminated = _solve(rhs, y0, t0, t1, cfg, t_eval, system, events)

    if times.size == 0 or times[0] > t0:
        times = np.concatenate(([t0], times))
        states = np.vstack((y0, states)) if states.size else y0[None, :]

    flat: List[Tuple[float, int, Event]] = []
    for i, (spec, hits) in enumerate(zip(events, found)):
        for t_hit, y_hit in hits:
            flat.append((t_hit, i, Event(kind=spec.name, time=float(t_hit), state=np.asarray(y_hit, dtype=float))))
    flat.sort(key=lambda item: (item[0], item[1]))
    located = tuple(item[2] for item in flat)

    if terminated and located:
        last = max((e for e in located if _is_terminal(e, events)), key=lambda e: e.time, default=None)
        if last is not None and last.time > times[-1]:
            times = np.append(times, last.time)
            states = np.vstack((states, last.state))

    columns = REDUCED_COLUMNS if system is SystemKind.REDUCED else FULL_COLUMNS
    return Trajectory(
        system=system,
        times=np.ascontiguousarray(times, dtype=float),
        states=np.ascontiguousarray(states, dtype=float),
        events=located,
        terminated=bool(terminated),
        columns=columns,
    )


def _is_terminal(event: Event, specs: Sequence[EventSpec]) -> bool:
    return any(s.terminal and s.name == event.kind for s in specs)


def propagate(
    rhs: RhsFunction,
    y0: np.ndarray,
    t0: float,
    t1: float,
    cfg: IntegratorConfig,
) -> np.ndarray:
    """Advance an arbitrary (possibly stacked) system and return the state at t1."""
    y0 = np.asarray(y0, dtype=float)
    if not np.all(np.isfinite(y0)):
        raise InvalidStateError(f"Non-finite state at tau={t0}")
    _, states, _, _ = _solve(rhs, y0, t0, t1, cfg, np.array([t1]), SystemKind.REDUCED, ())
    return states[-1]


def section_points(
    traj: Trajectory,
    spec: EventSpec,
    negative_v_only: bool = False,
    after: float = -math.inf,
) -> np.ndarray:
    """
    States at events of the given kind (optionally only those with v < 0).

    Direction filtering already happened during integration; `after` drops
    events inside a transient.
    """
    width = len(traj.columns)
    hits = [e.state for e in traj.events_of(spec.name) if e.time >= after]
    if not hits:
        return np.empty((0, width))
    points = np.vstack(hits)
    if negative_v_only:
        v = _section_v(traj.system, points)
        points = points[v < 0.0]
    return points


def _section_v(system: SystemKind, points: np.ndarray) -> np.ndarray:
    if system is SystemKind.REDUCED:
        return points[:, 3]
    return 0.5 * (points[:, 3] * points[:, 4] + points[:, 2] * points[:, 5])

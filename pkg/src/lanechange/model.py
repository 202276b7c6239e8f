"""Domain types and double-integrator kinematics shared by the whole package.

Everything here is an immutable value; the operations are pure functions, so
they are safe to call from any number of concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_TIME_EPS = 1e-9


def _require_finite(**fields: float) -> None:
    for name, value in fields.items():
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class EgoState:
    """Planar point-mass state: longitudinal and lateral position/velocity."""

    s_x: float
    v_x: float
    s_y: float
    v_y: float

    def __post_init__(self) -> None:
        _require_finite(s_x=self.s_x, v_x=self.v_x, s_y=self.s_y, v_y=self.v_y)

    def as_array(self) -> np.ndarray:
        return np.array([self.s_x, self.v_x, self.s_y, self.v_y], dtype=float)


@dataclass(frozen=True)
class ControlInput:
    """Longitudinal and lateral acceleration command."""

    u_x: float
    u_y: float

    def __post_init__(self) -> None:
        _require_finite(u_x=self.u_x, u_y=self.u_y)


@dataclass(frozen=True)
class CostateVector:
    """Adjoint values paired with (s_x, v_x, s_y, v_y)."""

    p_1: float
    p_2: float
    p_3: float
    p_4: float

    def __post_init__(self) -> None:
        _require_finite(p_1=self.p_1, p_2=self.p_2, p_3=self.p_3, p_4=self.p_4)


@dataclass(frozen=True)
class BoundaryConditions:
    """Endpoint states of one maneuver; lane changes start and end with zero
    lateral velocity."""

    t_0: float
    t_f: float
    x_0: EgoState
    x_f: EgoState

    def __post_init__(self) -> None:
        _require_finite(t_0=self.t_0, t_f=self.t_f)
        if not self.t_f > self.t_0:
            raise ValueError(f"t_f must exceed t_0, got [{self.t_0}, {self.t_f}]")
        if self.x_0.v_y != 0.0 or self.x_f.v_y != 0.0:
            raise ValueError("boundary lateral velocities must be zero")

    @property
    def duration(self) -> float:
        return self.t_f - self.t_0


@dataclass(frozen=True)
class AxisCubic:
    """Cubic position polynomial in absolute time, valid on [t_a, t_b].

    position(t) = c0 + c1*t + c2*t^2 + c3*t^3. Velocity, acceleration and
    jerk come from exact differentiation; nothing in the package ever
    differentiates numerically.
    """

    c0: float
    c1: float
    c2: float
    c3: float
    t_a: float
    t_b: float

    def __post_init__(self) -> None:
        _require_finite(c0=self.c0, c1=self.c1, c2=self.c2, c3=self.c3,
                        t_a=self.t_a, t_b=self.t_b)
        if not self.t_b > self.t_a:
            raise ValueError(f"empty segment interval [{self.t_a}, {self.t_b}]")

    def position(self, t):
        return ((self.c3 * t + self.c2) * t + self.c1) * t + self.c0

    def velocity(self, t):
        return (3.0 * self.c3 * t + 2.0 * self.c2) * t + self.c1

    def acceleration(self, t):
        return 6.0 * self.c3 * t + 2.0 * self.c2

    def jerk(self) -> float:
        return 6.0 * self.c3


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered samples of (t, state, input) on a shared grid."""

    samples: tuple[tuple[float, EgoState, ControlInput], ...]

    def __post_init__(self) -> None:
        times = [t for t, _, _ in self.samples]
        if any(b - a <= 0.0 for a, b in zip(times, times[1:])):
            raise ValueError("sample times must be strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _, _ in self.samples])


def integrate_dynamics(state: EgoState, inp: ControlInput, dt: float) -> EgoState:
    """Advance the double integrator by dt under a constant input.

    The update is the exact flow (s += v*dt + u*dt^2/2, v += u*dt), not an
    Euler step, so composing n steps of dt equals one step of n*dt.
    """
    _require_finite(dt=dt)
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    half = 0.5 * dt * dt
    return EgoState(
        s_x=state.s_x + state.v_x * dt + inp.u_x * half,
        v_x=state.v_x + inp.u_x * dt,
        s_y=state.s_y + state.v_y * dt + inp.u_y * half,
        v_y=state.v_y + inp.u_y * dt,
    )


def _check_tiling(segments: tuple[AxisCubic, ...] | list[AxisCubic], label: str) -> None:
    if not segments:
        raise ValueError(f"{label}: no segments")
    for left, right in zip(segments, segments[1:]):
        if abs(right.t_a - left.t_b) > _TIME_EPS:
            raise ValueError(
                f"{label}: segments must tile the interval; got a gap/overlap "
                f"between t={left.t_b} and t={right.t_a}"
            )


def _eval_piecewise(segments, times: np.ndarray):
    """Evaluate position/velocity/acceleration, taking the left segment at
    interior boundaries."""
    ends = np.array([seg.t_b for seg in segments])
    # side="left": a time equal to a segment end maps to that (left) segment
    idx = np.searchsorted(ends, times, side="left")
    idx = np.minimum(idx, len(segments) - 1)
    pos = np.empty_like(times)
    vel = np.empty_like(times)
    acc = np.empty_like(times)
    for k, seg in enumerate(segments):
        mask = idx == k
        if not np.any(mask):
            continue
        t = times[mask]
        pos[mask] = seg.position(t)
        vel[mask] = seg.velocity(t)
        acc[mask] = seg.acceleration(t)
    return pos, vel, acc


def sample_cubic_pair(x_axis, y_axis, dt: float) -> Trajectory:
    """Sample a piecewise-cubic plan on a uniform grid.

    Both axis segment lists must tile the same [t_0, t_f]. The final sample
    lands exactly on t_f even when the span is not an integer multiple of dt.
    """
    if dt <= 0.0 or not math.isfinite(dt):
        raise ValueError(f"dt must be positive, got {dt}")
    x_axis = tuple(x_axis)
    y_axis = tuple(y_axis)
    _check_tiling(x_axis, "x axis")
    _check_tiling(y_axis, "y axis")
    t0x, tfx = x_axis[0].t_a, x_axis[-1].t_b
    t0y, tfy = y_axis[0].t_a, y_axis[-1].t_b
    if abs(t0x - t0y) > _TIME_EPS or abs(tfx - tfy) > _TIME_EPS:
        raise ValueError(
            f"axis spans differ: x covers [{t0x}, {tfx}], y covers [{t0y}, {tfy}]"
        )

    n = int(math.floor((tfx - t0x) / dt + _TIME_EPS))
    times = t0x + dt * np.arange(n + 1)
    if times[-1] < tfx - _TIME_EPS:
        times = np.append(times, tfx)
    else:
        times[-1] = tfx

    px, vx, ax = _eval_piecewise(x_axis, times)
    py, vy, ay = _eval_piecewise(y_axis, times)
    samples = tuple(
        (float(t), EgoState(float(sx), float(svx), float(sy), float(svy)),
         ControlInput(float(ux), float(uy)))
        for t, sx, svx, sy, svy, ux, uy in zip(times, px, vx, py, vy, ax, ay)
    )
    return Trajectory(samples=samples)

"""Closed-form lane-change planning with an interior collision constraint.

Each axis of the point mass is a double integrator with running cost
(u_x^2 + u_y^2)/2, so optimal position histories are cubic in time between
conditions. Forcing the ego through a moving safety-corner point at a free
interior time t_i splits each axis into two cubics joined with continuous
position, velocity and acceleration; for a fixed t_i the sixteen
coefficients come from two 8x8 linear solves sharing one system matrix.
The only remaining unknown, t_i, is found by a sign-change scan plus
bisection on the Hamiltonian jump residual.

Sign conventions used throughout (and pinned by the tests):

* adjoints satisfy p1 = s_x''' (the jerk, constant per segment) and
  p2 = -s_x''; same pattern laterally for (p3, p4);
* the position adjoints jump by phi at t_i: p1(-) = p1(+) + phi_1, hence
  phi_1 = 6*(a3 - b3) with a3/b3 the leading coefficients of the left and
  right cubic, i.e. the jerk step (right minus left) equals -phi_1;
* along an optimal arc H = -(p2^2 + p4^2)/2 + p1*v_x + p3*v_y, and the
  jump residual is R = H(-) - H(+) - xdot_s(t_i) * phi_1, which vanishes
  at the optimal interior time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from lanechange.model import AxisCubic, BoundaryConditions, CostateVector
from lanechange.predictor import ObstaclePolynomial

_ENDPOINT_GUARD = 1e-6      # t_i closer than this to an endpoint is rejected
_SWEEP_MARGIN = 0.05        # excluded band next to each endpoint in plan()
_SWEEP_POINTS = 200
# the contract is |dt_i| <= 1e-9; going to ~1e-13 costs a dozen extra
# bisections and keeps the residual at the root small even when its slope
# near the root is of order 1e4
_BISECT_TOL = 1e-13
_CLEARANCE_DT = 0.01
_CONTACT_EPS = 1e-7         # boundary contact within this margin is not "inside"


class SolverError(RuntimeError):
    """The fixed-time linear system was singular or too ill-conditioned."""


class InfeasibleError(RuntimeError):
    """No admissible interior time was found; carries the residual sweep."""

    def __init__(self, message: str, sweep=None):
        super().__init__(message)
        self.sweep = sweep


@dataclass(frozen=True)
class SafetyEnvelope:
    """Obstacle footprint and critical safety margins.

    The safety region around a surrounding vehicle is its footprint inflated
    to half-extents (length/2 + margin_x, width/2 + margin_y).
    """

    length: float
    width: float
    margin_x: float
    margin_y: float

    def __post_init__(self) -> None:
        for name in ("length", "width", "margin_x", "margin_y"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be positive, got {value!r}")

    @property
    def half_extent_x(self) -> float:
        return 0.5 * self.length + self.margin_x

    @property
    def half_extent_y(self) -> float:
        return 0.5 * self.width + self.margin_y


class ConstraintSide(enum.Enum):
    """Which corner of the safety region the ego is forced through.

    REAR_CROSS: pass ahead of a vehicle closing from behind in the target
    lane (corner at +length/2+margin_x, -width/2-margin_y).
    FRONT_CROSS: slot in behind a vehicle ahead (corner at
    -length/2-margin_x, +width/2+margin_y).
    """

    REAR_CROSS = "rear_cross"
    FRONT_CROSS = "front_cross"


@dataclass(frozen=True)
class PlanningProblem:
    boundary: BoundaryConditions
    obstacle: ObstaclePolynomial
    envelope: SafetyEnvelope
    side: ConstraintSide

    def __post_init__(self) -> None:
        if self.obstacle.valid_until < self.boundary.t_f:
            raise ValueError(
                "obstacle prediction expires at "
                f"{self.obstacle.valid_until} before t_f={self.boundary.t_f}"
            )


@dataclass(frozen=True)
class PiecewiseCubicPlan:
    """Solution of one planning problem: one or two cubics per axis."""

    x_segments: tuple[AxisCubic, ...]
    y_segments: tuple[AxisCubic, ...]
    t_i: float | None
    phi_1: float
    phi_3: float
    cost: float
    constrained: bool

    @property
    def t_0(self) -> float:
        return self.x_segments[0].t_a

    @property
    def t_f(self) -> float:
        return self.x_segments[-1].t_b


def _segment_effort(seg: AxisCubic) -> float:
    """Exact integral of acceleration^2 / 2 over the segment."""

    def antiderivative(t: float) -> float:
        # acceleration(t) = 2*c2 + 6*c3*t
        return 2.0 * seg.c2 ** 2 * t + 6.0 * seg.c2 * seg.c3 * t ** 2 \
            + 6.0 * seg.c3 ** 2 * t ** 3

    return antiderivative(seg.t_b) - antiderivative(seg.t_a)


def plan_cost(plan: PiecewiseCubicPlan) -> float:
    """Closed-form value of the effort integral, additive over segments and axes."""
    return float(
        sum(_segment_effort(seg) for seg in plan.x_segments)
        + sum(_segment_effort(seg) for seg in plan.y_segments)
    )


def _hermite_coefficients(t0, tf, s0, v0, sf, vf) -> np.ndarray:
    """The unique cubic matching position and velocity at both endpoints."""
    system = np.array([
        [1.0, t0, t0 * t0, t0 ** 3],
        [0.0, 1.0, 2.0 * t0, 3.0 * t0 * t0],
        [1.0, tf, tf * tf, tf ** 3],
        [0.0, 1.0, 2.0 * tf, 3.0 * tf * tf],
    ])
    return np.linalg.solve(system, np.array([s0, v0, sf, vf], dtype=float))


def unconstrained_plan(boundary: BoundaryConditions) -> PiecewiseCubicPlan:
    """Minimum-effort plan with no interior condition: one cubic per axis."""
    t0, tf = boundary.t_0, boundary.t_f
    cx = _hermite_coefficients(t0, tf, boundary.x_0.s_x, boundary.x_0.v_x,
                               boundary.x_f.s_x, boundary.x_f.v_x)
    cy = _hermite_coefficients(t0, tf, boundary.x_0.s_y, boundary.x_0.v_y,
                               boundary.x_f.s_y, boundary.x_f.v_y)
    x_seg = (AxisCubic(*cx, t_a=t0, t_b=tf),)
    y_seg = (AxisCubic(*cy, t_a=t0, t_b=tf),)
    draft = PiecewiseCubicPlan(x_seg, y_seg, None, 0.0, 0.0, 0.0, False)
    return PiecewiseCubicPlan(x_seg, y_seg, None, 0.0, 0.0, plan_cost(draft), False)


def constraint_target(obstacle: ObstaclePolynomial, envelope: SafetyEnvelope,
                      side: ConstraintSide, t: float) -> tuple[float, float]:
    """Corner of the obstacle's safety region the ego must pass through at t."""
    if t > obstacle.valid_until:
        raise ValueError(
            f"t={t} is beyond the obstacle prediction validity "
            f"({obstacle.valid_until})"
        )
    if side is ConstraintSide.REAR_CROSS:
        return (obstacle.position(t) + envelope.half_extent_x,
                obstacle.y_s - envelope.half_extent_y)
    return (obstacle.position(t) - envelope.half_extent_x,
            obstacle.y_s + envelope.half_extent_y)


def _fixed_time_matrix(t0: float, ti: float, tf: float) -> np.ndarray:
    """8x8 system for two cubics [a0..a3, b0..b3] on [t0, ti] and [ti, tf].

    Rows: endpoint position/velocity (4), continuity of position, velocity
    and acceleration at ti (3), and the interior position equality (1).
    The matrix depends only on the three times, so one factorization serves
    both axes.
    """
    def pos(t):  # noqa: E306
        return [1.0, t, t * t, t ** 3]

    def vel(t):
        return [0.0, 1.0, 2.0 * t, 3.0 * t * t]

    def acc(t):
        return [0.0, 0.0, 2.0, 6.0 * t]

    zero = [0.0, 0.0, 0.0, 0.0]
    neg = lambda row: [-v for v in row]  # noqa: E731
    return np.array([
        pos(t0) + zero,
        vel(t0) + zero,
        zero + pos(tf),
        zero + vel(tf),
        pos(ti) + neg(pos(ti)),
        vel(ti) + neg(vel(ti)),
        acc(ti) + neg(acc(ti)),
        pos(ti) + zero,
    ])


def solve_fixed_time(problem: PlanningProblem, t_i: float) -> PiecewiseCubicPlan:
    """Solve the interior-constrained problem for a prescribed interior time."""
    bc = problem.boundary
    t0, tf = bc.t_0, bc.t_f
    if not (t0 < t_i < tf):
        raise ValueError(f"t_i={t_i} outside ({t0}, {tf})")
    if min(t_i - t0, tf - t_i) < _ENDPOINT_GUARD:
        raise SolverError(
            f"t_i={t_i} within {_ENDPOINT_GUARD} of an endpoint; the two-segment "
            "system is numerically singular there"
        )

    x_c, y_c = constraint_target(problem.obstacle, problem.envelope,
                                 problem.side, t_i)
    system = _fixed_time_matrix(t0, t_i, tf)
    rhs = np.array([
        [bc.x_0.s_x, bc.x_0.s_y],
        [bc.x_0.v_x, bc.x_0.v_y],
        [bc.x_f.s_x, bc.x_f.s_y],
        [bc.x_f.v_x, bc.x_f.v_y],
        [0.0, 0.0],
        [0.0, 0.0],
        [0.0, 0.0],
        [x_c, y_c],
    ])
    try:
        coeffs = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular fixed-time system at t_i={t_i}: {exc}") from exc
    residual = np.abs(system @ coeffs - rhs).max()
    scale = max(1.0, np.abs(rhs).max())
    if not np.isfinite(residual) or residual > 1e-6 * scale:
        raise SolverError(
            f"fixed-time solve at t_i={t_i} is unreliable "
            f"(residual {residual:.3e}); refusing to regularize"
        )

    ax, bx = coeffs[:4, 0], coeffs[4:, 0]
    ay, by = coeffs[:4, 1], coeffs[4:, 1]
    x_segments = (AxisCubic(*ax, t_a=t0, t_b=t_i), AxisCubic(*bx, t_a=t_i, t_b=tf))
    y_segments = (AxisCubic(*ay, t_a=t0, t_b=t_i), AxisCubic(*by, t_a=t_i, t_b=tf))
    phi_1 = 6.0 * (ax[3] - bx[3])
    phi_3 = 6.0 * (ay[3] - by[3])
    draft = PiecewiseCubicPlan(x_segments, y_segments, t_i, phi_1, phi_3, 0.0, True)
    return PiecewiseCubicPlan(x_segments, y_segments, t_i, phi_1, phi_3,
                              plan_cost(draft), True)


def costates_at(plan: PiecewiseCubicPlan, t: float,
                side: str = "left") -> CostateVector:
    """Reconstruct the adjoints from the trajectory polynomials.

    Position adjoints equal the per-segment jerk, velocity adjoints the
    negated acceleration (so the optimal input is the acceleration itself).
    At the interior time the left/right segment choice decides which side
    of the jump is reported.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be left or right, got {side!r}")
    if plan.t_i is None or t < plan.t_i or (t == plan.t_i and side == "left"):
        seg_x, seg_y = plan.x_segments[0], plan.y_segments[0]
    else:
        seg_x, seg_y = plan.x_segments[-1], plan.y_segments[-1]
    return CostateVector(
        p_1=seg_x.jerk(),
        p_2=-float(seg_x.acceleration(t)),
        p_3=seg_y.jerk(),
        p_4=-float(seg_y.acceleration(t)),
    )


def _hamiltonian(seg_x: AxisCubic, seg_y: AxisCubic, t: float) -> float:
    # p1 = jerk, p2 = -acceleration per axis; H = -(p2^2+p4^2)/2 + p1 vx + p3 vy
    p2 = -seg_x.acceleration(t)
    p4 = -seg_y.acceleration(t)
    return (-0.5 * (p2 * p2 + p4 * p4)
            + seg_x.jerk() * seg_x.velocity(t)
            + seg_y.jerk() * seg_y.velocity(t))


def hamiltonian_jump_residual(plan: PiecewiseCubicPlan,
                              obstacle: ObstaclePolynomial) -> float:
    """R(t_i) = H(-) - H(+) - xdot_s(t_i) * phi_1; zero at the optimal t_i."""
    if not plan.constrained or plan.t_i is None:
        raise ValueError("jump residual is defined only for constrained plans")
    t_i = plan.t_i
    h_minus = _hamiltonian(plan.x_segments[0], plan.y_segments[0], t_i)
    h_plus = _hamiltonian(plan.x_segments[1], plan.y_segments[1], t_i)
    return h_minus - h_plus - obstacle.velocity(t_i) * plan.phi_1


def _clears_safety_region(candidate: PiecewiseCubicPlan, problem: PlanningProblem,
                          dt: float = _CLEARANCE_DT) -> bool:
    """True when no sample lies strictly inside the inflated safety region."""
    bc = problem.boundary
    n = int(math.ceil(bc.duration / dt))
    times = np.linspace(bc.t_0, bc.t_f, n + 1)
    sx = _eval_positions(candidate.x_segments, times)
    sy = _eval_positions(candidate.y_segments, times)
    obs_x = problem.obstacle.position(times)
    dx = np.abs(sx - obs_x) - problem.envelope.half_extent_x
    dy = np.abs(sy - problem.obstacle.y_s) - problem.envelope.half_extent_y
    inside = (dx < -_CONTACT_EPS) & (dy < -_CONTACT_EPS)
    return not bool(inside.any())


def _eval_positions(segments, times: np.ndarray) -> np.ndarray:
    ends = np.array([seg.t_b for seg in segments])
    idx = np.minimum(np.searchsorted(ends, times, side="left"), len(segments) - 1)
    out = np.empty_like(times)
    for k, seg in enumerate(segments):
        mask = idx == k
        if np.any(mask):
            out[mask] = seg.position(times[mask])
    return out


def _bisect_root(f, lo: float, hi: float, f_lo: float, f_hi: float) -> float:
    """Plain bisection; the residual is smooth and brackets come pre-signed."""
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_lo < 0.0) == (f_mid < 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi)


def plan(problem: PlanningProblem) -> PiecewiseCubicPlan:
    """Solve the full problem, optimizing the interior time when it binds.

    Returns the unconstrained optimum when it already clears the obstacle's
    safety region everywhere; otherwise scans the Hamiltonian jump residual
    for sign changes, refines each bracket by bisection and returns the
    cheapest rooted plan.
    """
    free = unconstrained_plan(problem.boundary)
    if _clears_safety_region(free, problem):
        return free

    bc = problem.boundary
    lo = bc.t_0 + _SWEEP_MARGIN
    hi = bc.t_f - _SWEEP_MARGIN
    grid = np.linspace(lo, hi, _SWEEP_POINTS)

    def residual_at(t: float) -> float:
        return hamiltonian_jump_residual(solve_fixed_time(problem, t),
                                         problem.obstacle)

    values = np.full(grid.shape, np.nan)
    for k, t in enumerate(grid):
        try:
            values[k] = residual_at(float(t))
        except SolverError:
            continue

    roots: list[float] = []
    for k in range(len(grid) - 1):
        f_lo, f_hi = values[k], values[k + 1]
        if not (np.isfinite(f_lo) and np.isfinite(f_hi)):
            continue
        if f_lo == 0.0:
            roots.append(float(grid[k]))
        elif (f_lo < 0.0) != (f_hi < 0.0):
            roots.append(_bisect_root(residual_at, float(grid[k]),
                                      float(grid[k + 1]), f_lo, f_hi))
    if np.isfinite(values[-1]) and values[-1] == 0.0:
        roots.append(float(grid[-1]))

    candidates: list[PiecewiseCubicPlan] = []
    for root in roots:
        if any(abs(root - c.t_i) < 1e-6 for c in candidates):
            continue
        try:
            candidates.append(solve_fixed_time(problem, root))
        except SolverError:
            continue

    if not candidates:
        raise InfeasibleError(
            "no interior-time root: the unconstrained plan violates the safety "
            "region but the jump residual never changes sign",
            sweep=list(zip(grid.tolist(), values.tolist())),
        )
    # minimum cost; ties resolved toward the earliest interior time
    return min(candidates, key=lambda c: (c.cost, c.t_i))

"""Direct-transcription cross-check for the closed-form planner.

The same minimum-effort problem is transcribed over N piecewise-constant
input intervals with the exact discrete double-integrator map, giving an
equality-constrained quadratic program solved by one dense symmetric
indefinite KKT factorization. Because the discretization of the dynamics
is exact, the only gap to the continuous optimum is the piecewise
constancy of the inputs, which shrinks as O(dt^2).

Used by the tests and the CLI's --verify mode only; the planner never
calls into this module.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from lanechange.model import ControlInput, EgoState, integrate_dynamics
from lanechange.planner import InfeasibleError, PlanningProblem, constraint_target

_KKT_RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class DiscretePlan:
    """Piecewise-constant-input solution on a uniform grid.

    The stored states are produced by running the exact discrete dynamics
    under the stored inputs, so they satisfy the recursion by construction.
    """

    N: int
    dt: float
    inputs: tuple[ControlInput, ...]
    states: tuple[EgoState, ...]
    cost: float

    def dynamics_residual(self) -> float:
        """Largest recursion defect; zero up to float rounding by construction."""
        worst = 0.0
        for k in range(self.N):
            nxt = integrate_dynamics(self.states[k], self.inputs[k], self.dt)
            worst = max(
                worst,
                abs(nxt.s_x - self.states[k + 1].s_x),
                abs(nxt.v_x - self.states[k + 1].v_x),
                abs(nxt.s_y - self.states[k + 1].s_y),
                abs(nxt.v_y - self.states[k + 1].v_y),
            )
        return worst


def _position_row(N: int, dt: float, node: int) -> np.ndarray:
    """Coefficients of s(t_node) - s_drift on the N input variables of one axis.

    With the exact discrete map, input u_k contributes
    dt^2 * (node - k - 1/2) to the position at node > k.
    """
    row = np.zeros(N)
    k = np.arange(node)
    row[:node] = dt * dt * (node - k - 0.5)
    return row


def _velocity_row(N: int, dt: float, node: int) -> np.ndarray:
    row = np.zeros(N)
    row[:node] = dt
    return row


def solve_collocation(problem: PlanningProblem, N: int,
                      t_i: float | None = None) -> DiscretePlan:
    """Minimize the summed squared input over the exact discrete dynamics.

    Endpoint positions and velocities are equality constraints on both axes;
    when t_i is given it is snapped to the nearest grid node and the
    safety-corner position equality is imposed there. Solved as one dense
    symmetric indefinite KKT system; a rank-deficient system is reported as
    infeasible, never regularized.
    """
    if N < 50:
        raise ValueError(f"N must be >= 50, got {N}")
    bc = problem.boundary
    dt = bc.duration / N
    x0, xf = bc.x_0, bc.x_f

    rows: list[np.ndarray] = []
    rhs: list[float] = []

    def add_axis_rows(axis: str, s0: float, v0: float, sf: float, vf: float) -> None:
        offset = 0 if axis == "x" else N
        pos = np.zeros(2 * N)
        pos[offset:offset + N] = _position_row(N, dt, N)
        rows.append(pos)
        rhs.append(sf - (s0 + v0 * bc.duration))
        vel = np.zeros(2 * N)
        vel[offset:offset + N] = _velocity_row(N, dt, N)
        rows.append(vel)
        rhs.append(vf - v0)

    add_axis_rows("x", x0.s_x, x0.v_x, xf.s_x, xf.v_x)
    add_axis_rows("y", x0.s_y, x0.v_y, xf.s_y, xf.v_y)

    if t_i is not None:
        node = int(round((t_i - bc.t_0) / dt))
        if not 0 < node < N:
            raise ValueError(
                f"t_i={t_i} snaps to node {node}, which is not interior"
            )
        t_node = bc.t_0 + node * dt
        x_c, y_c = constraint_target(problem.obstacle, problem.envelope,
                                     problem.side, t_node)
        row = np.zeros(2 * N)
        row[:N] = _position_row(N, dt, node)
        rows.append(row)
        rhs.append(x_c - (x0.s_x + x0.v_x * node * dt))
        row = np.zeros(2 * N)
        row[N:] = _position_row(N, dt, node)
        rows.append(row)
        rhs.append(y_c - (x0.s_y + x0.v_y * node * dt))

    A = np.vstack(rows)
    b = np.asarray(rhs)
    n_vars = 2 * N
    n_cons = A.shape[0]
    kkt = np.zeros((n_vars + n_cons, n_vars + n_cons))
    kkt[:n_vars, :n_vars] = dt * np.eye(n_vars)
    kkt[:n_vars, n_vars:] = A.T
    kkt[n_vars:, :n_vars] = A
    full_rhs = np.concatenate([np.zeros(n_vars), b])
    try:
        solution = np.linalg.solve(kkt, full_rhs)
    except np.linalg.LinAlgError as exc:
        raise InfeasibleError(f"rank-deficient KKT system: {exc}") from exc
    u = solution[:n_vars]
    defect = np.abs(A @ u - b).max() / max(1.0, np.abs(b).max())
    if not np.isfinite(defect) or defect > _KKT_RESIDUAL_TOL:
        raise InfeasibleError(
            f"equality system inconsistent (relative defect {defect:.3e})"
        )

    inputs = tuple(ControlInput(float(u[k]), float(u[N + k])) for k in range(N))
    states = [x0]
    for k in range(N):
        states.append(integrate_dynamics(states[-1], inputs[k], dt))
    cost = 0.5 * dt * float(u @ u)
    return DiscretePlan(N=N, dt=dt, inputs=inputs, states=tuple(states), cost=cost)


def grid_search_time(problem: PlanningProblem, N: int, t_grid: int,
                     max_workers: int | None = None) -> tuple[float, DiscretePlan]:
    """Brute-force the interior time over a uniform grid of candidates.

    Every candidate is an independent QP, so they are evaluated on a thread
    pool (the dense solves release the GIL); the reduction is by minimum
    cost with ties broken toward the earliest time, which keeps the result
    deterministic regardless of scheduling.
    """
    if t_grid < 50:
        raise ValueError(f"t_grid must be >= 50, got {t_grid}")
    bc = problem.boundary
    times = np.linspace(bc.t_0, bc.t_f, t_grid + 2)[1:-1]

    def attempt(t: float):
        try:
            return t, solve_collocation(problem, N, t_i=t)
        except (InfeasibleError, ValueError):
            return t, None

    workers = max_workers or 4
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(attempt, [float(t) for t in times]))

    feasible = [(t, p) for t, p in results if p is not None]
    if not feasible:
        raise InfeasibleError("every candidate interior time was infeasible")
    best_t, best_plan = min(feasible, key=lambda tp: (tp[1].cost, tp[0]))
    return best_t, best_plan


def refine_cost(problem: PlanningProblem, t_i: float | None,
                levels=(100, 200, 400)) -> list[float]:
    """Costs for a nested sequence of grid refinements (diagnostic helper)."""
    return [solve_collocation(problem, n, t_i=t_i).cost for n in levels]

"""Surrounding-vehicle longitudinal prediction.

The chain runs over per-step displacement increments rather than absolute
positions: increments keep the state space small and make constant-speed
driving a stationary input. A mixture of per-lag transition matrices with
nonnegative weights summing to one extends the chain beyond first order
without the parameter blow-up of a full high-order model. The rolled-out
expected displacements, together with the observed samples, are fitted by
an unweighted least-squares cubic anchored in absolute time.

Estimation and prediction are pure functions of their inputs, and a fitted
model is immutable, so everything here can be shared across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_ROW_TOL = 1e-12
_SIMPLEX_TOL = 1e-10
_GRAD_TOL = 1e-8
_MAX_ITERS = 10_000


class GridRangeError(ValueError):
    """An observed increment falls outside the discretization span."""


class EstimationError(RuntimeError):
    """The observation sequence carries no usable transitions."""


@dataclass(frozen=True)
class ObservationHistory:
    """Uniformly sampled longitudinal track of one surrounding vehicle.

    positions are absolute (m); the final sample is taken at absolute time
    t_end, so sample k sits at t_end - (len-1-k)*dt_obs. The lateral
    position is constant over the window.
    """

    dt_obs: float
    positions: tuple[float, ...]
    y_lat: float
    t_end: float = 0.0

    def __post_init__(self) -> None:
        if self.dt_obs <= 0.0 or not math.isfinite(self.dt_obs):
            raise ValueError(f"dt_obs must be positive, got {self.dt_obs}")
        if len(self.positions) < 2:
            raise ValueError("need at least two samples")
        if not all(math.isfinite(p) for p in self.positions):
            raise ValueError("positions must be finite")
        if not (math.isfinite(self.y_lat) and math.isfinite(self.t_end)):
            raise ValueError("y_lat and t_end must be finite")

    def increments(self) -> np.ndarray:
        return np.diff(np.asarray(self.positions, dtype=float))

    def times(self) -> np.ndarray:
        n = len(self.positions)
        return self.t_end - self.dt_obs * np.arange(n - 1, -1, -1)


@dataclass(frozen=True)
class StateGrid:
    """Uniform bins over displacement increments."""

    bin_width: float
    origin: float
    m_states: int

    def __post_init__(self) -> None:
        if self.bin_width <= 0.0:
            raise ValueError(f"bin_width must be positive, got {self.bin_width}")
        if self.m_states < 2:
            raise ValueError(f"need at least two states, got {self.m_states}")

    def centers(self) -> np.ndarray:
        return self.origin + (np.arange(self.m_states) + 0.5) * self.bin_width


@dataclass(frozen=True)
class MarkovModel:
    """Per-lag transition matrices plus mixture weights.

    Each matrix is row-stochastic with rows indexed by the lagged state and
    columns by the successor state; weights live on the probability simplex.
    """

    order: int
    matrices: tuple[np.ndarray, ...]
    lag_weights: np.ndarray

    def __post_init__(self) -> None:
        if self.order != len(self.matrices):
            raise ValueError("order must match the number of matrices")
        for lag, q in enumerate(self.matrices, start=1):
            if np.any(q < 0.0):
                raise ValueError(f"lag-{lag} matrix has negative entries")
            if np.abs(q.sum(axis=1) - 1.0).max() > _ROW_TOL:
                raise ValueError(f"lag-{lag} matrix rows must sum to one")
        lam = np.asarray(self.lag_weights, dtype=float)
        if lam.shape != (self.order,):
            raise ValueError("one weight per lag required")
        if np.any(lam < -1e-12) or abs(lam.sum() - 1.0) > _SIMPLEX_TOL:
            raise ValueError("lag weights must lie on the simplex")


@dataclass(frozen=True)
class ObstaclePolynomial:
    """Cubic longitudinal track x_s(t) = a t^3 + b t^2 + c t + d (absolute time)."""

    a: float
    b: float
    c: float
    d: float
    y_s: float
    valid_until: float
    fallback: bool = False

    def __post_init__(self) -> None:
        for name in ("a", "b", "c", "d", "y_s", "valid_until"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def position(self, t):
        return ((self.a * t + self.b) * t + self.c) * t + self.d

    def velocity(self, t):
        return (3.0 * self.a * t + 2.0 * self.b) * t + self.c

    def acceleration(self, t):
        return 6.0 * self.a * t + 2.0 * self.b


def default_state_grid(history: ObservationHistory,
                       nominal_speed: float = 20.0) -> StateGrid:
    """Heuristic grid: bin width 0.25*dt_obs*nominal_speed, span covering the
    observed increments plus half their spread (at least one bin) each side,
    aligned so the mean increment sits at a bin center."""
    incs = history.increments()
    width = max(0.25 * history.dt_obs * nominal_speed, 1e-3)
    mean = float(incs.mean())
    lo = float(incs.min())
    hi = float(incs.max())
    pad = 0.5 * (hi - lo) + width
    lo -= pad
    hi += pad
    n_left = max(1, math.ceil((mean - lo) / width - 0.5))
    origin = mean - (n_left + 0.5) * width
    m_states = max(2, math.ceil((hi - origin) / width))
    return StateGrid(bin_width=width, origin=origin, m_states=m_states)


def discretize(history: ObservationHistory, grid: StateGrid) -> np.ndarray:
    """Map per-step displacement increments to bin indices in [0, m_states)."""
    incs = history.increments()
    idx = np.floor((incs - grid.origin) / grid.bin_width).astype(int)
    bad = (idx < 0) | (idx >= grid.m_states)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise GridRangeError(
            f"increment #{k} ({incs[k]:.6g} m) is outside the grid span "
            f"[{grid.origin:.6g}, {grid.origin + grid.m_states * grid.bin_width:.6g})"
        )
    return idx


def estimate_transition_matrices(seq: np.ndarray, grid: StateGrid, order: int,
                                 smoothing: float = 1.0) -> tuple[np.ndarray, ...]:
    """Count-based per-lag transition estimates with additive smoothing.

    For lag L the transition pairs are (seq[t], seq[t+L]); each row is
    (counts + smoothing) / (row total + smoothing*m). Rows never observed
    stay stochastic: uniform when smoothing is zero.
    """
    seq = np.asarray(seq, dtype=int)
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if len(seq) <= order:
        raise EstimationError(
            f"sequence of length {len(seq)} has no lag-{order} transitions"
        )
    if smoothing < 0.0:
        raise ValueError("smoothing must be nonnegative")
    m = grid.m_states
    matrices = []
    for lag in range(1, order + 1):
        counts = np.zeros((m, m))
        np.add.at(counts, (seq[:-lag], seq[lag:]), 1.0)
        totals = counts.sum(axis=1, keepdims=True)
        q = np.empty_like(counts)
        if smoothing > 0.0:
            q = (counts + smoothing) / (totals + smoothing * m)
        else:
            seen = totals[:, 0] > 0.0
            q[seen] = counts[seen] / totals[seen]
            q[~seen] = 1.0 / m
        q.setflags(write=False)
        matrices.append(q)
    return tuple(matrices)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = 1} (sort-based)."""
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > cumulative)[0][-1]
    theta = cumulative[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def fit_lag_weights(seq: np.ndarray, matrices, order: int) -> np.ndarray:
    """Mixture weights minimizing one-step-ahead negative log-likelihood.

    Projected gradient descent on the simplex from the uniform start, run to
    a projected-gradient norm of 1e-8 or 10^4 iterations. With identical
    per-lag matrices the objective is flat and the uniform start is returned
    unchanged, which is the documented tie-break.
    """
    if order == 0:
        raise ValueError("order must be >= 1")
    seq = np.asarray(seq, dtype=int)
    if order == 1:
        return np.array([1.0])
    if len(seq) <= order:
        raise EstimationError("sequence too short to score lag weights")

    # likelihood[t, i] = Q_i[seq[t-i], seq[t]] for each scored step t
    steps = np.arange(order, len(seq))
    likelihood = np.column_stack([
        matrices[i - 1][seq[steps - i], seq[steps]] for i in range(1, order + 1)
    ])

    def objective(lam: np.ndarray) -> float:
        p = likelihood @ lam
        return float(-np.mean(np.log(np.maximum(p, 1e-300))))

    def gradient(lam: np.ndarray) -> np.ndarray:
        p = np.maximum(likelihood @ lam, 1e-300)
        return -np.mean(likelihood / p[:, None], axis=0)

    lam = np.full(order, 1.0 / order)
    value = objective(lam)
    step = 1.0  # warm-started across iterations; plain restarts crawl near vertices
    for _ in range(_MAX_ITERS):
        grad = gradient(lam)
        if np.linalg.norm(lam - _project_simplex(lam - grad)) <= _GRAD_TOL:
            break
        step = min(1.0, 2.0 * step)
        moved = False
        while step > 1e-14:
            trial = _project_simplex(lam - step * grad)
            trial_value = objective(trial)
            if trial_value <= value - 1e-4 * float(grad @ (lam - trial)):
                lam, value, moved = trial, trial_value, True
                break
            step *= 0.5
        if not moved:
            break
    return lam


def predict_distribution(model: MarkovModel, recent, steps: int) -> np.ndarray:
    """Roll the mixture forward, feeding predictions back as history.

    `recent` holds the last `order` states, most recent last, either as bin
    indices (turned into one-hot rows) or as probability rows.
    """
    m = model.matrices[0].shape[0]
    recent = np.asarray(recent)
    if recent.ndim == 1 and np.issubdtype(recent.dtype, np.integer):
        window = [np.eye(m)[int(k)] for k in recent]
    elif recent.ndim == 2 and recent.shape[1] == m:
        window = [np.asarray(row, dtype=float) for row in recent]
        for row in window:
            if np.abs(row.sum() - 1.0) > _SIMPLEX_TOL or np.any(row < 0.0):
                raise ValueError("window rows must be probability distributions")
    else:
        raise ValueError("recent window must be indices or distribution rows")
    if len(window) != model.order:
        raise ValueError(
            f"window length {len(window)} does not match order {model.order}"
        )

    out = np.empty((steps, m))
    for k in range(steps):
        nxt = np.zeros(m)
        for i in range(1, model.order + 1):
            nxt += model.lag_weights[i - 1] * (window[-i] @ model.matrices[i - 1])
        out[k] = nxt
        window.append(nxt)
        window.pop(0)
    return out


def _constant_velocity_fallback(history: ObservationHistory,
                                horizon: float) -> ObstaclePolynomial:
    positions = np.asarray(history.positions, dtype=float)
    span = history.dt_obs * (len(positions) - 1)
    mean_velocity = float((positions[-1] - positions[0]) / span)
    return ObstaclePolynomial(
        a=0.0, b=0.0, c=mean_velocity,
        d=float(positions[-1]) - mean_velocity * history.t_end,
        y_s=history.y_lat,
        valid_until=history.t_end + horizon,
        fallback=True,
    )


def predict_trajectory(history: ObservationHistory, grid: StateGrid, order: int,
                       horizon: float, smoothing: float = 1.0) -> ObstaclePolynomial:
    """Full pipeline: discretize, estimate, weight, roll out, fit the cubic.

    Expected displacements are probability-weighted bin centers; predicted
    positions accumulate from the last observation, and the cubic is fitted
    over observed plus predicted points so it stays anchored to the data at
    the present time. Histories too short to estimate (fewer than order+2
    samples) degrade to a constant-velocity polynomial with the fallback
    flag set.
    """
    if horizon <= 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if len(history.positions) < order + 2:
        return _constant_velocity_fallback(history, horizon)

    seq = discretize(history, grid)
    matrices = estimate_transition_matrices(seq, grid, order, smoothing)
    lag_weights = fit_lag_weights(seq, matrices, order)
    model = MarkovModel(order=order, matrices=matrices, lag_weights=lag_weights)

    steps = int(math.ceil(horizon / history.dt_obs))
    distributions = predict_distribution(model, seq[-order:], steps)
    expected_steps = distributions @ grid.centers()

    positions = np.asarray(history.positions, dtype=float)
    predicted_pos = positions[-1] + np.cumsum(expected_steps)
    predicted_t = history.t_end + history.dt_obs * np.arange(1, steps + 1)

    t_all = np.concatenate([history.times(), predicted_t])
    x_all = np.concatenate([positions, predicted_pos])
    coeff_a, coeff_b, coeff_c, coeff_d = np.polyfit(t_all, x_all, 3)
    return ObstaclePolynomial(
        a=float(coeff_a), b=float(coeff_b), c=float(coeff_c), d=float(coeff_d),
        y_s=history.y_lat,
        valid_until=history.t_end + horizon,
        fallback=False,
    )

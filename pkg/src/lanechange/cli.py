"""Scenario harness: configs, synthetic histories, end-to-end runs, exports.

Scenario files are YAML (key/value with nested sections); three built-in
presets cover a two-lane overtaking setup where a rear vehicle in the
target lane approaches at constant speed, after braking, or while
accelerating. Runs are deterministic end to end: identical configs produce
byte-identical exports.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from lanechange.model import BoundaryConditions, EgoState, sample_cubic_pair
from lanechange.oracle import grid_search_time, solve_collocation
from lanechange.planner import (
    ConstraintSide,
    InfeasibleError,
    PiecewiseCubicPlan,
    PlanningProblem,
    SafetyEnvelope,
    hamiltonian_jump_residual,
    plan as solve_plan,
    solve_fixed_time,
)
from lanechange.predictor import (
    ObservationHistory,
    default_state_grid,
    predict_trajectory,
)

SAMPLING_DT = 0.05
_CONTACT_EPS = 1e-7
_DEFAULT_ENVELOPE = SafetyEnvelope(length=4.5, width=1.8, margin_x=10.0,
                                   margin_y=0.5)


class ConfigError(ValueError):
    """A scenario file or preset failed validation; names the field."""


@dataclass(frozen=True)
class VehicleConfig:
    x_s0: float
    v_s0: float
    behavior: str  # "constant" | "decelerating" | "accelerating"
    y_s: float
    rate: float = 2.0
    profile_window: float = 2.0
    envelope: SafetyEnvelope = _DEFAULT_ENVELOPE
    side: ConstraintSide = ConstraintSide.REAR_CROSS


@dataclass(frozen=True)
class PredictorSettings:
    dt_obs: float = 0.1
    order: int = 2
    history_duration: float = 3.0
    smoothing: float = 1.0
    horizon: float | None = None  # None: plan horizon t_f - t_0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    v_e: float
    s_x0: float
    s_y0: float
    s_xf: float
    s_yf: float
    t_0: float
    t_f: float
    vehicles: tuple[VehicleConfig, ...]
    predictor: PredictorSettings = field(default_factory=PredictorSettings)
    verify: bool = False


@dataclass(frozen=True)
class VehicleClearance:
    """Signed gaps of the ego against one vehicle's inflated safety region."""

    min_gap_x: float
    min_gap_y: float
    min_rect_gap: float
    violation_count: int
    violation_intervals: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class ClearanceReport:
    vehicles: tuple[VehicleClearance, ...]

    @property
    def total_violations(self) -> int:
        return sum(v.violation_count for v in self.vehicles)


@dataclass(frozen=True)
class SimulationResult:
    config: ScenarioConfig
    plan: PiecewiseCubicPlan
    times: np.ndarray
    ego: np.ndarray            # columns: s_x, v_x, u_x, s_y, v_y, u_y
    obstacle_true: np.ndarray  # per vehicle, on the shared grid
    obstacle_pred: np.ndarray
    polynomials: tuple
    binding_vehicle: int
    clearance: ClearanceReport | None = None
    oracle: dict | None = None


_PRESETS: dict[str, dict] = {
    "scenario1": {
        "name": "scenario1",
        "ego": {"v_e": 20.0, "s_x0": 0.0, "s_y0": -2.0, "s_xf": 85.0,
                "lane_width": 3.75, "t_0": 0.0, "t_f": 5.0},
        "vehicles": [{"x_s0": -15.0, "v_s0": 18.0, "behavior": "constant",
                      "y_s": 1.75}],
    },
    "scenario2": {
        "name": "scenario2",
        "ego": {"v_e": 20.0, "s_x0": 0.0, "s_y0": -2.0, "s_xf": 73.0,
                "lane_width": 3.75, "t_0": 0.0, "t_f": 5.0},
        "vehicles": [{"x_s0": -15.0, "v_s0": 20.0, "behavior": "decelerating",
                      "y_s": 1.75}],
    },
    "scenario3": {
        "name": "scenario3",
        "ego": {"v_e": 20.0, "s_x0": 0.0, "s_y0": -2.0, "s_xf": 90.0,
                "lane_width": 3.75, "t_0": 0.0, "t_f": 5.0},
        "vehicles": [{"x_s0": -15.0, "v_s0": 13.0, "behavior": "accelerating",
                      "y_s": 1.75}],
    },
}


def _need(mapping: dict, key: str, kind, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: missing required field")
    value = mapping[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}.{key}: expected a string, got {value!r}")
        return value
    return value


def _optional(mapping: dict, key: str, default, path: str):
    if key not in mapping or mapping[key] is None:
        return default
    value = mapping[key]
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}.{key}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{path}.{key}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float) or default is None:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
        return float(value)
    return value


def _parse_vehicle(raw: dict, path: str) -> VehicleConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping")
    behavior = _need(raw, "behavior", str, path)
    if behavior not in ("constant", "decelerating", "accelerating"):
        raise ConfigError(
            f"{path}.behavior: must be constant|decelerating|accelerating, "
            f"got {behavior!r}"
        )
    env_raw = raw.get("envelope")
    if env_raw is None:
        envelope = _DEFAULT_ENVELOPE
    else:
        envelope = SafetyEnvelope(
            length=_need(env_raw, "length", float, f"{path}.envelope"),
            width=_need(env_raw, "width", float, f"{path}.envelope"),
            margin_x=_need(env_raw, "margin_x", float, f"{path}.envelope"),
            margin_y=_need(env_raw, "margin_y", float, f"{path}.envelope"),
        )
    side_raw = raw.get("side", "rear_cross")
    try:
        side = ConstraintSide(side_raw)
    except ValueError as exc:
        raise ConfigError(
            f"{path}.side: must be rear_cross|front_cross, got {side_raw!r}"
        ) from exc
    return VehicleConfig(
        x_s0=_need(raw, "x_s0", float, path),
        v_s0=_need(raw, "v_s0", float, path),
        behavior=behavior,
        y_s=_need(raw, "y_s", float, path),
        rate=_optional(raw, "rate", 2.0, path),
        profile_window=_optional(raw, "profile_window", 2.0, path),
        envelope=envelope,
        side=side,
    )


def _parse_config(raw: dict, source: str) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    name = _optional(raw, "name", Path(source).stem, "")
    ego = raw.get("ego")
    if not isinstance(ego, dict):
        raise ConfigError("ego: missing section")
    s_y0 = _need(ego, "s_y0", float, "ego")
    has_width = "lane_width" in ego and ego["lane_width"] is not None
    has_syf = "s_yf" in ego and ego["s_yf"] is not None
    if has_width == has_syf:
        raise ConfigError("ego: exactly one of lane_width or s_yf is required")
    if has_width:
        s_yf = s_y0 + float(ego["lane_width"])
    else:
        s_yf = float(ego["s_yf"])
    vehicles_raw = raw.get("vehicles")
    if not isinstance(vehicles_raw, list) or not vehicles_raw:
        raise ConfigError("vehicles: at least one vehicle is required")
    vehicles = tuple(
        _parse_vehicle(v, f"vehicles[{k}]") for k, v in enumerate(vehicles_raw)
    )
    pred_raw = raw.get("predictor") or {}
    predictor = PredictorSettings(
        dt_obs=_optional(pred_raw, "dt_obs", 0.1, "predictor"),
        order=_optional(pred_raw, "order", 2, "predictor"),
        history_duration=_optional(pred_raw, "history_duration", 3.0, "predictor"),
        smoothing=_optional(pred_raw, "smoothing", 1.0, "predictor"),
        horizon=_optional(pred_raw, "horizon", None, "predictor"),
    )
    config = ScenarioConfig(
        name=str(name),
        v_e=_need(ego, "v_e", float, "ego"),
        s_x0=_need(ego, "s_x0", float, "ego"),
        s_y0=s_y0,
        s_xf=_need(ego, "s_xf", float, "ego"),
        s_yf=s_yf,
        t_0=_need(ego, "t_0", float, "ego"),
        t_f=_need(ego, "t_f", float, "ego"),
        vehicles=vehicles,
        predictor=predictor,
        verify=_optional(raw, "verify", False, ""),
    )
    if config.t_f <= config.t_0:
        raise ConfigError(f"ego.t_f: must exceed t_0, got {config.t_f}")
    if config.predictor.order < 1:
        raise ConfigError("predictor.order: must be >= 1")
    minimum = (config.predictor.order + 1) * config.predictor.dt_obs
    if config.predictor.history_duration < minimum:
        raise ConfigError(
            f"predictor.history_duration: needs at least {minimum} s for "
            f"order {config.predictor.order}"
        )
    return config


def load_scenario(source: str | Path) -> ScenarioConfig:
    """Load a preset by name (scenario1|2|3) or a YAML file by path."""
    key = str(source)
    if key in _PRESETS:
        return _parse_config(_PRESETS[key], key)
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"{source}: no such preset or file")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return _parse_config(raw, str(source))


def _pre_window_position(vehicle: VehicleConfig, offsets: np.ndarray) -> np.ndarray:
    """Vehicle position at t_0 + offset for offset <= 0, under its profile."""
    sign = {"constant": 0.0, "decelerating": -1.0, "accelerating": 1.0}[vehicle.behavior]
    accel = sign * vehicle.rate
    window = vehicle.profile_window
    pos = np.empty_like(offsets)
    inside = offsets >= -window
    d_in = offsets[inside]
    pos[inside] = vehicle.x_s0 + vehicle.v_s0 * d_in + 0.5 * accel * d_in ** 2
    if np.any(~inside):
        edge = -window
        x_edge = vehicle.x_s0 + vehicle.v_s0 * edge + 0.5 * accel * edge ** 2
        v_edge = vehicle.v_s0 + accel * edge
        pos[~inside] = x_edge + v_edge * (offsets[~inside] - edge)
    return pos


def synthesize_history(config: ScenarioConfig,
                       vehicle: VehicleConfig) -> ObservationHistory:
    """Generate the pre-maneuver track ending exactly at (x_s0, v_s0) at t_0."""
    settings = config.predictor
    duration = settings.history_duration
    num = int(round(duration / settings.dt_obs))
    offsets = settings.dt_obs * np.arange(-num, 1, dtype=float)

    sign = {"constant": 0.0, "decelerating": -1.0, "accelerating": 1.0}[vehicle.behavior]
    earliest = max(-duration, -vehicle.profile_window)
    v_earliest = vehicle.v_s0 + sign * vehicle.rate * earliest
    if v_earliest <= 0.0 or vehicle.v_s0 <= 0.0:
        raise ConfigError(
            f"vehicle profile reaches speed {v_earliest:.3g} m/s in the history "
            "window; inconsistent with its endpoint speed"
        )
    positions = _pre_window_position(vehicle, offsets)
    return ObservationHistory(
        dt_obs=settings.dt_obs,
        positions=tuple(float(p) for p in positions),
        y_lat=vehicle.y_s,
        t_end=config.t_0,
    )


def ground_truth_positions(vehicle: VehicleConfig, times: np.ndarray,
                           t_0: float) -> np.ndarray:
    """Obstacle motion during the maneuver: holds v_s0 from t_0 onward."""
    return vehicle.x_s0 + vehicle.v_s0 * (times - t_0)


def check_clearance(result: SimulationResult) -> ClearanceReport:
    """Flag samples strictly inside each vehicle's inflated safety region.

    Gaps are signed per axis (positive = clear); a sample violates only when
    both axes are negative beyond a small contact tolerance, so touching the
    region boundary (the interior equality does exactly that) is allowed.
    """
    times = result.times
    sx = result.ego[:, 0]
    sy = result.ego[:, 3]
    reports = []
    for idx, vehicle in enumerate(result.config.vehicles):
        env = vehicle.envelope
        gap_x = np.abs(sx - result.obstacle_true[idx]) - env.half_extent_x
        gap_y = np.abs(sy - vehicle.y_s) - env.half_extent_y
        rect_gap = np.maximum(gap_x, gap_y)
        violating = rect_gap < -_CONTACT_EPS
        intervals: list[tuple[float, float]] = []
        start = None
        for k, bad in enumerate(violating):
            if bad and start is None:
                start = times[k]
            elif not bad and start is not None:
                intervals.append((float(start), float(times[k - 1])))
                start = None
        if start is not None:
            intervals.append((float(start), float(times[-1])))
        reports.append(VehicleClearance(
            min_gap_x=float(gap_x.min()),
            min_gap_y=float(gap_y.min()),
            min_rect_gap=float(rect_gap.min()),
            violation_count=int(violating.sum()),
            violation_intervals=tuple(intervals),
        ))
    return ClearanceReport(vehicles=tuple(reports))


def run_scenario(config: ScenarioConfig, dt: float = SAMPLING_DT) -> SimulationResult:
    """Predict, plan, sample, and score one scenario deterministically."""
    boundary = BoundaryConditions(
        t_0=config.t_0, t_f=config.t_f,
        x_0=EgoState(config.s_x0, config.v_e, config.s_y0, 0.0),
        x_f=EgoState(config.s_xf, config.v_e, config.s_yf, 0.0),
    )
    horizon = config.predictor.horizon or (config.t_f - config.t_0)

    polynomials = []
    problems = []
    for vehicle in config.vehicles:
        history = synthesize_history(config, vehicle)
        grid = default_state_grid(history)
        poly = predict_trajectory(history, grid, config.predictor.order,
                                  horizon, smoothing=config.predictor.smoothing)
        polynomials.append(poly)
        problems.append(PlanningProblem(boundary, poly, vehicle.envelope,
                                        vehicle.side))

    plans = [solve_plan(p) for p in problems]
    constrained = [k for k, p in enumerate(plans) if p.constrained]
    binding = max(constrained, key=lambda k: plans[k].cost) if constrained else 0
    chosen = plans[binding]

    trajectory = sample_cubic_pair(chosen.x_segments, chosen.y_segments, dt)
    times = trajectory.times
    ego = np.array([
        [s.s_x, s.v_x, u.u_x, s.s_y, s.v_y, u.u_y]
        for _, s, u in trajectory.samples
    ])
    obstacle_true = np.vstack([
        ground_truth_positions(v, times, config.t_0) for v in config.vehicles
    ])
    obstacle_pred = np.vstack([poly.position(times) for poly in polynomials])

    oracle = None
    if config.verify:
        problem = problems[binding]
        if chosen.constrained:
            t_best, ref = grid_search_time(problem, N=500, t_grid=100)
            oracle = {
                "cost": ref.cost,
                "relative_cost_gap": abs(chosen.cost - ref.cost) / ref.cost,
                "t_i": t_best,
                "t_i_gap": abs(chosen.t_i - t_best),
                "N": 500,
                "t_grid": 100,
            }
        else:
            ref = solve_collocation(problem, N=500, t_i=None)
            gap = (abs(chosen.cost - ref.cost) / ref.cost if ref.cost > 0.0
                   else abs(chosen.cost - ref.cost))
            oracle = {
                "cost": ref.cost,
                "relative_cost_gap": gap,
                "t_i": None,
                "t_i_gap": None,
                "N": 500,
                "t_grid": None,
            }

    result = SimulationResult(
        config=config,
        plan=chosen,
        times=times,
        ego=ego,
        obstacle_true=obstacle_true,
        obstacle_pred=obstacle_pred,
        polynomials=tuple(polynomials),
        binding_vehicle=binding,
        oracle=oracle,
    )
    return dataclasses.replace(result, clearance=check_clearance(result))


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def export(result: SimulationResult, out_dir: str | Path) -> dict[str, Path]:
    """Write ego.csv, obstacle.csv and meta.json under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "ego": out / "ego.csv",
        "obstacle": out / "obstacle.csv",
        "meta": out / "meta.json",
    }

    lines = ["t,s_x,v_x,u_x,s_y,v_y,u_y"]
    for t, row in zip(result.times, result.ego):
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in row]))
    paths["ego"].write_text("\n".join(lines) + "\n")

    binding = result.binding_vehicle
    lines = ["t,x_s_true,x_s_pred,y_s"]
    y_s = result.config.vehicles[binding].y_s
    for t, xt, xp in zip(result.times, result.obstacle_true[binding],
                         result.obstacle_pred[binding]):
        lines.append(",".join([_fmt(t), _fmt(xt), _fmt(xp), _fmt(y_s)]))
    paths["obstacle"].write_text("\n".join(lines) + "\n")

    env = result.config.vehicles[binding].envelope
    clearance = result.clearance
    meta = {
        "scenario": result.config.name,
        "binding_vehicle": binding,
        "plan": {
            "t_i": result.plan.t_i,
            "phi_1": result.plan.phi_1,
            "phi_3": result.plan.phi_3,
            "cost": result.plan.cost,
            "constrained": result.plan.constrained,
        },
        "prediction": {
            "coefficients": [result.polynomials[binding].a,
                             result.polynomials[binding].b,
                             result.polynomials[binding].c,
                             result.polynomials[binding].d],
            "fallback": result.polynomials[binding].fallback,
            "valid_until": result.polynomials[binding].valid_until,
        },
        "envelope": {
            "length": env.length, "width": env.width,
            "margin_x": env.margin_x, "margin_y": env.margin_y,
        },
        "side": result.config.vehicles[binding].side.value,
        "clearance": {
            "total_violations": clearance.total_violations,
            "vehicles": [
                {
                    "min_gap_x": v.min_gap_x,
                    "min_gap_y": v.min_gap_y,
                    "min_rect_gap": v.min_rect_gap,
                    "violation_count": v.violation_count,
                    "violation_intervals": [list(iv) for iv in
                                            v.violation_intervals],
                }
                for v in clearance.vehicles
            ],
        },
        "oracle": result.oracle,
        "assumptions": {
            "obstacle_ground_truth":
                "surrounding vehicles hold their final observed speed after t_0",
            "prediction_horizon":
                result.config.predictor.horizon
                or (result.config.t_f - result.config.t_0),
        },
        "sampling_dt": float(np.diff(result.times).min()),
        "boundary": {
            "t_0": result.config.t_0, "t_f": result.config.t_f,
            "s_x0": result.config.s_x0, "s_xf": result.config.s_xf,
            "s_y0": result.config.s_y0, "s_yf": result.config.s_yf,
            "v_e": result.config.v_e,
        },
    }
    paths["meta"].write_text(
        json.dumps(meta, indent=2, sort_keys=True, allow_nan=False) + "\n"
    )
    return paths


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_scenario(args.scenario)
    if args.verify:
        config = dataclasses.replace(config, verify=True)
    result = run_scenario(config, dt=args.dt)
    out_dir = Path(args.out) if args.out else Path("out") / config.name
    paths = export(result, out_dir)
    report = result.clearance
    print(f"{config.name}: constrained={result.plan.constrained} "
          f"t_i={result.plan.t_i} cost={result.plan.cost:.6f} "
          f"violations={report.total_violations}")
    if result.oracle is not None:
        print(f"  oracle cost={result.oracle['cost']:.6f} "
              f"gap={result.oracle['relative_cost_gap']:.3e}")
    for name, path in paths.items():
        print(f"  {name}: {path}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = load_scenario(args.scenario)
    vehicle = config.vehicles[args.vehicle]
    history = synthesize_history(config, vehicle)
    grid = default_state_grid(history)
    horizon = config.predictor.horizon or (config.t_f - config.t_0)
    poly = predict_trajectory(history, grid, config.predictor.order, horizon,
                              smoothing=config.predictor.smoothing)
    boundary = BoundaryConditions(
        t_0=config.t_0, t_f=config.t_f,
        x_0=EgoState(config.s_x0, config.v_e, config.s_y0, 0.0),
        x_f=EgoState(config.s_xf, config.v_e, config.s_yf, 0.0),
    )
    problem = PlanningProblem(boundary, poly, vehicle.envelope, vehicle.side)

    out_dir = Path(args.out) if args.out else Path("out") / f"{config.name}-sweep"
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["t_i,residual,cost,ok"]
    for t in np.linspace(config.t_0 + 0.05, config.t_f - 0.05, args.points):
        try:
            candidate = solve_fixed_time(problem, float(t))
            residual = hamiltonian_jump_residual(candidate, poly)
            lines.append(f"{_fmt(t)},{_fmt(residual)},{_fmt(candidate.cost)},1")
        except Exception:  # noqa: BLE001 - diagnostic sweep keeps going
            lines.append(f"{_fmt(t)},nan,nan,0")
    path = out_dir / "sweep.csv"
    path.write_text("\n".join(lines) + "\n")
    print(f"{config.name}: residual sweep -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lanechange",
        description="Lane-change planning scenarios with obstacle prediction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and export artifacts")
    run.add_argument("scenario", help="preset name (scenario1|2|3) or YAML path")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--verify", action="store_true",
                     help="cross-check the plan against the transcription solver")
    run.add_argument("--dt", type=float, default=SAMPLING_DT,
                     help="trajectory sampling step (s)")
    run.add_argument("--seed", type=int, default=None,
                     help="accepted for interface stability; runs are "
                          "deterministic and ignore it")
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="dump the interior-time residual sweep")
    sweep.add_argument("scenario")
    sweep.add_argument("--out", default=None)
    sweep.add_argument("--vehicle", type=int, default=0)
    sweep.add_argument("--points", type=int, default=200)
    sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        if exc.sweep:
            worst = min(abs(r) for _, r in exc.sweep if math.isfinite(r))
            print(f"  best |residual| over sweep: {worst:.3e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

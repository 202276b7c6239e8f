import json

import numpy as np
import pytest

from lanechange.cli import (
    ConfigError,
    check_clearance,
    export,
    load_scenario,
    main,
    run_scenario,
    synthesize_history,
)


class TestLoadScenario:
    def test_preset_one_matches_table(self):
        config = load_scenario("scenario1")
        assert config.v_e == 20.0
        assert config.s_xf == 85.0
        assert config.t_f == 5.0
        assert config.vehicles[0].x_s0 == -15.0
        assert config.vehicles[0].v_s0 == 18.0
        assert config.vehicles[0].behavior == "constant"
        assert config.s_y0 == -2.0
        assert config.s_yf == pytest.approx(-2.0 + 3.75)

    def test_preset_two_decelerates_before_start(self):
        config = load_scenario("scenario2")
        assert config.s_xf == 73.0
        assert config.vehicles[0].v_s0 == 20.0
        assert config.vehicles[0].behavior == "decelerating"

    def test_preset_three_accelerates_before_start(self):
        config = load_scenario("scenario3")
        assert config.s_xf == 90.0
        assert config.vehicles[0].v_s0 == 13.0
        assert config.vehicles[0].behavior == "accelerating"

    def test_lane_width_and_syf_are_exclusive(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text(
            "ego: {v_e: 20, s_x0: 0, s_y0: -2, s_xf: 85, lane_width: 3.75,"
            " s_yf: 1.75, t_0: 0, t_f: 5}\n"
            "vehicles: [{x_s0: -15, v_s0: 18, behavior: constant, y_s: 1.75}]\n"
        )
        with pytest.raises(ConfigError, match="lane_width"):
            load_scenario(bad)

    def test_missing_field_is_named(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text(
            "ego: {v_e: 20, s_x0: 0, s_y0: -2, lane_width: 3.75, t_0: 0, t_f: 5}\n"
            "vehicles: [{x_s0: -15, v_s0: 18, behavior: constant, y_s: 1.75}]\n"
        )
        with pytest.raises(ConfigError, match="ego.s_xf"):
            load_scenario(bad)

    def test_unknown_source(self):
        with pytest.raises(ConfigError):
            load_scenario("scenario9")

    def test_yaml_file_round_trip(self, tmp_path):
        path = tmp_path / "custom.yaml"
        path.write_text(
            "name: custom\n"
            "ego:\n"
            "  v_e: 22.0\n  s_x0: 0.0\n  s_y0: -2.0\n  s_xf: 95.0\n"
            "  s_yf: 1.75\n  t_0: 0.0\n  t_f: 5.0\n"
            "vehicles:\n"
            "  - x_s0: -12.0\n    v_s0: 19.0\n    behavior: constant\n"
            "    y_s: 1.75\n"
            "    envelope: {length: 4.0, width: 1.8, margin_x: 8.0, margin_y: 0.4}\n"
            "predictor: {dt_obs: 0.1, order: 2, history_duration: 3.0}\n"
        )
        config = load_scenario(path)
        assert config.name == "custom"
        assert config.vehicles[0].envelope.margin_x == 8.0


class TestSynthesizeHistory:
    def test_constant_velocity_sample_count_and_anchor(self):
        config = load_scenario("scenario1")
        hist = synthesize_history(config, config.vehicles[0])
        assert len(hist.positions) == 31
        assert hist.positions[-1] == pytest.approx(-15.0)
        incs = np.diff(hist.positions)
        assert np.allclose(incs, incs[0])

    def test_decelerating_history_has_shrinking_increments(self):
        config = load_scenario("scenario2")
        hist = synthesize_history(config, config.vehicles[0])
        incs = np.diff(hist.positions)
        assert incs[-1] < incs[0]
        assert hist.positions[-1] == pytest.approx(-15.0)
        # speed at the anchor equals the configured endpoint speed
        end_speed = (hist.positions[-1] - hist.positions[-2]) / hist.dt_obs
        assert end_speed == pytest.approx(20.0, abs=0.15)

    def test_accelerating_history_has_growing_increments(self):
        config = load_scenario("scenario3")
        hist = synthesize_history(config, config.vehicles[0])
        incs = np.diff(hist.positions)
        assert incs[-1] > incs[0]

    def test_profile_reaching_zero_speed_is_a_config_error(self):
        import dataclasses
        config = load_scenario("scenario3")
        vehicle = dataclasses.replace(config.vehicles[0], v_s0=3.0, rate=2.0)
        with pytest.raises(ConfigError):
            synthesize_history(config, vehicle)


@pytest.fixture(scope="module")
def results():
    return {name: run_scenario(load_scenario(name))
            for name in ("scenario1", "scenario2", "scenario3")}


class TestRunScenario:
    def test_scenario1_is_constrained_and_hits_target(self, results):
        res = results["scenario1"]
        assert res.plan.constrained
        assert 0.0 < res.plan.t_i < 5.0
        poly = res.polynomials[0]
        env = res.config.vehicles[0].envelope
        x_c = poly.position(res.plan.t_i) + env.half_extent_x
        y_c = res.config.vehicles[0].y_s - env.half_extent_y
        assert res.plan.x_segments[0].position(res.plan.t_i) == \
            pytest.approx(x_c, abs=1e-8)
        assert res.plan.y_segments[0].position(res.plan.t_i) == \
            pytest.approx(y_c, abs=1e-8)

    def test_boundary_rows_exact(self, results):
        for res in results.values():
            first, last = res.ego[0], res.ego[-1]
            cfg = res.config
            assert first[[0, 1, 3, 4]] == pytest.approx(
                [cfg.s_x0, cfg.v_e, cfg.s_y0, 0.0], abs=1e-9)
            assert last[[0, 1, 3, 4]] == pytest.approx(
                [cfg.s_xf, cfg.v_e, cfg.s_yf, 0.0], abs=1e-9)

    def test_sample_grid_is_shared_and_uniform(self, results):
        res = results["scenario1"]
        assert len(res.times) == 101
        assert np.allclose(np.diff(res.times), 0.05)
        assert res.obstacle_true.shape == (1, 101)
        assert res.obstacle_pred.shape == (1, 101)

    def test_aggressive_and_conservative_ordering(self, results):
        def midpoint_crossing(res):
            y = res.ego[:, 3]
            mid = 0.5 * (res.config.s_y0 + res.config.s_yf)
            k = int(np.argmax(y >= mid))
            t = res.times
            return t[k - 1] + (mid - y[k - 1]) / (y[k] - y[k - 1]) * (
                t[k] - t[k - 1])

        t1 = midpoint_crossing(results["scenario1"])
        t2 = midpoint_crossing(results["scenario2"])
        t3 = midpoint_crossing(results["scenario3"])
        assert t2 < t1 < t3

    def test_scenario3_constraint_is_inactive(self, results):
        # the accelerating vehicle never catches the ego's free trajectory,
        # so the interior equality stays inactive and the lateral motion is
        # the symmetric minimum-effort lane change
        res = results["scenario3"]
        assert not res.plan.constrained
        assert res.clearance.total_violations == 0

    def test_clearance_reports_reentry_after_corner_touch(self, results):
        # scenarios 1-2 cut ahead of a faster-than-average obstacle and end
        # closer than the inflated half-length, so the re-entry is reported
        res = results["scenario1"]
        report = res.clearance.vehicles[0]
        assert report.violation_count > 0
        assert report.violation_intervals[0][0] > res.plan.t_i


class TestCheckClearance:
    def test_in_lane_ego_is_clear(self):
        res = run_scenario(load_scenario("scenario3"))
        report = check_clearance(res)
        assert report.total_violations == 0
        assert report.vehicles[0].min_rect_gap > 0.0

    def test_ego_at_obstacle_center_is_flagged(self):
        import dataclasses
        res = run_scenario(load_scenario("scenario3"))
        centered = dataclasses.replace(
            res, obstacle_true=np.vstack([res.ego[:, 0]]))
        hacked = dataclasses.replace(
            res.config,
            vehicles=(dataclasses.replace(res.config.vehicles[0], y_s=0.0),))
        centered = dataclasses.replace(centered, config=hacked)
        report = check_clearance(centered)
        assert report.total_violations > 0


class TestExport:
    def test_files_and_row_counts(self, tmp_path):
        res = run_scenario(load_scenario("scenario1"))
        paths = export(res, tmp_path / "s1")
        ego_lines = paths["ego"].read_text().splitlines()
        assert ego_lines[0] == "t,s_x,v_x,u_x,s_y,v_y,u_y"
        assert len(ego_lines) == 102  # header + 101 samples
        obstacle_lines = paths["obstacle"].read_text().splitlines()
        assert obstacle_lines[0] == "t,x_s_true,x_s_pred,y_s"
        assert len(obstacle_lines) == 102
        meta = json.loads(paths["meta"].read_text())
        assert 0.0 < meta["plan"]["t_i"] < 5.0
        assert meta["plan"]["constrained"] is True

    def test_rerun_is_byte_identical(self, tmp_path):
        res_a = run_scenario(load_scenario("scenario2"))
        res_b = run_scenario(load_scenario("scenario2"))
        paths_a = export(res_a, tmp_path / "a")
        paths_b = export(res_b, tmp_path / "b")
        for key in paths_a:
            assert paths_a[key].read_bytes() == paths_b[key].read_bytes()


class TestMainEntry:
    def test_run_subcommand(self, tmp_path, capsys):
        code = main(["run", "scenario1", "--out", str(tmp_path / "out")])
        assert code == 0
        captured = capsys.readouterr()
        assert "scenario1" in captured.out
        assert (tmp_path / "out" / "meta.json").exists()

    def test_config_error_exit_code(self, tmp_path, capsys):
        code = main(["run", str(tmp_path / "missing.yaml")])
        assert code == 1
        assert "config error" in capsys.readouterr().err

    def test_sweep_subcommand(self, tmp_path):
        code = main(["sweep", "scenario1", "--out", str(tmp_path / "sw"),
                     "--points", "60"])
        assert code == 0
        lines = (tmp_path / "sw" / "sweep.csv").read_text().splitlines()
        assert lines[0] == "t_i,residual,cost,ok"
        assert len(lines) == 61

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lanechange.model import (
    AxisCubic,
    BoundaryConditions,
    ControlInput,
    EgoState,
    Trajectory,
    integrate_dynamics,
    sample_cubic_pair,
)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False,
                   allow_infinity=False)
small = st.floats(min_value=-100.0, max_value=100.0, allow_nan=False,
                  allow_infinity=False)


class TestTypes:
    def test_state_rejects_nan(self):
        with pytest.raises(ValueError):
            EgoState(math.nan, 0.0, 0.0, 0.0)

    def test_input_rejects_inf(self):
        with pytest.raises(ValueError):
            ControlInput(math.inf, 0.0)

    def test_boundary_requires_forward_time(self):
        x = EgoState(0, 0, 0, 0)
        with pytest.raises(ValueError):
            BoundaryConditions(1.0, 1.0, x, x)

    def test_boundary_requires_zero_lateral_velocity(self):
        with pytest.raises(ValueError):
            BoundaryConditions(0.0, 1.0, EgoState(0, 0, 0, 0.5),
                               EgoState(0, 0, 0, 0))

    def test_cubic_rejects_empty_interval(self):
        with pytest.raises(ValueError):
            AxisCubic(0, 0, 0, 0, t_a=1.0, t_b=1.0)

    def test_trajectory_requires_increasing_times(self):
        s = EgoState(0, 0, 0, 0)
        u = ControlInput(0, 0)
        with pytest.raises(ValueError):
            Trajectory(samples=((0.0, s, u), (0.0, s, u)))


class TestIntegrateDynamics:
    def test_zero_input_drift(self):
        out = integrate_dynamics(EgoState(0, 20, 0, 0), ControlInput(0, 0), 1.0)
        assert out == EgoState(20, 20, 0, 0)

    def test_half_u_dt_squared(self):
        out = integrate_dynamics(EgoState(0, 0, 0, 0), ControlInput(2, 0), 1.0)
        assert out == EgoState(1, 2, 0, 0)

    def test_per_axis_superposition(self):
        out = integrate_dynamics(EgoState(0, 20, -2, 0), ControlInput(0, 1.5), 2.0)
        assert out == EgoState(40, 20, 1, 3)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            integrate_dynamics(EgoState(0, 0, 0, 0), ControlInput(0, 0), 0.0)

    @given(s=small, v=small, u=small, dt=st.floats(0.01, 2.0), n=st.integers(1, 8))
    @settings(max_examples=100)
    def test_composition_equals_single_step(self, s, v, u, dt, n):
        # exact discretization: n steps of dt match one step of n*dt
        state = EgoState(s, v, 0.0, 0.0)
        inp = ControlInput(u, 0.0)
        stepped = state
        for _ in range(n):
            stepped = integrate_dynamics(stepped, inp, dt)
        direct = integrate_dynamics(state, inp, n * dt)
        assert stepped.s_x == pytest.approx(direct.s_x, abs=1e-8)
        assert stepped.v_x == pytest.approx(direct.v_x, abs=1e-10)


class TestAxisCubicCalculus:
    @given(c0=small, c1=small, c2=small, c3=small, data=st.data())
    @settings(max_examples=100)
    def test_derivatives_match_polynomial_calculus(self, c0, c1, c2, c3, data):
        seg = AxisCubic(c0, c1, c2, c3, t_a=0.0, t_b=2.0)
        t = data.draw(st.floats(0.0, 2.0, allow_nan=False))
        pos = c0 + c1 * t + c2 * t ** 2 + c3 * t ** 3
        vel = c1 + 2 * c2 * t + 3 * c3 * t ** 2
        acc = 2 * c2 + 6 * c3 * t
        assert seg.position(t) == pytest.approx(pos, rel=1e-12, abs=1e-12)
        assert seg.velocity(t) == pytest.approx(vel, rel=1e-12, abs=1e-12)
        assert seg.acceleration(t) == pytest.approx(acc, rel=1e-12, abs=1e-12)
        assert seg.jerk() == pytest.approx(6 * c3, rel=1e-12, abs=1e-12)


class TestSampleCubicPair:
    def test_single_segment_direct_evaluation(self):
        cubic = AxisCubic(0, 0, 0, 1, t_a=0.0, t_b=1.0)  # s(t) = t^3
        flat = AxisCubic(0, 0, 0, 0, t_a=0.0, t_b=1.0)
        traj = sample_cubic_pair([cubic], [flat], dt=0.5)
        times = [t for t, _, _ in traj.samples]
        pos = [s.s_x for _, s, _ in traj.samples]
        acc = [u.u_x for _, _, u in traj.samples]
        assert times == [0.0, 0.5, 1.0]
        assert pos == pytest.approx([0.0, 0.125, 1.0])
        assert acc == pytest.approx([0.0, 3.0, 6.0])

    def test_no_duplicate_sample_at_interior_boundary(self):
        left = AxisCubic(0, 1, 0, 0, t_a=0.0, t_b=1.0)
        right = AxisCubic(0, 1, 0, 0, t_a=1.0, t_b=2.0)
        flat = AxisCubic(0, 0, 0, 0, t_a=0.0, t_b=2.0)
        traj = sample_cubic_pair([left, right], [flat], dt=0.5)
        times = [t for t, _, _ in traj.samples]
        assert times == [0.0, 0.5, 1.0, 1.5, 2.0]

    def test_left_segment_wins_at_boundary(self):
        # same position/velocity at the junction, different acceleration
        left = AxisCubic(0, 0, 1, 0, t_a=0.0, t_b=1.0)    # acc 2
        right = AxisCubic(1, 2, 0, 0, t_a=1.0, t_b=2.0)   # hmm mismatched on purpose
        flat = AxisCubic(0, 0, 0, 0, t_a=0.0, t_b=2.0)
        traj = sample_cubic_pair([left, right], [flat], dt=1.0)
        _, _, u_mid = traj.samples[1]
        assert u_mid.u_x == pytest.approx(left.acceleration(1.0))

    def test_gap_raises_structural_error(self):
        a = AxisCubic(0, 0, 0, 0, t_a=0.0, t_b=1.0)
        b = AxisCubic(0, 0, 0, 0, t_a=1.5, t_b=2.0)
        with pytest.raises(ValueError, match="gap"):
            sample_cubic_pair([a, b], [AxisCubic(0, 0, 0, 0, t_a=0.0, t_b=2.0)],
                              dt=0.5)

    def test_final_sample_lands_on_tf_for_ragged_span(self):
        seg = AxisCubic(0, 1, 0, 0, t_a=0.0, t_b=1.0)
        traj = sample_cubic_pair([seg], [AxisCubic(0, 0, 0, 0, 0.0, 1.0)], dt=0.3)
        times = np.array([t for t, _, _ in traj.samples])
        assert times[-1] == 1.0
        assert np.all(np.diff(times) > 0)

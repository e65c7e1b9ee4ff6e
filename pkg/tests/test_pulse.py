from __future__ import annotations

import math

import numpy as np
import pytest

from pulse_maslov.exceptions import DomainError, InvalidParameters
from pulse_maslov.model import vector_field
from pulse_maslov.pulse import PulseProfile, evaluate_profile, skeleton_distance, solve_pulse
from pulse_maslov.singular_orbit import build_singular_orbit, plateau_constants, solve_jump_condition

SQ2 = math.sqrt(2.0)


@pytest.fixture(params=["stable_profile", "unstable_profile", "root2_profile"])
def profile(request):
    return request.getfixturevalue(request.param)


class TestInvariants:
    def test_collocation_residual(self, profile):
        assert profile.collocation_residual() < 1e-10

    def test_reversibility(self, profile):
        assert profile.symmetry_error() < 1e-8
        P = profile.values[:, 1]
        assert np.abs(P + P[::-1]).max() < 1e-8

    def test_endpoints_at_rest(self, profile):
        assert profile.endpoint_error() < 1e-6

    def test_grid_symmetric_and_increasing(self, profile):
        g = profile.grid
        assert np.all(np.diff(g) > 0)
        assert np.allclose(g, -g[::-1], atol=1e-12)
        assert g[profile.midpoint] == pytest.approx(0.0, abs=1e-12)

    def test_front_resolution(self, profile):
        # at least 12 nodes per fast unit around each crossing
        for c in profile.u_crossings():
            near = np.abs(profile.grid - c) < 2.0
            assert near.sum() >= 48

    def test_odd_components_vanish_at_midpoint(self, profile):
        mid = profile.values[profile.midpoint]
        assert np.abs(mid[[1, 3, 5]]).max() < 1e-12


class TestStableShape:
    def test_max_u(self, stable_profile):
        assert 0.9 < stable_profile.values[:, 0].max() < 1.1

    def test_plateau_v_near_singular_value(self, stable_profile, stable_params):
        c1, c3 = plateau_constants(stable_profile.jump.x_star, stable_params.D)
        mid = stable_profile.values[stable_profile.midpoint]
        orbit = build_singular_orbit(stable_params, stable_profile.jump)
        assert orbit.evaluate(0.0)[2] == pytest.approx(2 * c1 + 1, abs=1e-12)
        # O(eps) with a modest constant
        assert abs(mid[2] - (2 * c1 + 1)) < 10 * stable_params.epsilon
        assert abs(mid[4] - (2 * c3 + 1)) < 10 * stable_params.epsilon

    def test_back_midpoint_slope(self, stable_profile, stable_params):
        xi = stable_profile.back_midpoint
        P = evaluate_profile(stable_profile, xi).P
        assert abs(P + 1 / SQ2) < 10 * stable_params.epsilon

    def test_front_midpoint_slope(self, stable_profile, stable_params):
        P = evaluate_profile(stable_profile, stable_profile.front_midpoint).P
        assert abs(P - 1 / SQ2) < 10 * stable_params.epsilon

    def test_crossings_symmetric(self, stable_profile, stable_params):
        a, b = stable_profile.u_crossings()
        assert a == pytest.approx(-b, abs=1e-8)
        # the fronts sit O(1) fast units from +-x*/eps
        assert abs(b - stable_profile.jump.x_star / stable_params.epsilon) < 5.0


class TestEvaluate:
    def test_node_exact(self, stable_profile):
        idx = [0, 17, stable_profile.midpoint, stable_profile.N - 1]
        for i in idx:
            assert np.array_equal(evaluate_profile(stable_profile, stable_profile.grid[i]).as_array(),
                                  stable_profile.values[i])

    def test_derivative_consistency(self, profile):
        rng = np.random.default_rng(0)
        xi = rng.uniform(-profile.L, profile.L, 50)
        # include points inside the fronts, where the derivative is largest
        xi = np.concatenate([xi, (np.array(profile.u_crossings()) + rng.uniform(-3, 3, (10, 2))).ravel()])
        y = evaluate_profile(profile, xi)
        dy = evaluate_profile(profile, xi, order="derivative")
        assert np.abs(dy - vector_field(y, profile.params)).max() < 1e-6

    def test_outside_domain(self, stable_profile):
        with pytest.raises(DomainError):
            evaluate_profile(stable_profile, stable_profile.L + 1.0)

    def test_crossings_are_zeros(self, profile):
        for c in profile.u_crossings():
            assert abs(evaluate_profile(profile, c).U) < 1e-10

    def test_slow_evaluation_outside_is_rest(self, stable_profile):
        out = stable_profile.evaluate_slow(np.array([1e6]))
        assert np.array_equal(out[0], stable_profile.rest.as_array())


class TestSolve:
    def test_short_interval_rejected(self, stable_params):
        jump = solve_jump_condition(stable_params)[0]
        with pytest.raises(InvalidParameters):
            solve_pulse(stable_params, jump, L=2 * jump.x_star / stable_params.epsilon)

    def test_continuity_in_alpha(self, stable_profile, stable_params):
        d = 1e-4
        p = stable_params.replace(alpha=stable_params.alpha + d)
        other = solve_pulse(p, solve_jump_condition(p)[0], L=stable_profile.L)
        # the free back moves the outer nodes slightly, so compare on the common range
        inner = np.abs(stable_profile.grid) < min(other.L, stable_profile.L)
        diff = np.abs(other(stable_profile.grid[inner]) - stable_profile.values[inner]).max()
        assert diff < 100 * d

    def test_longer_interval_same_profile(self, stable_profile, stable_params):
        other = solve_pulse(stable_params, stable_profile.jump, L=stable_profile.L + 20)
        inner = np.abs(stable_profile.grid) < stable_profile.L - 20
        diff = np.abs(other(stable_profile.grid[inner]) - stable_profile.values[inner]).max()
        assert diff < 1e-6


class TestSerialization:
    def test_json_round_trip(self, stable_profile):
        back = PulseProfile.from_json(stable_profile.to_json())
        assert np.array_equal(back.grid, stable_profile.grid)
        assert np.array_equal(back.values, stable_profile.values)
        assert back.params == stable_profile.params
        assert back.midpoint == stable_profile.midpoint

    def test_csv(self, stable_profile):
        text = stable_profile.to_csv()
        lines = text.split("\r\n")
        assert lines[0] == "xi,U,P,V,Q,W,R"
        assert lines[-1] == ""
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:-1]])
        assert np.array_equal(data[:, 0], stable_profile.grid)
        assert np.array_equal(data[:, 1:], stable_profile.values)


@pytest.mark.slow
class TestConvergence:
    @pytest.mark.parametrize("root", [0, 1])
    def test_skeleton_distance_order_one(self, stable_params, unstable_params, root):
        base = stable_params if root == 0 else unstable_params
        jump = solve_jump_condition(base)[root]
        d = [skeleton_distance(solve_pulse(base.replace(epsilon=e), jump)) for e in (0.02, 0.01)]
        assert 1.4 <= d[0] / d[1] <= 2.6

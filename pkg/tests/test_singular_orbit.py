from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import X_STAR_STABLE, X_STAR_UNSTABLE_1, X_STAR_UNSTABLE_2
from scipy.integrate import solve_ivp

from pulse_maslov.exceptions import DomainError, InvalidParameters
from pulse_maslov.model import ModelParams
from pulse_maslov.singular_orbit import (
    JumpSolution,
    build_singular_orbit,
    fast_hamiltonian,
    fast_heteroclinic,
    heteroclinic_profile,
    jump_function,
    slow_arc,
    solve_jump_condition,
)

SQ2 = math.sqrt(2.0)


def _bisect(f, lo, hi, tol=1e-15):
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestJumpCondition:
    def test_no_root(self):
        assert solve_jump_condition(ModelParams(0.01, 1, 1, 3, 5)) == []

    def test_stable_root(self, stable_params):
        roots = solve_jump_condition(stable_params)
        assert len(roots) == 1
        f = lambda x: float(jump_function(x, stable_params))  # noqa: E731
        oracle = _bisect(f, 0.0, 10.0)
        assert roots[0].x_star == pytest.approx(oracle, abs=1e-12)
        assert roots[0].x_star == pytest.approx(X_STAR_STABLE, abs=1e-12)
        assert abs(f(roots[0].x_star)) < 1e-12
        assert roots[0].root_index == 1

    def test_two_roots(self, unstable_params):
        roots = solve_jump_condition(unstable_params)
        assert [r.root_index for r in roots] == [1, 2]
        f = lambda x: float(jump_function(x, unstable_params))  # noqa: E731
        assert f(0) == pytest.approx(-0.5) and f(1) > 2 and f(10) < 0
        assert roots[0].x_star == pytest.approx(_bisect(f, 0.0, 1.0), abs=1e-12)
        assert roots[1].x_star == pytest.approx(_bisect(f, 1.0, 10.0), abs=1e-12)
        assert roots[0].x_star == pytest.approx(X_STAR_UNSTABLE_1, abs=1e-12)
        assert roots[1].x_star == pytest.approx(X_STAR_UNSTABLE_2, abs=1e-12)
        assert roots[1].x_star == pytest.approx(5.755, abs=2e-3)

    @pytest.mark.parametrize("abgd", [(2, 1, 1, 5), (-5, 5, 0.5, 5), (3, -1, 0.4, 3), (-1, 4, 2.5, 7),
                                      (-5.36, 4.28, 1.34, 6.55), (1, 1, 3, 5), (-2, 1, 0.1, 2)])
    def test_root_count_brute_force(self, abgd):
        a, b, g, D = abgd
        p = ModelParams(0.01, a, b, g, D)
        x = np.linspace(0, 20, 100001)[1:]
        f = jump_function(x, p)
        assert len(solve_jump_condition(p)) == int(np.sum(np.sign(f[:-1]) != np.sign(f[1:])))

    def test_jump_off_identity(self, stable_params, unstable_params):
        for p in (stable_params, unstable_params):
            for r in solve_jump_condition(p):
                c1, c3 = -math.exp(-r.x_star), -math.exp(-r.x_star / p.D)
                assert abs(p.alpha * c1**2 + p.beta * c3**2 - p.gamma) < 1e-12

    def test_invalid_jump(self):
        with pytest.raises(InvalidParameters):
            JumpSolution(-1.0)


class TestFast:
    def test_midpoint_and_ends(self):
        assert fast_heteroclinic(0.0) == pytest.approx(1 / SQ2)
        assert fast_heteroclinic(0.0, "back") == pytest.approx(-1 / SQ2)
        for U in (-1.0, 1.0):
            assert fast_heteroclinic(U) == 0.0

    def test_outside(self):
        with pytest.raises(DomainError):
            fast_heteroclinic(1.5)
        with pytest.raises(ValueError):
            fast_heteroclinic(0.0, "side")

    def test_tanh_matches_integration(self):
        sol = solve_ivp(lambda t, y: [y[1], -y[0] + y[0] ** 3], (0, 6), [0.0, 1 / SQ2], rtol=1e-12, atol=1e-13,
                        dense_output=True, method="DOP853")
        xi = np.linspace(0, 6, 25)
        U, P = heteroclinic_profile(xi)
        assert np.abs(sol.sol(xi)[0] - U).max() < 1e-8
        assert np.abs(sol.sol(xi)[1] - P).max() < 1e-8


class TestSlowArcs:
    def test_plateau_start_is_z1(self, stable_params):
        xs, D = X_STAR_STABLE, stable_params.D
        pt = slow_arc("slow-plateau", xs, -xs, D)
        z1 = build_singular_orbit(stable_params, solve_jump_condition(stable_params)[0]).z1
        assert np.allclose(pt.as_array()[2:], z1.as_array()[2:], atol=1e-14)

    def test_plateau_midpoint(self):
        pt = slow_arc("slow-plateau", 0.9, 0.0, 5.0)
        assert pt.Q == 0.0 and pt.R == 0.0

    def test_plateau_end_negates_derivatives(self):
        xs, D = 1.3, 4.0
        a, b = slow_arc("slow-plateau", xs, -xs, D), slow_arc("slow-plateau", xs, xs, D)
        assert (a.V, a.W) == pytest.approx((b.V, b.W), abs=1e-14)
        assert (a.Q, a.R) == pytest.approx((-b.Q, -b.R), abs=1e-14)

    def test_domains(self):
        with pytest.raises(DomainError):
            slow_arc("slow-plateau", 1.0, 1.5, 5.0)
        with pytest.raises(ValueError):
            slow_arc("slow-middle", 1.0, 0.0, 5.0)

    def test_outer_arcs_decay_to_rest(self):
        far = slow_arc("slow-unstable", 1.0, -60.0, 5.0)
        assert far.as_array() == pytest.approx([-1, 0, -1, 0, -1, 0], abs=1e-5)


class TestOrbit:
    def test_z1_values(self, stable_params):
        orbit = build_singular_orbit(stable_params, solve_jump_condition(stable_params)[0])
        xs = X_STAR_STABLE
        expected = [-1, 0, -math.exp(-2 * xs), 1 - math.exp(-2 * xs), -math.exp(-2 * xs / 5),
                    1 - math.exp(-2 * xs / 5)]
        assert np.allclose(orbit.z1.as_array(), expected, atol=1e-14)
        assert np.allclose(orbit.z1.as_array(), [-1, 0, -0.156, 0.844, -0.689, 0.311], atol=1e-3)

    def test_corners(self, unstable_params):
        for jump in solve_jump_condition(unstable_params):
            o = build_singular_orbit(unstable_params, jump)
            p = unstable_params
            assert abs(p.alpha * o.z1.V + p.beta * o.z1.W + p.gamma) < 1e-12
            assert o.z1.Q == pytest.approx(o.z1.V + 1) and o.z1.R == pytest.approx(o.z1.W + 1)
            assert np.array_equal(o.z2.as_array()[2:], o.z1.as_array()[2:])
            assert (o.z3.V, o.z3.W) == (o.z2.V, o.z2.W)
            assert (o.z3.Q, o.z3.R) == (-o.z2.Q, -o.z2.R)

    def test_hamiltonian_on_fast_segments(self, stable_params):
        o = build_singular_orbit(stable_params, solve_jump_condition(stable_params)[0])
        xi = np.linspace(-8, 8, 20)
        for kind in ("fast-front", "fast-back"):
            y = o.segment(kind).evaluate(xi)
            assert np.abs(fast_hamiltonian(y[:, 0], y[:, 1]) - 0.25).max() < 1e-12

    def test_reversibility(self, stable_params):
        o = build_singular_orbit(stable_params, solve_jump_condition(stable_params)[0])
        x = np.linspace(0.01, 30, 300)
        a, b = o.evaluate(x), o.evaluate(-x)
        assert np.allclose(a[:, [0, 2, 4]], b[:, [0, 2, 4]], atol=1e-12)
        assert np.allclose(a[:, [1, 3, 5]], -b[:, [1, 3, 5]], atol=1e-12)

    def test_rejects_wrong_root(self, stable_params):
        with pytest.raises(InvalidParameters):
            build_singular_orbit(stable_params, JumpSolution(0.5))

    def test_json(self, stable_params):
        import json

        d = json.loads(build_singular_orbit(stable_params, solve_jump_condition(stable_params)[0]).to_json())
        assert [s["kind"] for s in d["segments"]] == ["slow-unstable", "fast-front", "slow-plateau", "fast-back",
                                                      "slow-stable"]
        assert d["segments"][0]["domain"][0] == "-inf"

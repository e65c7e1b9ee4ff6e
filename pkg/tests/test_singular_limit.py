from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import MARGIN_STABLE, MARGIN_UNSTABLE_1, MARGIN_UNSTABLE_2

from pulse_maslov.exceptions import InvalidParameters, MarginalCase
from pulse_maslov.model import ModelParams
from pulse_maslov.singular_limit import (
    corner_flow,
    corner_flow_from_deltas,
    criterion_margin,
    cutoff_determinant,
    front_determinant,
    singular_limit_report,
    slow_manifold_closed_form,
    slow_manifold_determinant,
    stability_criterion,
)
from pulse_maslov.singular_orbit import JumpSolution, solve_jump_condition

SQ2 = math.sqrt(2.0)


def _roots(p):
    return solve_jump_condition(p)


class TestCriterion:
    def test_stable_case(self, stable_params):
        (j,) = _roots(stable_params)
        v = stability_criterion(stable_params, j)
        assert v.verdict == "stable" and v.stable
        assert v.margin == pytest.approx(MARGIN_STABLE, abs=1e-12)

    def test_unstable_case_both_roots(self, unstable_params):
        r1, r2 = _roots(unstable_params)
        assert stability_criterion(unstable_params, r1).verdict == "unstable"
        assert criterion_margin(unstable_params, r1) == pytest.approx(MARGIN_UNSTABLE_1, abs=1e-12)
        assert stability_criterion(unstable_params, r2).verdict == "stable"
        assert criterion_margin(unstable_params, r2) == pytest.approx(MARGIN_UNSTABLE_2, abs=1e-12)

    def test_direct_substitution(self, stable_params):
        (j,) = _roots(stable_params)
        x = j.x_star
        expected = 2 * -math.exp(-2 * x) + 1 / 5 * -math.exp(-2 * x / 5)
        assert criterion_margin(stable_params, j) == pytest.approx(expected, rel=1e-14)

    def test_marginal_band(self):
        p = ModelParams(0.01, 1.0, -1.0, 0.1, 5.0)
        j = JumpSolution(0.5, 1)
        assert stability_criterion(p, j, tol=10.0).verdict == "marginal"

    def test_positive_coefficients_always_stable(self):
        rng = np.random.default_rng(3)
        seen = 0
        for _ in range(300):
            a, b = rng.uniform(0.05, 6, 2)
            p = ModelParams(0.01, a, b, rng.uniform(-3, 3), rng.uniform(1.5, 8))
            for j in _roots(p):
                seen += 1
                assert stability_criterion(p, j).verdict == "stable"
        assert seen > 20


class TestPlateau:
    @pytest.mark.parametrize("case", ["stable", "unstable"])
    def test_closed_form(self, case, stable_params, unstable_params):
        p = stable_params if case == "stable" else unstable_params
        j = _roots(p)[0]
        x = np.linspace(-j.x_star, j.x_star, 41)
        num = slow_manifold_determinant(p, j, x)
        closed = slow_manifold_closed_form(p, j, x)
        assert np.allclose(num, closed, rtol=1e-10, atol=1e-14)

    @pytest.mark.parametrize("case", ["stable", "unstable", "root2"])
    def test_nonvanishing_bound(self, case, stable_params, unstable_params):
        p, j = {
            "stable": (stable_params, _roots(stable_params)[0]),
            "unstable": (unstable_params, _roots(unstable_params)[0]),
            "root2": (unstable_params, _roots(unstable_params)[1]),
        }[case]
        x = np.linspace(-j.x_star, j.x_star, 101)
        c3 = -math.exp(-j.x_star / p.D)
        margin = abs(criterion_margin(p, j)) / abs(p.beta * c3)
        det = np.abs(slow_manifold_determinant(p, j, x))
        bound = margin * np.exp(x * (1 + 1 / p.D))
        assert np.all(det >= 0.5 * bound)
        assert np.all(det <= 2.0 * bound)

    def test_report_plateau_sign(self, unstable_params):
        for j in _roots(unstable_params):
            r = singular_limit_report(unstable_params, j)
            assert r.plateau_crossings == 0
            assert r.plateau_sign == r.plateau_expected_sign


class TestFastPieces:
    def test_front_determinant_vanishes_only_at_zero(self):
        U = np.linspace(-0.999, 0.999, 201)
        d = front_determinant(U)
        assert np.allclose(d, -4 * SQ2 * U, atol=1e-12)
        assert abs(front_determinant(0.0)[0]) < 1e-14

    def test_cutoff_determinant(self):
        assert cutoff_determinant(0.0)[0] == pytest.approx(4 * SQ2, rel=1e-14)
        U = np.linspace(-1, 0.999, 101)
        d = cutoff_determinant(U)
        assert np.allclose(d, 4 * SQ2 * (1 - U), rtol=1e-12)
        assert np.all(d > 0)


class TestCorner:
    @pytest.mark.parametrize("case", ["stable", "root2"])
    def test_closed_form_100_points(self, case, stable_params, unstable_params):
        p, j = (stable_params, _roots(stable_params)[0]) if case == "stable" \
            else (unstable_params, _roots(unstable_params)[1])
        cf = corner_flow(p, j)
        x = np.linspace(-8.0, 0.0, 100)
        num, closed = cf.determinant(x), cf.closed_form(x)
        err = np.abs(num - closed) / np.maximum(1.0, np.abs(closed))
        assert err.max() < 1e-10

    def test_root_for_delta6_two(self, stable_params):
        cf = corner_flow_from_deltas(stable_params.replace(epsilon=0.0), 1.0, 0.2, 2.0)
        assert cf.root == pytest.approx(-0.24506453586713678, abs=1e-14)
        assert cf.root == pytest.approx(-math.log(2) / (2 * SQ2), abs=1e-15)
        assert abs(cf.closed_form(cf.root)) < 1e-14
        assert abs(cf.determinant(cf.root)[0]) < 1e-12

    def test_negative_delta6_no_root(self, stable_params):
        cf = corner_flow_from_deltas(stable_params.replace(epsilon=0.0), 1.0, 0.2, -3.0)
        assert cf.root is None
        x = np.linspace(-10, 0, 201)
        assert np.all(cf.closed_form(x) < 0)

    def test_delta6_sign_matches_criterion(self, stable_params, unstable_params):
        for p in (stable_params, unstable_params):
            for j in _roots(p):
                for d2 in (1.0, 1e3, -50.0):
                    assert np.sign(corner_flow(p, j, d2).delta6) == -np.sign(criterion_margin(p, j))

    def test_delta2_large_root_converges(self, stable_params):
        (j,) = _roots(stable_params)
        r3, r4 = corner_flow(stable_params, j, 1e3).root, corner_flow(stable_params, j, 1e4).root
        # x = ln(delta6) / (2 mu1) with delta6 ~ delta2^2: root runs to -inf like ln(delta2)
        assert r4 - r3 == pytest.approx(-math.log(100) / (2 * SQ2), rel=1e-10)

    def test_corner_crossing_positive(self, stable_params):
        (j,) = _roots(stable_params)
        cf = corner_flow(stable_params, j)
        assert cf.crossing_form(cf.root) > 0

    def test_zero_delta2_rejected(self, stable_params):
        with pytest.raises(ValueError):
            corner_flow(stable_params, _roots(stable_params)[0], 0.0)

    def test_root_existence_flips_with_margin_along_path(self):
        seen = set()
        for t in np.linspace(0.0, 1.0, 50):
            a, b = 2 - 7 * t, 1 + 4 * t
            try:
                p = ModelParams(0.01, a, b, 0.5, 5.0)
            except InvalidParameters:
                continue  # alpha = 0 on the path
            for j in _roots(p):
                m = criterion_margin(p, j)
                has_root = corner_flow(p, j).root is not None
                assert has_root == (m < 0)
                seen.add(has_root)
        assert seen == {True, False}


class TestReport:
    def test_stable_inventory(self, stable_params):
        r = singular_limit_report(stable_params, _roots(stable_params)[0])
        assert r.interior_signatures == (-1, 1)
        assert r.predicted_index == 0
        assert r.corner_crossing and r.corner_signature == 1
        assert r.back_endpoint_negative

    def test_unstable_inventory(self, unstable_params):
        r1, r2 = (singular_limit_report(unstable_params, j) for j in _roots(unstable_params))
        assert r1.interior_signatures == (-1,) and r1.predicted_index == -1 and not r1.corner_crossing
        assert r2.interior_signatures == (-1, 1) and r2.predicted_index == 0

    def test_marginal_raises(self, stable_params):
        # choose gamma so that the jump-off point lands exactly on the saddle-node x_e
        p = ModelParams(0.01, 1.0, -2.0, 0.0, 5.0)
        x_e = math.log(-p.alpha * p.D / p.beta) / (2 - 2 / p.D)
        j = JumpSolution(x_e, 1)
        assert abs(criterion_margin(p, j)) < 1e-12
        with pytest.raises(MarginalCase):
            singular_limit_report(p, j)

    def test_to_dict(self, stable_params):
        d = singular_limit_report(stable_params, _roots(stable_params)[0]).to_dict()
        assert d["predicted_index"] == 0
        assert d["interior_signatures"] == [-1, 1]
        assert d["back"]["contribution"] == 0

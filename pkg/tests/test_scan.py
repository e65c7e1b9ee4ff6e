from __future__ import annotations

import csv
import io
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from pulse_maslov.cli import main
from pulse_maslov.exceptions import InvalidParameters
from pulse_maslov.model import ModelParams
from pulse_maslov.scan import (
    MARGINAL_BAND,
    RootResult,
    ScanResult,
    boundary_cells,
    evaluate_cell,
    parse_range,
    render_svg,
    run_scan,
)

BASE = ModelParams(0.01, 1.0, 1.0, 0.5, 5.0)
ALPHAS = np.linspace(-6, 2, 33)
BETAS = np.linspace(-2, 6, 33)


@pytest.fixture(scope="module")
def grid_scan():
    return run_scan(BASE, ALPHAS, BETAS)


class TestParseRange:
    def test_inclusive(self):
        assert np.array_equal(parse_range("-6:2:33"), np.linspace(-6, 2, 33))
        assert np.array_equal(parse_range("0.5"), [0.5])

    @pytest.mark.parametrize("bad", ["1:2", "a:b:3", "1:2:0", ""])
    def test_rejects(self, bad):
        with pytest.raises(InvalidParameters):
            parse_range(bad)


class TestCriterionScan:
    def test_shape(self, grid_scan):
        assert len(grid_scan.cells) == 33 * 33
        assert grid_scan.summary()["shape"] == [33, 33]

    def test_positive_quadrant_stable(self, grid_scan):
        checked = 0
        for c in grid_scan.cells:
            if c.alpha > 0 and c.beta > 0 and c.roots:
                assert all(r.margin < 0 for r in c.roots)
                checked += 1
        assert checked > 10

    def test_no_pulse_cells_unlabelled(self, grid_scan):
        for c in grid_scan.cells:
            if not c.roots:
                assert c.classification in ("no-pulse", "degenerate")
            else:
                assert "no-pulse" not in c.classification

    def test_boundary_separates_signs(self, grid_scan):
        M = grid_scan.margin_grid(1)
        assert np.nanmin(M) < 0 < np.nanmax(M)
        cells = boundary_cells(grid_scan)
        assert cells
        for i, j in cells:
            assert any(np.isfinite(grid_scan.margin_grid(k)[i, j]) for k in (1, 2))

    def test_classification_band(self):
        assert RootResult(1, 1.0, MARGINAL_BAND / 2).classification == "marginal"
        assert RootResult(1, 1.0, -1.0).classification == "stable"
        assert RootResult(1, 1.0, 1.0).classification == "unstable"

    def test_degenerate_axis_cells(self, grid_scan):
        # beta = 0 lies on the grid
        j0 = int(np.flatnonzero(BETAS == 0.0)[0])
        assert grid_scan.cell(5, j0).classification == "degenerate"


class TestDeterminism:
    def test_order_invariance(self, grid_scan):
        rng = np.random.default_rng(0)
        tasks = [(i, j) for i in range(len(ALPHAS)) for j in range(len(BETAS))]
        order = rng.permutation(len(tasks))
        cells = [None] * len(tasks)
        for k in order:
            i, j = tasks[k]
            cells[k] = evaluate_cell(BASE, i, j, ALPHAS[i], BETAS[j])
        shuffled = ScanResult(ALPHAS, BETAS, BASE, cells)
        assert shuffled.to_csv() == grid_scan.to_csv()

    def test_process_pool_identical(self, grid_scan):
        pooled = run_scan(BASE, ALPHAS, BETAS, jobs=2)
        assert pooled.to_csv() == grid_scan.to_csv()

    def test_cli_byte_identical(self, tmp_path, capsys):
        args = ["scan", "--alpha", "-6:2:9", "--beta", "-2:6:9", "--gamma", "0.5", "--dd", "5"]
        for d in ("a", "b"):
            assert main([*args, "--out", str(tmp_path / d)]) == 0
        for name in ("scan.csv", "scan.svg", "scan.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestOutputs:
    def test_csv(self, grid_scan):
        text = grid_scan.to_csv()
        assert "\r\n" in text
        rows = list(csv.DictReader(io.StringIO(text)))
        assert rows[0].keys() >= {"alpha", "beta", "margin", "classification"}
        assert {(r["i"], r["j"]) for r in rows} == {(str(i), str(j)) for i in range(33) for j in range(33)}

    def test_svg(self, grid_scan):
        svg = render_svg(grid_scan)
        root = ET.fromstring(svg.encode())
        assert root.tag == "{http://www.w3.org/2000/svg}svg"
        assert root.get("version") == "1.1"
        ns = {"s": "http://www.w3.org/2000/svg"}
        assert len(root.findall("s:g[@id='cells']/s:rect", ns)) == 33 * 33
        contour = root.find("s:path[@id='zero-contour']", ns)
        assert contour is not None and contour.get("d").startswith("M ")


@pytest.mark.slow
class TestFullSample:
    def test_boundary_sample_agrees(self):
        res = run_scan(BASE, ALPHAS, BETAS, full=True, sample=10, seed=42, jobs=4)
        upgraded = [c for c in res.cells if any(r.status != "criterion" for r in c.roots)]
        assert len(upgraded) == 10
        for c in upgraded:
            for r in c.roots:
                assert r.status == "ok", r.error
                if r.classification != "marginal":
                    assert r.agreement

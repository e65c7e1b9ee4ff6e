"""Parameter scans over (alpha, beta) and the stability map.

The default scan uses only root existence and the criterion margin.  With
``full=True`` cells are upgraded to the pulse/Maslov/spectrum pipeline.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import contourpy
import numpy as np

from .exceptions import InvalidParameters, PulseMaslovError
from .model import ModelParams
from .singular_limit import criterion_margin
from .singular_orbit import solve_jump_condition

__all__ = ["RootResult", "ScanCell", "ScanResult", "parse_range", "evaluate_cell", "boundary_cells",
           "run_scan", "render_svg"]

MARGINAL_BAND = 0.05


def parse_range(text: str) -> np.ndarray:
    """``"start:stop:num"`` (inclusive, like ``linspace``) or a single number."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) == 3:
            start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
            if num < 1:
                raise ValueError
            return np.linspace(start, stop, num)
    except ValueError:
        pass
    raise InvalidParameters(f"expected a number or start:stop:num, got {text!r}")


@dataclass
class RootResult:
    root_index: int
    x_star: float
    margin: float
    maslov_index: int | None = None
    unstable_count: int | None = None
    status: str = "criterion"  # "criterion" | "ok" | "failed"
    error: str = ""

    @property
    def classification(self) -> str:
        if abs(self.margin) < MARGINAL_BAND:
            return "marginal"
        return "stable" if self.margin < 0 else "unstable"

    @property
    def pipeline_classification(self) -> str | None:
        if self.maslov_index is None:
            return None
        return "stable" if self.maslov_index == 0 else "unstable"

    @property
    def agreement(self) -> bool | None:
        """Pipeline verdict equals criterion verdict (None when not run or marginal)."""
        if self.status == "criterion" or self.classification == "marginal":
            return None
        return self.pipeline_classification == self.classification


@dataclass
class ScanCell:
    i: int
    j: int
    alpha: float
    beta: float
    roots: list = field(default_factory=list)
    degenerate: bool = False  # alpha or beta exactly zero

    @property
    def classification(self) -> str:
        """``no-pulse``, or the classification of every root joined by ``/``."""
        if self.degenerate:
            return "degenerate"
        if not self.roots:
            return "no-pulse"
        return "/".join(r.classification for r in self.roots)


def _cell_params(base: ModelParams, alpha: float, beta: float) -> ModelParams | None:
    try:
        return base.replace(alpha=float(alpha), beta=float(beta))
    except InvalidParameters:
        return None


def evaluate_cell(base: ModelParams, i: int, j: int, alpha: float, beta: float, full: bool = False) -> ScanCell:
    cell = ScanCell(i, j, float(alpha), float(beta))
    p = _cell_params(base, alpha, beta)
    if p is None:
        cell.degenerate = True
        return cell
    for jump in solve_jump_condition(p):
        r = RootResult(jump.root_index, jump.x_star, criterion_margin(p, jump))
        if full:
            from .pipeline import run_pipeline

            try:
                res = run_pipeline(p, jump.root_index)
                r.maslov_index = res.maslov.total_index
                r.unstable_count = res.spectrum.unstable_count
                r.status = "ok"
            except PulseMaslovError as exc:
                r.status, r.error = "failed", f"{type(exc).__name__}: {exc}"
        cell.roots.append(r)
    return cell


def _evaluate(args):
    return evaluate_cell(*args)


@dataclass
class ScanResult:
    alphas: np.ndarray
    betas: np.ndarray
    base: ModelParams
    cells: list  # row-major over (alpha, beta)
    full: bool = False

    def cell(self, i: int, j: int) -> ScanCell:
        return self.cells[i * len(self.betas) + j]

    def margin_grid(self, root_index: int = 1) -> np.ndarray:
        """``(n_alpha, n_beta)`` margins of the given root, NaN where it does not exist."""
        M = np.full((len(self.alphas), len(self.betas)), np.nan)
        for c in self.cells:
            for r in c.roots:
                if r.root_index == root_index:
                    M[c.i, c.j] = r.margin
        return M

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["i", "j", "alpha", "beta", "root_index", "x_star", "margin", "classification",
                    "maslov_index", "unstable_count", "agreement", "status"])
        for c in self.cells:
            if not c.roots:
                w.writerow([c.i, c.j, repr(c.alpha), repr(c.beta), "", "", "", c.classification, "", "", "", ""])
            for r in c.roots:
                w.writerow([c.i, c.j, repr(c.alpha), repr(c.beta), r.root_index, repr(r.x_star), repr(r.margin),
                            r.classification, "" if r.maslov_index is None else r.maslov_index,
                            "" if r.unstable_count is None else r.unstable_count,
                            "" if r.agreement is None else str(r.agreement).lower(), r.status])
        return buf.getvalue()

    def summary(self) -> dict:
        counts = {}
        for c in self.cells:
            for label in ([c.classification] if not c.roots else [r.classification for r in c.roots]):
                counts[label] = counts.get(label, 0) + 1
        checked = [r for c in self.cells for r in c.roots if r.agreement is not None]
        failed = [r for c in self.cells for r in c.roots if r.status == "failed"]
        return {
            "shape": [len(self.alphas), len(self.betas)],
            "params": self.base.to_config_dict(),
            "counts": dict(sorted(counts.items())),
            "full": self.full,
            "pipeline_cells": sum(1 for c in self.cells for r in c.roots if r.status != "criterion"),
            "pipeline_agreement": sum(r.agreement for r in checked),
            "pipeline_checked": len(checked),
            "pipeline_failed": len(failed),
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)


def boundary_cells(result: ScanResult) -> list:
    """Cells whose margin for some root changes sign against a 4-neighbour."""
    out = []
    na, nb = len(result.alphas), len(result.betas)
    grids = [result.margin_grid(k) for k in (1, 2)]
    for i in range(na):
        for j in range(nb):
            for M in grids:
                if np.isnan(M[i, j]):
                    continue
                nbrs = [(i + di, j + dj) for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))
                        if 0 <= i + di < na and 0 <= j + dj < nb]
                if any(not np.isnan(M[a, b]) and np.sign(M[a, b]) != np.sign(M[i, j]) for a, b in nbrs):
                    out.append((i, j))
                    break
    return out


def run_scan(base: ModelParams, alphas, betas, *, full: bool = False, sample: int | None = None,
             seed: int = 42, jobs: int = 1) -> ScanResult:
    """Evaluate every cell of the (alpha, beta) grid.

    ``full`` upgrades cells to the full pipeline: all of them, or with ``sample``
    only that many boundary-adjacent cells drawn with ``seed``.  Cells are
    evaluated in a process pool when ``jobs > 1``; results are placed by index,
    so the outcome does not depend on the evaluation order.
    """
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    tasks = [(base, i, j, a, b, False) for i, a in enumerate(alphas) for j, b in enumerate(betas)]
    cells = _map(tasks, jobs)
    result = ScanResult(alphas, betas, base, cells, full)
    if full:
        targets = [(c.i, c.j) for c in cells if c.roots]
        if sample is not None:
            cand = boundary_cells(result)
            rng = np.random.default_rng(seed)
            pick = rng.choice(len(cand), size=min(sample, len(cand)), replace=False)
            targets = sorted(cand[k] for k in pick)
        upgraded = _map([(base, i, j, alphas[i], betas[j], True) for i, j in targets], jobs)
        for c in upgraded:
            cells[c.i * len(betas) + c.j] = c
    return result


def _map(tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_evaluate, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    return [_evaluate(t) for t in tasks]


# --- SVG ---------------------------------------------------------------------

def _color(m: float, scale: float) -> str:
    if math.isnan(m):
        return "#bdbdbd"
    s = min(1.0, abs(m) / scale) ** 0.5
    if m < 0:  # stable: blue
        r, g, b = 255 - 222 * s, 255 - 153 * s, 255 - 83 * s
    else:  # unstable: red
        r, g, b = 255 - 41 * s, 255 - 212 * s, 255 - 208 * s
    return f"#{int(round(r)):02x}{int(round(g)):02x}{int(round(b)):02x}"


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    raw = (hi - lo) / max(n, 1)
    step = 10 ** math.floor(math.log10(raw)) if raw > 0 else 1.0
    for mult in (1, 2, 5, 10):
        if raw <= mult * step:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    return np.arange(start, hi + 1e-9 * step, step)


def render_svg(result: ScanResult, root_index: int = 1, width: int = 560, height: int = 520) -> str:
    """Heat map of the criterion margin with its zero contour.

    Cells without that root are gray.  The contour is traced on the cell centres
    with NaNs masked.
    """
    A, B = result.alphas, result.betas
    M = result.margin_grid(root_index)
    left, right, top, bottom = 70, 20, 40, 60
    pw, ph = width - left - right, height - top - bottom
    a0, a1 = (A[0], A[-1]) if len(A) > 1 else (A[0] - 0.5, A[0] + 0.5)
    b0, b1 = (B[0], B[-1]) if len(B) > 1 else (B[0] - 0.5, B[0] + 0.5)
    da = (a1 - a0) / max(len(A) - 1, 1)
    db = (b1 - b0) / max(len(B) - 1, 1)
    xlo, xhi, ylo, yhi = a0 - da / 2, a1 + da / 2, b0 - db / 2, b1 + db / 2

    def X(a):
        return left + (a - xlo) / (xhi - xlo) * pw

    def Y(b):
        return top + (yhi - b) / (yhi - ylo) * ph

    finite = np.abs(M[np.isfinite(M)])
    scale = float(finite.max()) if finite.size else 1.0
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<title>criterion margin, root {root_index}</title>',
        '<g id="cells" shape-rendering="crispEdges">',
    ]
    cw, ch = pw / len(A), ph / len(B)
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            out.append(f'<rect x="{X(a - da / 2):.2f}" y="{Y(b + db / 2):.2f}" width="{cw:.2f}" '
                       f'height="{ch:.2f}" fill="{_color(M[i, j], scale)}"/>')
    out.append("</g>")

    if len(A) > 1 and len(B) > 1 and finite.size:
        gen = contourpy.contour_generator(A, B, np.ma.masked_invalid(M.T), name="serial")
        paths = []
        for line in gen.lines(0.0):
            pts = " L ".join(f"{X(a):.2f} {Y(b):.2f}" for a, b in line)
            paths.append(f"M {pts}")
        if paths:
            out.append(f'<path id="zero-contour" d="{" ".join(paths)}" fill="none" stroke="#000000" '
                       'stroke-width="2"/>')

    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>')
    out.append('<g id="axes" font-family="sans-serif" font-size="12" fill="#000000">')
    for t in _ticks(xlo, xhi):
        x = X(t)
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" stroke="#000000"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(ylo, yhi):
        y = Y(t)
        out.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="#000000"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 15}" text-anchor="middle">alpha</text>')
    out.append(f'<text x="18" y="{top + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2:.2f})">beta</text>')
    p = result.base
    out.append(f'<text x="{left}" y="24">gamma = {p.gamma:g}, D = {p.D:g}; blue stable, red unstable, '
               'gray no pulse</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"

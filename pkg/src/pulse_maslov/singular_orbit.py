"""The eps = 0 skeleton of the standing pulse.

The orbit is the concatenation

    slow-unstable  ->  fast-front  ->  slow-plateau  ->  fast-back  ->  slow-stable

glued at the corners z1..z4.  Slow arcs are parametrized by their own slow time,
fast arcs by fast time with ``U(0) = 0``.  The plateau runs over ``[-x*, x*]``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .exceptions import DomainError, InvalidParameters
from .model import ModelParams, PhasePoint

__all__ = [
    "JumpSolution",
    "SingularOrbit",
    "Segment",
    "jump_function",
    "solve_jump_condition",
    "fast_heteroclinic",
    "heteroclinic_profile",
    "slow_arc",
    "plateau_constants",
    "jump_off_point",
    "build_singular_orbit",
    "fast_hamiltonian",
]

_SQRT2 = math.sqrt(2.0)
SEGMENT_KINDS = ("slow-unstable", "fast-front", "slow-plateau", "fast-back", "slow-stable")


@dataclass(frozen=True)
class JumpSolution:
    x_star: float
    root_index: int = 1

    def __post_init__(self):
        if not self.x_star > 0:
            raise InvalidParameters(f"x_star must be positive, got {self.x_star}")

    @property
    def V0(self) -> float:
        return -math.exp(-2.0 * self.x_star)

    def W0(self, D: float) -> float:
        return -math.exp(-2.0 * self.x_star / D)


def jump_function(x, params: ModelParams):
    x = np.asarray(x, dtype=float)
    return params.alpha * np.exp(-2 * x) + params.beta * np.exp(-2 * x / params.D) - params.gamma


def _jump_derivative(x, params):
    return -2 * params.alpha * math.exp(-2 * x) - 2 * params.beta / params.D * math.exp(-2 * x / params.D)


def _tail_bound(start: float, params: ModelParams) -> float:
    """A point beyond which the sign of the jump function no longer changes."""
    a, b, g, D = abs(params.alpha), abs(params.beta), abs(params.gamma), params.D
    X = max(start, 0.0) + 1.0
    while X < 1e4:
        fast, slow = a * math.exp(-2 * X), b * math.exp(-2 * X / D)
        if g > 0 and fast + slow < 0.25 * g:
            return X
        if g == 0 and fast < 0.25 * slow:
            return X
        X *= 2
    return X


def solve_jump_condition(params: ModelParams, tol: float = 1e-12) -> list[JumpSolution]:
    """All positive roots of ``alpha e^{-2x} + beta e^{-2x/D} = gamma``, ascending.

    The function has at most one interior extremum (only when ``alpha beta < 0``),
    so bracketing each monotone piece is exhaustive.
    """
    a, b, D = params.alpha, params.beta, params.D
    breaks = [0.0]
    x_ext = None
    if a * b < 0:
        x_ext = math.log(-a * D / b) / (2.0 - 2.0 / D)
        if x_ext > 0:
            breaks.append(x_ext)
    breaks.append(_tail_bound(breaks[-1], params))

    f = lambda x: float(jump_function(x, params))  # noqa: E731
    roots = []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        flo, fhi = f(lo), f(hi)
        if flo == 0.0 and lo > 0:
            roots.append(lo)
        if flo * fhi < 0:
            x = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            # one Newton polish; bisection already sits at machine precision
            d = _jump_derivative(x, params)
            if d != 0:
                x_new = x - f(x) / d
                if lo < x_new < hi and abs(f(x_new)) < abs(f(x)):
                    x = x_new
            roots.append(x)
    if x_ext is not None and x_ext > 0 and abs(f(x_ext)) < tol and all(abs(r - x_ext) > 1e-9 for r in roots):
        roots.append(x_ext)  # tangential double root
    roots = sorted(r for r in roots if r > 0 and abs(f(r)) < tol * max(1.0, abs(a), abs(b), abs(params.gamma)))
    return [JumpSolution(r, i + 1) for i, r in enumerate(roots)]


def fast_hamiltonian(U, P):
    """Conserved quantity of the eps = 0 fast subsystem."""
    U, P = np.asarray(U, dtype=float), np.asarray(P, dtype=float)
    return P**2 / 2 + U**2 / 2 - U**4 / 4


def fast_heteroclinic(U, branch: str = "front"):
    """``P`` on the heteroclinic through ``U``; positive on the front, negative on the back."""
    U = np.asarray(U, dtype=float)
    if np.any(np.abs(U) > 1):
        raise DomainError("heteroclinic connections only exist for |U| <= 1")
    sign = {"front": 1.0, "back": -1.0}.get(branch)
    if sign is None:
        raise ValueError(f"branch must be 'front' or 'back', got {branch!r}")
    P = sign * (1 - U**2) / _SQRT2
    return float(P) if P.ndim == 0 else P


def heteroclinic_profile(xi, branch: str = "front"):
    """Time parametrization ``(U(xi), P(xi))`` of a fast jump, centered at ``U(0) = 0``."""
    xi = np.asarray(xi, dtype=float)
    U = np.tanh(xi / _SQRT2)
    if branch == "back":
        U = -U
    return U, fast_heteroclinic(U, branch)


def plateau_constants(x_star: float, D: float) -> tuple[float, float]:
    """``(c1, c3)`` for the plateau hyperbolas ``V = 2 c1 cosh(s) + 1``, ``W = 2 c3 cosh(s/D) + 1``."""
    return -math.exp(-x_star), -math.exp(-x_star / D)


def jump_off_point(x_star: float, D: float) -> PhasePoint:
    """z1: where the slow-unstable arc leaves ``U = -1``."""
    V1, W1 = -math.exp(-2 * x_star), -math.exp(-2 * x_star / D)
    return PhasePoint(-1.0, 0.0, V1, 1 + V1, W1, 1 + W1)


_ARC_DOMAINS = {
    "slow-unstable": lambda xs: (-math.inf, 0.0),
    "slow-plateau": lambda xs: (-xs, xs),
    "slow-stable": lambda xs: (0.0, math.inf),
}


def slow_arc(kind: str, x_star: float, s, D: float):
    """Point(s) on one of the three slow segments at slow time ``s``.

    Returns a :class:`PhasePoint` for scalar ``s`` and an ``(n, 6)`` array otherwise.
    """
    if kind not in _ARC_DOMAINS:
        raise ValueError(f"unknown slow segment kind {kind!r}")
    lo, hi = _ARC_DOMAINS[kind](x_star)
    s_arr = np.asarray(s, dtype=float)
    tol = 1e-12 * max(1.0, x_star)
    if np.any(s_arr < lo - tol) or np.any(s_arr > hi + tol):
        raise DomainError(f"slow time outside [{lo}, {hi}] for segment {kind}")
    z1 = jump_off_point(x_star, D)
    out = np.empty(s_arr.shape + (6,))
    if kind == "slow-plateau":
        c1, c3 = plateau_constants(x_star, D)
        out[..., 0] = 1.0
        out[..., 1] = 0.0
        out[..., 2] = 2 * c1 * np.cosh(s_arr) + 1
        out[..., 3] = 2 * c1 * np.sinh(s_arr)
        out[..., 4] = 2 * c3 * np.cosh(s_arr / D) + 1
        out[..., 5] = 2 * c3 * np.sinh(s_arr / D)
    else:
        sign = 1.0 if kind == "slow-unstable" else -1.0
        ev = np.exp(sign * s_arr)
        ew = np.exp(sign * s_arr / D)
        out[..., 0] = -1.0
        out[..., 1] = 0.0
        out[..., 2] = -1 + (z1.V + 1) * ev
        out[..., 3] = sign * (z1.V + 1) * ev
        out[..., 4] = -1 + (z1.W + 1) * ew
        out[..., 5] = sign * (z1.W + 1) * ew
    if s_arr.ndim == 0:
        return PhasePoint.from_array(out)
    return out


@dataclass(frozen=True)
class Segment:
    kind: str
    timescale: str  # "slow" or "fast"
    domain: tuple[float, float]
    evaluate: Callable = field(repr=False, compare=False)


@dataclass(frozen=True)
class SingularOrbit:
    params: ModelParams
    jump: JumpSolution
    segments: tuple
    z1: PhasePoint
    z2: PhasePoint
    z3: PhasePoint
    z4: PhasePoint

    @property
    def corners(self) -> tuple:
        return (self.z1, self.z2, self.z3, self.z4)

    def segment(self, kind: str) -> Segment:
        for seg in self.segments:
            if seg.kind == kind:
                return seg
        raise KeyError(kind)

    def evaluate(self, x) -> np.ndarray:
        """Slow-time evaluation of the whole orbit; fast jumps sit at ``x = -x*`` and ``x = x*``."""
        x = np.asarray(x, dtype=float)
        xs, D = self.jump.x_star, self.params.D
        out = np.empty(x.shape + (6,))
        left, right = x < -xs, x > xs
        mid = ~(left | right)
        if np.any(left):
            out[left] = slow_arc("slow-unstable", xs, x[left] + xs, D)
        if np.any(mid):
            out[mid] = slow_arc("slow-plateau", xs, x[mid], D)
        if np.any(right):
            out[right] = slow_arc("slow-stable", xs, x[right] - xs, D)
        return out

    def polylines(self, n: int = 201, slow_margin: float = 6.0, fast_half_width: float = 8.0) -> dict:
        """Sampled curves per segment, used for plotting and JSON export."""
        xs = self.jump.x_star
        out = {}
        for seg in self.segments:
            lo, hi = seg.domain
            if seg.timescale == "fast":
                lo, hi = -fast_half_width, fast_half_width
            lo = max(lo, -xs - slow_margin) if math.isinf(lo) else lo
            hi = min(hi, slow_margin) if math.isinf(hi) else hi
            t = np.linspace(lo, hi, n)
            out[seg.kind] = {"t": t, "points": seg.evaluate(t)}
        return out

    def to_dict(self, n: int = 101) -> dict:
        lines = self.polylines(n)
        return {
            "params": self.params.to_config_dict(),
            "x_star": self.jump.x_star,
            "root_index": self.jump.root_index,
            "corners": {f"z{i + 1}": list(z.as_array()) for i, z in enumerate(self.corners)},
            "segments": [
                {
                    "kind": seg.kind,
                    "timescale": seg.timescale,
                    "domain": [_finite_or_str(v) for v in seg.domain],
                    "t": lines[seg.kind]["t"].tolist(),
                    "points": lines[seg.kind]["points"].tolist(),
                }
                for seg in self.segments
            ],
        }

    def to_json(self, n: int = 101) -> str:
        return json.dumps(self.to_dict(n), sort_keys=True)


def _finite_or_str(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _fast_segment(branch: str, slow: np.ndarray) -> Callable:
    def evaluate(xi):
        U, P = heteroclinic_profile(xi, branch)
        U, P = np.asarray(U), np.asarray(P)
        out = np.empty(U.shape + (6,))
        out[..., 0], out[..., 1] = U, P
        out[..., 2:] = slow
        return PhasePoint.from_array(out) if U.ndim == 0 else out

    return evaluate


def build_singular_orbit(params: ModelParams, jump: JumpSolution) -> SingularOrbit:
    f = float(jump_function(jump.x_star, params))
    if abs(f) > 1e-10:
        raise InvalidParameters(f"x* = {jump.x_star} does not solve the jump condition (residual {f:.3e})")
    xs, D = jump.x_star, params.D
    z1 = jump_off_point(xs, D)
    z2 = PhasePoint(1.0, 0.0, z1.V, z1.Q, z1.W, z1.R)
    z3 = PhasePoint(1.0, 0.0, z1.V, -z1.Q, z1.W, -z1.R)
    z4 = PhasePoint(-1.0, 0.0, z1.V, -z1.Q, z1.W, -z1.R)
    segments = (
        Segment("slow-unstable", "slow", (-math.inf, 0.0), lambda s: slow_arc("slow-unstable", xs, s, D)),
        Segment("fast-front", "fast", (-math.inf, math.inf), _fast_segment("front", z1.as_array()[2:])),
        Segment("slow-plateau", "slow", (-xs, xs), lambda s: slow_arc("slow-plateau", xs, s, D)),
        Segment("fast-back", "fast", (-math.inf, math.inf), _fast_segment("back", z4.as_array()[2:])),
        Segment("slow-stable", "slow", (0.0, math.inf), lambda s: slow_arc("slow-stable", xs, s, D)),
    )
    return SingularOrbit(params, jump, segments, z1, z2, z3, z4)

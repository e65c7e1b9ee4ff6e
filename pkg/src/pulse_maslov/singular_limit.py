"""Closed-form eps -> 0 predictions for the conjugate points of the pulse.

These are the analytic counterparts of :mod:`pulse_maslov.maslov`: the stability
criterion, the slow-manifold determinant, the corner flow at the landing point
z2 and the resulting inventory of crossings.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import MarginalCase
from .model import ETA, ModelParams, leading_order_eigenvalues
from .singular_orbit import JumpSolution
from .symplectic import omega_matrix

__all__ = [
    "StabilityVerdict",
    "CornerFlow",
    "SingularLimitReport",
    "stability_criterion",
    "criterion_margin",
    "slow_manifold_determinant",
    "slow_manifold_closed_form",
    "corner_flow",
    "corner_flow_from_deltas",
    "front_determinant",
    "cutoff_determinant",
    "landing_plane",
    "singular_limit_report",
]

_SQRT2 = math.sqrt(2.0)
MARGINAL_TOL = 1e-10


def criterion_margin(params: ModelParams, jump: JumpSolution) -> float:
    """``alpha V0 + (beta / D) W0`` with ``V0, W0`` the jump-off values."""
    return params.alpha * jump.V0 + params.beta / params.D * jump.W0(params.D)


@dataclass(frozen=True)
class StabilityVerdict:
    verdict: str  # "stable" | "unstable" | "marginal"
    margin: float

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"


def stability_criterion(params: ModelParams, jump: JumpSolution, tol: float = MARGINAL_TOL) -> StabilityVerdict:
    margin = criterion_margin(params, jump)
    if abs(margin) < tol:
        return StabilityVerdict("marginal", margin)
    return StabilityVerdict("stable" if margin < 0 else "unstable", margin)


# --- plateau ---------------------------------------------------------------

def _plateau_constants(params, jump):
    c1 = -math.exp(-jump.x_star)
    c3 = -math.exp(-jump.x_star / params.D)
    dc3 = -params.alpha * c1 / (params.beta * c3)  # implicit derivative of alpha c1^2 + beta c3^2 = gamma
    return c1, c3, dc3


def slow_manifold_determinant(params: ModelParams, jump: JumpSolution, x) -> np.ndarray:
    """``det[eta2, eta3, dh/dx, dh/dc1]`` in (V, Q, W, R), assembled and evaluated numerically.

    ``h(x, c1) = (c1 cosh x + 1, c1 sinh x, c3 cosh(x/D), c3 sinh(x/D))`` with
    ``c3 = c3(c1)`` fixed by the jump-off relation.
    """
    c1, c3, dc3 = _plateau_constants(params, jump)
    D = params.D
    x = np.atleast_1d(np.asarray(x, dtype=float))
    M = np.zeros(x.shape + (4, 4))
    M[..., :, 0] = [1.0, -1.0, 0.0, 0.0]
    M[..., :, 1] = [0.0, 0.0, 1.0, -1.0]
    M[..., 0, 2] = c1 * np.sinh(x)
    M[..., 1, 2] = c1 * np.cosh(x)
    M[..., 2, 2] = c3 / D * np.sinh(x / D)
    M[..., 3, 2] = c3 / D * np.cosh(x / D)
    M[..., 0, 3] = np.cosh(x)
    M[..., 1, 3] = np.sinh(x)
    M[..., 2, 3] = dc3 * np.cosh(x / D)
    M[..., 3, 3] = dc3 * np.sinh(x / D)
    return np.linalg.det(M)


def slow_manifold_closed_form(params: ModelParams, jump: JumpSolution, x) -> np.ndarray:
    c1, c3, dc3 = _plateau_constants(params, jump)
    x = np.asarray(x, dtype=float)
    return (c3 / params.D - c1 * dc3) * np.exp(x * (1 + 1 / params.D))


# --- fast pieces -------------------------------------------------------------

def front_determinant(U) -> np.ndarray:
    """``det[E^u, V]`` along the eps = 0 front, with ``E^u = (eta4, eta5, (1, -sqrt2 U))``."""
    U = np.atleast_1d(np.asarray(U, dtype=float))
    M = np.zeros(U.shape + (6, 6))
    M[..., :, 0] = ETA[:, 3]
    M[..., :, 1] = ETA[:, 4]
    M[..., 0, 2] = 1.0
    M[..., 3, 2] = -_SQRT2 * U
    M[..., :, 3] = [1.0, 0, 0, 0, 0, 0]
    M[..., :, 4] = ETA[:, 1]
    M[..., :, 5] = ETA[:, 2]
    return np.linalg.det(M)


def cutoff_determinant(U) -> np.ndarray:
    """``det[U(0), E^s]`` along the eps = 0 back; vectors as rows, ``(u, p) = (1, sqrt2 U)``."""
    U = np.atleast_1d(np.asarray(U, dtype=float))
    M = np.zeros(U.shape + (6, 6))
    M[..., 0, :] = ETA[:, 3]
    M[..., 1, :] = ETA[:, 4]
    M[..., 2, :] = ETA[:, 5]
    M[..., 3, 0] = 1.0
    M[..., 3, 3] = _SQRT2 * U
    M[..., 4, :] = ETA[:, 1]
    M[..., 5, :] = ETA[:, 2]
    return np.linalg.det(M)


# --- corner at the landing point ----------------------------------------------

def landing_plane(params: ModelParams, V1: float, W1: float) -> np.ndarray:
    """Tangent plane of W^u(X-) just after landing at z2, columns in the eta basis."""
    Z = np.zeros((6, 3))
    Z[5, 0] = 1.0
    Z[1, 1], Z[2, 1], Z[3, 1], Z[4, 1] = 1.0, 1.0 / params.D, W1 / params.D, V1
    Z[3, 2], Z[4, 2] = -params.alpha / params.beta, 1.0
    return Z


@dataclass(frozen=True)
class CornerFlow:
    """Backward-time trajectory through a plane of ``W^u(Y)`` under the frozen flow at ``U = 1``."""

    params: ModelParams
    delta2: float
    delta3: float
    delta6: float
    mu: np.ndarray = field(repr=False)

    def frame_eta(self, x) -> np.ndarray:
        """Spanning vectors of Phi(x) as columns in the eta basis."""
        e = np.exp(self.mu * x)
        a, b, D = self.params.alpha, self.params.beta, self.params.D
        F = np.zeros((6, 3))
        F[0, 0], F[1, 0], F[2, 0], F[5, 0] = e[0], self.delta2 * e[1], self.delta3 * e[2], self.delta6 * e[5]
        F[3, 1], F[5, 1] = e[3], b * D / _SQRT2 * self.delta3 * e[5]
        F[4, 2], F[5, 2] = e[4], a / _SQRT2 * self.delta2 * e[5]
        return F

    def frame(self, x) -> np.ndarray:
        return ETA @ self.frame_eta(x)

    def matrix(self, x) -> np.ndarray:
        """``[V, Phi(x)]`` in the eta basis, with V = span{eta1 + eta6, eta2, eta3}."""
        F = self.frame_eta(x)
        V = np.zeros((6, 3))
        V[0, 0] = V[5, 0] = 1.0
        V[1, 1] = V[2, 2] = 1.0
        return np.column_stack([V, F[:, 1], F[:, 2], F[:, 0]])

    def determinant(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.array([np.linalg.det(self.matrix(xi)) for xi in x])

    def closed_form(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        m = self.mu
        return np.exp((m[3] + m[4]) * x) * (self.delta6 * np.exp(m[5] * x) - np.exp(m[0] * x))

    @property
    def root(self) -> float | None:
        """Backward time of the conjugate point, present iff ``delta6 >= 1``."""
        if self.delta6 < 1:
            return None
        return math.log(self.delta6) / (2 * self.mu[0])

    def intersection(self, x) -> np.ndarray:
        """Spanning vector of ``V`` intersected with ``Phi(x)``, eta basis."""
        e = np.exp(self.mu * x)
        return np.array([e[0], self.delta2 * e[1], self.delta3 * e[2], 0.0, 0.0, e[0]])

    def crossing_form(self, x) -> float:
        """``omega(psi, B psi)`` with B acting diagonally on the eta basis."""
        psi = ETA @ self.intersection(x)
        B_psi = ETA @ (self.mu * self.intersection(x))
        return float(psi @ omega_matrix(self.params) @ B_psi)


def corner_flow_from_deltas(params: ModelParams, delta2: float, delta3: float, delta6: float) -> CornerFlow:
    return CornerFlow(params, float(delta2), float(delta3), float(delta6), leading_order_eigenvalues(params))


def corner_flow(params: ModelParams, jump: JumpSolution, delta2: float = 1e3) -> CornerFlow:
    """Corner trajectory with ``delta3 = delta2 / D`` and ``delta6`` matched to the landing plane."""
    if delta2 == 0:
        raise ValueError("delta2 must be nonzero")
    V1, W1 = jump.V0, jump.W0(params.D)
    delta3 = delta2 / params.D
    delta6 = -(params.beta * W1 / params.D + params.alpha * V1) / _SQRT2 * delta2**2
    return corner_flow_from_deltas(params, delta2, delta3, delta6)


# --- inventory ---------------------------------------------------------------

@dataclass(frozen=True)
class SingularLimitReport:
    margin: float
    verdict: str
    front_signature: int
    plateau_crossings: int
    plateau_sign: int
    plateau_expected_sign: int
    corner_crossing: bool
    corner_signature: int | None
    corner_delta6: float
    back_endpoint_negative: bool
    interior_signatures: tuple
    predicted_index: int

    def to_dict(self) -> dict:
        return {
            "margin": self.margin,
            "verdict": self.verdict,
            "front": {"crossings": 1, "signature": self.front_signature},
            "plateau": {"crossings": self.plateau_crossings, "determinant_sign": self.plateau_sign,
                        "expected_sign": self.plateau_expected_sign},
            "corner": {"crossing": self.corner_crossing, "signature": self.corner_signature,
                       "delta6": self.corner_delta6},
            "back": {"endpoint": True, "negative": self.back_endpoint_negative, "contribution": 0},
            "interior_signatures": list(self.interior_signatures),
            "predicted_index": self.predicted_index,
        }


def singular_limit_report(params: ModelParams, jump: JumpSolution, delta2: float = 1e3) -> SingularLimitReport:
    margin = criterion_margin(params, jump)
    if abs(margin) < MARGINAL_TOL:
        raise MarginalCase(f"criterion margin {margin:.3e} at the saddle-node of homoclinics")
    c1, c3, dc3 = _plateau_constants(params, jump)
    plateau_sign = int(np.sign(c3 / params.D - c1 * dc3))
    expected = int(np.sign(-margin / (params.beta * c3)))
    corner = corner_flow(params, jump, delta2)
    has_corner = corner.root is not None
    corner_sig = int(np.sign(corner.crossing_form(corner.root))) if has_corner else None
    interior = (-1, corner_sig) if has_corner else (-1,)
    return SingularLimitReport(
        margin=margin,
        verdict="stable" if margin < 0 else "unstable",
        front_signature=-1,
        plateau_crossings=0,
        plateau_sign=plateau_sign,
        plateau_expected_sign=expected,
        corner_crossing=has_corner,
        corner_signature=corner_sig,
        corner_delta6=corner.delta6,
        back_endpoint_negative=True,
        interior_signatures=interior,
        predicted_index=sum(interior),
    )

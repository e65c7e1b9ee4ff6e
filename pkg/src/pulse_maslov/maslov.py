"""Maslov index of the standing pulse at lambda = 0.

The unstable bundle ``E^u(0, xi)`` is carried forward from ``-L`` and the stable
bundle ``E^s(0, xi)`` backward from ``+L`` with a fourth-order Magnus scheme,
which is exactly symplectic.  Conjugate points are zeros of
``d(xi) = det[F_u(xi) | F_ref]`` where ``F_ref`` spans ``E^s(0, xi_inf)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .exceptions import (
    CutoffViolation,
    DegenerateCrossing,
    IntegratorBlowup,
    LagrangianDrift,
    MarginalCase,
    UnresolvedCrossing,
)
from .model import ETA, TO_LINEAR, asymptotic_splitting, linearization_matrix
from .pulse import PulseProfile
from .singular_limit import SingularLimitReport, singular_limit_report
from .symplectic import LagrangianFrame, omega_matrix, orthonormalize, plane_gap

__all__ = [
    "BundleTrajectory",
    "ConjugatePoint",
    "MaslovReport",
    "evolve_bundle",
    "reference_plane",
    "detect_conjugate_points",
    "crossing_signature",
    "maslov_index",
    "magnus_step",
]

_G1 = 0.5 - math.sqrt(3.0) / 6.0
_G2 = 0.5 + math.sqrt(3.0) / 6.0
_COMM = math.sqrt(3.0) / 12.0

LAGRANGIAN_TOL = 1e-8
DRIFT_TOL = 1e-6
NULL_TOL = 1e-8
REGULAR_TOL = 1e-8


def _U(profile: PulseProfile, xi):
    return profile._spline(np.asarray(xi, dtype=float))[..., 0]


def magnus_step(profile: PulseProfile, a, b, lam: float = 0.0) -> np.ndarray:
    """Propagator(s) from ``a`` to ``b``; vectorized over arrays of step endpoints."""
    a = np.asarray(a, dtype=float)
    h = np.asarray(b, dtype=float) - a
    A1 = linearization_matrix(lam, _U(profile, a + _G1 * h), profile.params)
    A2 = linearization_matrix(lam, _U(profile, a + _G2 * h), profile.params)
    hh = h[..., None, None]
    Om = 0.5 * hh * (A1 + A2) + _COMM * hh**2 * (A2 @ A1 - A1 @ A2)
    return expm(Om)


def _lagrangian_residual(Q: np.ndarray, O: np.ndarray) -> np.ndarray:
    return np.abs(np.swapaxes(Q, -1, -2) @ O @ Q).max(axis=(-2, -1))


@dataclass
class BundleTrajectory:
    """Orthonormal frames of an invariant Lagrangian bundle at ``lambda = 0``.

    ``nodes`` are in integration order: ascending for ``"forward"``, descending
    for ``"backward"``.
    """

    nodes: np.ndarray
    frames: np.ndarray  # (n, 6, 3)
    direction: str
    profile: PulseProfile = field(repr=False)
    lam: float = 0.0

    def __len__(self) -> int:
        return len(self.nodes)

    def frame(self, i: int) -> LagrangianFrame:
        return LagrangianFrame(self.frames[i], True)

    def lagrangian_residuals(self) -> np.ndarray:
        return _lagrangian_residual(self.frames, omega_matrix(self.profile.params))

    def evaluate(self, xi: float) -> np.ndarray:
        """Orthonormal frame at an arbitrary ``xi`` by one Magnus substep from the nearest earlier node."""
        nodes = self.nodes
        if self.direction == "forward":
            i = int(np.searchsorted(nodes, xi, side="right")) - 1
        else:
            i = int(np.searchsorted(-nodes, -xi, side="right")) - 1
        i = min(max(i, 0), len(nodes) - 1)
        if xi == nodes[i]:
            return self.frames[i]
        M = magnus_step(self.profile, nodes[i], xi, self.lam)
        return orthonormalize(M @ self.frames[i])

    def tangent_residual(self) -> np.ndarray:
        """Distance of ``phi'(xi)`` from the frame at each node, scaled by ``max |phi'|``.

        The scaling is global because ``phi'`` vanishes at the pulse centre.
        """
        d = self.profile._spline(self.nodes, 1)[:, TO_LINEAR]
        proj = np.einsum("nij,nj->ni", self.frames, np.einsum("nji,nj->ni", self.frames, d))
        return np.linalg.norm(d - proj, axis=1) / np.linalg.norm(d, axis=1).max()


def _bundle_nodes(profile: PulseProfile, direction: str, stop: float | None) -> np.ndarray:
    grid = profile.grid
    if direction == "forward":
        stop = grid[-1] if stop is None else float(stop)
        nodes = grid[grid < stop]
        return np.append(nodes, stop)
    if direction == "backward":
        stop = grid[0] if stop is None else float(stop)
        nodes = grid[grid > stop][::-1]
        return np.append(nodes, stop)
    raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")


def evolve_bundle(profile: PulseProfile, direction: str = "forward", *, stop: float | None = None,
                  reortho: float = 1.0, lam: float = 0.0) -> BundleTrajectory:
    """Integrate ``F' = A(lam, xi) F`` across the profile grid.

    The forward bundle starts from the unstable subspace of ``A_inf`` at ``-L``,
    the backward bundle from the stable subspace at ``+L``.  The working frame is
    replaced by its positive-diagonal QR factor once ``reortho`` fast-time units
    have accumulated, so determinant signs are never flipped by bookkeeping.
    """
    nodes = _bundle_nodes(profile, direction, stop)
    split = asymptotic_splitting(lam, profile.params, profile.rest)
    F = split.unstable if direction == "forward" else split.stable
    F = orthonormalize(F)
    steps = magnus_step(profile, nodes[:-1], nodes[1:], lam)
    O = omega_matrix(profile.params)

    frames = np.empty((len(nodes), 6, 3))
    frames[0] = F
    since = 0.0
    for n, M in enumerate(steps, start=1):
        F = M @ F
        if not np.all(np.isfinite(F)):
            raise IntegratorBlowup(f"non-finite frame at xi = {nodes[n]:.6g}")
        Q = orthonormalize(F)
        frames[n] = Q
        since += abs(nodes[n] - nodes[n - 1])
        if since >= reortho or np.abs(F).max() > 1e100:
            F, since = Q, 0.0
    res = _lagrangian_residual(frames, O)
    worst = int(np.argmax(res))
    if res[worst] > DRIFT_TOL:
        raise LagrangianDrift(f"Lagrangian residual {res[worst]:.2e} at xi = {nodes[worst]:.6g}")
    return BundleTrajectory(nodes, frames, direction, profile, lam)


# --------------------------------------------------------------------------
# reference plane


@dataclass(frozen=True)
class ReferencePlane:
    xi_infinity: float
    frame: np.ndarray
    backward: BundleTrajectory = field(repr=False)
    cutoff_min: float
    singular_gap: float


def _cutoff_dets(backward: BundleTrajectory, U0: np.ndarray) -> np.ndarray:
    return np.linalg.det(np.concatenate([np.broadcast_to(U0, backward.frames.shape), backward.frames], axis=2))


def reference_plane(profile: PulseProfile, *, reortho: float = 1.0, backward: BundleTrajectory | None = None):
    """Pick ``xi_inf`` at the back's ``U = 0`` crossing and return ``E^s(0, xi_inf)``.

    Returns a ``ReferencePlane``; iterating it yields ``(xi_infinity, frame)``.
    """
    xi_inf = profile.back_midpoint
    if backward is None:
        backward = evolve_bundle(profile, "backward", stop=xi_inf, reortho=reortho)
    U0 = orthonormalize(asymptotic_splitting(0.0, profile.params, profile.rest).unstable)
    dets = _cutoff_dets(backward, U0)
    if np.any(np.abs(dets) < 1e-8) or np.any(np.sign(dets) != np.sign(dets[0])):
        i = int(np.argmin(np.abs(dets)))
        raise CutoffViolation(f"det[U(0) | E^s(0, xi)] degenerates at xi = {backward.nodes[i]:.6g}")
    limit = np.column_stack([ETA[:, 0] + ETA[:, 5], ETA[:, 1], ETA[:, 2]])
    frame = backward.frames[-1]
    return ReferencePlane(xi_inf, frame, backward, float(np.abs(dets).min()), plane_gap(frame, limit))


# ReferencePlane unpacks like a pair
ReferencePlane.__iter__ = lambda self: iter((self.xi_infinity, self.frame))


# --------------------------------------------------------------------------
# conjugate points


@dataclass
class ConjugatePoint:
    xi_star: float
    intersection_dim: int
    signature: int | None = None
    regular: bool | None = None
    witness: np.ndarray | None = field(default=None, repr=False)
    kind: str = "sign_change"  # sign_change | tangential | endpoint
    U_at_crossing: float = float("nan")
    form_eigenvalues: np.ndarray | None = field(default=None, repr=False)
    determinant: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "xi_star": self.xi_star,
            "U_at_crossing": self.U_at_crossing,
            "dim": self.intersection_dim,
            "signature": self.signature,
            "regular": self.regular,
            "kind": self.kind,
        }


def _det(F: np.ndarray, ref: np.ndarray) -> float:
    return float(np.linalg.det(np.column_stack([F, ref])))


def _intersection(F: np.ndarray, ref: np.ndarray, tol: float = NULL_TOL) -> np.ndarray:
    """Orthonormal basis of ``span F`` intersected with ``span ref``; at least one vector."""
    _, s, Vt = np.linalg.svd(np.column_stack([F, ref]))
    k = max(1, int(np.sum(s < tol)))
    psi = F @ Vt[-k:, :3].T
    return orthonormalize(psi) if k > 1 else psi / np.linalg.norm(psi)


def _bisect(forward: BundleTrajectory, ref: np.ndarray, a: float, b: float, da: float, tol: float) -> float:
    for _ in range(200):
        if abs(b - a) < tol:
            break
        m = 0.5 * (a + b)
        dm = _det(forward.evaluate(m), ref)
        if dm == 0:
            return m
        if np.sign(dm) == np.sign(da):
            a, da = m, dm
        else:
            b = m
    return 0.5 * (a + b)


def detect_conjugate_points(forward: BundleTrajectory, ref_frame, xi_infinity: float, *,
                            end_guard: float = 0.5, xtol: float = 1e-9, subsamples: int = 8,
                            tangential_rel: float = 1e-7) -> list[ConjugatePoint]:
    """Zeros of ``det[F_u | F_ref]`` on ``(-L, xi_inf]``, ordered by position; the last is the endpoint."""
    ref = ref_frame.columns if isinstance(ref_frame, LagrangianFrame) else np.asarray(ref_frame)
    nodes, frames = forward.nodes, forward.frames
    d = np.linalg.det(np.concatenate([frames, np.broadcast_to(ref, frames.shape)], axis=2))
    scale = float(np.abs(d).max())
    interior = nodes < xi_infinity - end_guard
    points: list[ConjugatePoint] = []

    idx = np.flatnonzero(interior[:-1] & interior[1:] & (np.sign(d[:-1]) * np.sign(d[1:]) < 0))
    for i in idx:
        a, b = nodes[i], nodes[i + 1]
        sub = np.linspace(a, b, subsamples + 1)
        ds = np.array([d[i]] + [_det(forward.evaluate(s), ref) for s in sub[1:-1]] + [d[i + 1]])
        changes = np.flatnonzero(np.sign(ds[:-1]) * np.sign(ds[1:]) < 0)
        if len(changes) != 1:
            raise UnresolvedCrossing(
                f"{len(changes)} sign changes of the determinant between xi = {a:.6g} and {b:.6g}")
        j = changes[0]
        xs = _bisect(forward, ref, sub[j], sub[j + 1], ds[j], xtol)
        points.append(ConjugatePoint(xs, 1, kind="sign_change"))

    # deep minima of |d| without a sign change
    ad = np.abs(d)
    for i in range(1, len(nodes) - 1):
        if not interior[i + 1] or not (ad[i] <= ad[i - 1] and ad[i] <= ad[i + 1]):
            continue
        if np.sign(d[i - 1]) != np.sign(d[i + 1]) or ad[i] >= tangential_rel * scale:
            continue
        if any(abs(p.xi_star - nodes[i]) < 1e-6 for p in points):
            continue
        points.append(ConjugatePoint(float(nodes[i]), 1, kind="tangential"))

    points.sort(key=lambda p: p.xi_star)
    points.append(ConjugatePoint(float(xi_infinity), 1, kind="endpoint"))
    for p in points:
        F = forward.evaluate(p.xi_star)
        p.witness = _intersection(F, ref)
        p.intersection_dim = p.witness.shape[1]
        p.determinant = _det(F, ref)
        p.U_at_crossing = float(_U(forward.profile, p.xi_star))
    return points


def crossing_signature(point: ConjugatePoint, forward: BundleTrajectory, ref_frame=None,
                       profile: PulseProfile | None = None, *, strict: bool = True) -> int:
    """Signature of ``Gamma_ij = omega(psi_i, A psi_j)`` (symmetrized) on the intersection."""
    profile = forward.profile if profile is None else profile
    if point.witness is None:
        ref = ref_frame.columns if isinstance(ref_frame, LagrangianFrame) else np.asarray(ref_frame)
        point.witness = _intersection(forward.evaluate(point.xi_star), ref)
        point.intersection_dim = point.witness.shape[1]
    psi = point.witness
    A = linearization_matrix(forward.lam, _U(profile, point.xi_star), profile.params)
    OA = omega_matrix(profile.params) @ A
    G = psi.T @ OA @ psi
    G = 0.5 * (G + G.T)
    ev = np.linalg.eigvalsh(G)
    point.form_eigenvalues = ev
    top = max(float(np.abs(ev).max()), 1e-300)
    point.regular = bool(np.abs(ev).min() > REGULAR_TOL * top and top > 1e-12 * np.linalg.norm(OA, 2))
    point.signature = int(np.sum(ev > 0) - np.sum(ev < 0))
    if strict and not point.regular:
        raise DegenerateCrossing(f"crossing at xi = {point.xi_star:.10g} has a singular crossing form {ev}")
    return point.signature


# --------------------------------------------------------------------------
# assembly


@dataclass
class MaslovReport:
    interior_points: list
    endpoint: ConjugatePoint
    endpoint_positive_count: int
    total_index: int
    xi_infinity: float
    reference_gap: float = float("nan")
    cutoff_min: float = float("nan")
    prediction: SingularLimitReport | None = None
    max_lagrangian_residual: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def agreement(self) -> bool | None:
        if self.prediction is None:
            return None
        sigs = tuple(p.signature for p in self.interior_points)
        return sigs == tuple(self.prediction.interior_signatures) and self.total_index == self.prediction.predicted_index

    def to_dict(self) -> dict:
        return {
            "crossings": [p.to_dict() for p in self.interior_points],
            "endpoint": dict(self.endpoint.to_dict(), positive_count=self.endpoint_positive_count),
            "total_index": self.total_index,
            "xi_infinity": self.xi_infinity,
            "reference_gap": self.reference_gap,
            "cutoff_min": self.cutoff_min,
            "max_lagrangian_residual": self.max_lagrangian_residual,
            "prediction": None if self.prediction is None else self.prediction.to_dict(),
            "agreement": self.agreement,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def maslov_index(profile: PulseProfile, *, reortho: float = 1.0, end_guard: float = 0.5,
                 strict: bool = True) -> MaslovReport:
    """Forward bundle, reference plane, crossings and their signatures, summed."""
    ref = reference_plane(profile, reortho=reortho)
    forward = evolve_bundle(profile, "forward", stop=ref.xi_infinity, reortho=reortho)
    points = detect_conjugate_points(forward, ref.frame, ref.xi_infinity, end_guard=end_guard)
    for p in points:
        crossing_signature(p, forward, ref.frame, profile, strict=strict)
    *interior, endpoint = points
    ev = endpoint.form_eigenvalues
    n_plus = int(np.sum(ev > 0))
    total = sum(p.signature for p in interior) + n_plus
    try:
        prediction = singular_limit_report(profile.params, profile.jump)
    except MarginalCase:
        prediction = None
    lag = max(float(forward.lagrangian_residuals().max()), float(ref.backward.lagrangian_residuals().max()))
    return MaslovReport(
        interior_points=interior,
        endpoint=endpoint,
        endpoint_positive_count=n_plus,
        total_index=int(total),
        xi_infinity=ref.xi_infinity,
        reference_gap=ref.singular_gap,
        cutoff_min=ref.cutoff_min,
        prediction=prediction,
        max_lagrangian_residual=lag,
        meta={"reortho": reortho, "nodes": len(forward)},
    )

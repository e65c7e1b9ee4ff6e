"""Symplectic form, Lagrangian frames and Pluecker coordinates on Gr(3, 6).

All vectors here are in linearized ordering ``(u, v, w, p, q, r)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .exceptions import InvalidParameters, RankDeficient
from .model import ETA, ModelParams

__all__ = [
    "SymplecticForm",
    "LagrangianFrame",
    "PluckerVector",
    "TRIPLES",
    "omega_matrix",
    "omega_form",
    "orthonormalize",
    "is_lagrangian",
    "plucker_coords",
    "plane_gap",
    "grassmann_plucker_residual",
]

TRIPLES = tuple(combinations(range(6), 3))
_TRIPLE_INDEX = {t: i for i, t in enumerate(TRIPLES)}


def omega_matrix(params: ModelParams) -> np.ndarray:
    """Matrix of ``du^dp - alpha dv^dq - beta D dw^dr``, so ``omega(x, y) = x @ O @ y``."""
    if params.alpha == 0 or params.beta == 0:
        raise InvalidParameters("omega is degenerate when alpha or beta vanishes")
    O = np.zeros((6, 6))
    O[0, 3], O[3, 0] = 1.0, -1.0
    O[1, 4], O[4, 1] = -params.alpha, params.alpha
    O[2, 5], O[5, 2] = -params.beta * params.D, params.beta * params.D
    return O


@dataclass(frozen=True)
class SymplecticForm:
    matrix: np.ndarray

    @classmethod
    def from_params(cls, params: ModelParams) -> "SymplecticForm":
        return cls(omega_matrix(params))

    def __call__(self, x, y):
        return np.asarray(x) @ self.matrix @ np.asarray(y)

    def gram(self, X, Y=None) -> np.ndarray:
        """Matrix of pairwise products ``omega(X[:, i], Y[:, j])``."""
        Y = X if Y is None else Y
        return np.asarray(X).T @ self.matrix @ np.asarray(Y)


def omega_form(x, y, params: ModelParams) -> float:
    return float(np.asarray(x) @ omega_matrix(params) @ np.asarray(y))


def _check_rank(cols: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    cols = np.asarray(cols, dtype=float)
    if cols.shape != (6, 3):
        raise RankDeficient(f"expected a 6x3 frame, got shape {cols.shape}")
    s = np.linalg.svd(cols, compute_uv=False)
    if s[-1] <= tol * max(s[0], 1e-300):
        raise RankDeficient(f"frame has numerical rank < 3 (singular values {s})")
    return cols


def orthonormalize(cols) -> np.ndarray:
    """QR with the triangular factor's diagonal made positive."""
    Q, R = np.linalg.qr(np.asarray(cols, dtype=float))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


@dataclass(frozen=True)
class LagrangianFrame:
    """A 3-plane in R^6 given by a spanning 6x3 matrix."""

    columns: np.ndarray
    orthonormal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "columns", _check_rank(self.columns))

    @classmethod
    def from_columns(cls, *vectors) -> "LagrangianFrame":
        return cls(np.column_stack(vectors))

    def orthonormalized(self) -> "LagrangianFrame":
        if self.orthonormal:
            return self
        return LagrangianFrame(orthonormalize(self.columns), True)

    def projector(self) -> np.ndarray:
        Q = self.orthonormalized().columns
        return Q @ Q.T


def _as_columns(frame) -> np.ndarray:
    if isinstance(frame, LagrangianFrame):
        return frame.columns
    return _check_rank(frame)


def is_lagrangian(frame, params: ModelParams, tol: float = 1e-9) -> tuple[bool, float]:
    """Whether ``omega`` vanishes on the plane; residual measured on an orthonormal basis."""
    Q = orthonormalize(_as_columns(frame))
    G = Q.T @ omega_matrix(params) @ Q
    residual = float(np.abs(G).max())
    return residual < tol, residual


def _minors(M: np.ndarray) -> np.ndarray:
    return np.array([np.linalg.det(M[list(t), :]) for t in TRIPLES])


@dataclass(frozen=True)
class PluckerVector:
    """Projective Pluecker coordinates ``p_ijk``, scaled so the largest entry is +1."""

    coords: np.ndarray
    basis: str = "standard"

    def __getitem__(self, key) -> float:
        if isinstance(key, str):
            key = tuple(int(c) - 1 for c in key)
        else:
            key = tuple(int(k) - 1 for k in key)
        return float(self.coords[_TRIPLE_INDEX[key]])

    def ratio(self, num, den) -> float:
        return self[num] / self[den]

    def to_dict(self) -> dict:
        return {"".join(str(i + 1) for i in t): float(c) for t, c in zip(TRIPLES, self.coords)}

    def to_json(self) -> str:
        return json.dumps({"basis": self.basis, "coords": self.to_dict()}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PluckerVector":
        data = json.loads(text)
        coords = np.array([data["coords"]["".join(str(i + 1) for i in t)] for t in TRIPLES])
        return cls(coords, data.get("basis", "standard"))

    def relation_residual(self) -> float:
        return grassmann_plucker_residual(self.coords)

    def same_plane(self, other: "PluckerVector", tol: float = 1e-10) -> bool:
        return bool(min(np.abs(self.coords - other.coords).max(), np.abs(self.coords + other.coords).max()) < tol)


def plucker_coords(frame, basis: str = "standard") -> PluckerVector:
    cols = _as_columns(frame)
    if basis == "eta":
        cols = np.linalg.solve(ETA, cols)
    elif basis != "standard":
        raise ValueError(f"basis must be 'standard' or 'eta', got {basis!r}")
    p = _minors(cols)
    k = int(np.argmax(np.abs(p)))
    if p[k] == 0:
        raise RankDeficient("all Pluecker coordinates vanish")
    return PluckerVector(p / p[k], basis)


def _p_signed(p: np.ndarray, idx) -> float:
    if len(set(idx)) < 3:
        return 0.0
    order = np.argsort(idx)
    # parity of the sorting permutation
    perm = list(order)
    sign, seen = 1, [False] * 3
    for i in range(3):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign * p[_TRIPLE_INDEX[tuple(sorted(idx))]]


def grassmann_plucker_residual(p) -> float:
    """Largest violation of the quadratic Pluecker relations after max-norm scaling."""
    p = np.asarray(p, dtype=float)
    p = p / np.abs(p).max()
    worst = 0.0
    for I in combinations(range(6), 2):
        for J in combinations(range(6), 4):
            total = 0.0
            for l, j in enumerate(J):
                rest = J[:l] + J[l + 1:]
                total += (-1) ** l * _p_signed(p, I + (j,)) * _p_signed(p, rest)
            worst = max(worst, abs(total))
    return worst


def plane_gap(a, b) -> float:
    """Operator-norm distance between orthogonal projectors; sine of the largest principal angle."""
    Qa = orthonormalize(_as_columns(a))
    Qb = orthonormalize(_as_columns(b))
    return float(np.linalg.norm(Qa @ Qa.T - Qb @ Qb.T, 2))

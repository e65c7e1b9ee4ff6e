"""Three-component activator-inhibitor model: parameters, vector fields, linearization.

Two coordinate orderings are used throughout the package:

* nonlinear ordering ``(U, P, V, Q, W, R)`` for the standing-wave ODE, with
  ``P = eps U_x``, ``Q = V_x``, ``R = D W_x``;
* linearized ordering ``(u, v, w, p, q, r)`` for the equation of variations,
  where the symplectic structure is block-canonical.

``to_linear`` / ``to_nonlinear`` convert between them.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .exceptions import InvalidParameters, NoRootNearMinusOne, NotHyperbolic

__all__ = [
    "ModelParams",
    "PhasePoint",
    "EigenSplitting",
    "TO_LINEAR",
    "TO_NONLINEAR",
    "ETA",
    "to_linear",
    "to_nonlinear",
    "fixed_point",
    "vector_field",
    "jacobian",
    "linearization_matrix",
    "asymptotic_splitting",
    "leading_order_eigenvalues",
]

# index maps between (U,P,V,Q,W,R) and (u,v,w,p,q,r)
TO_LINEAR = np.array([0, 2, 4, 1, 3, 5])
TO_NONLINEAR = np.argsort(TO_LINEAR)

_SQRT2 = math.sqrt(2.0)

# eps -> 0 eigenvectors of A_inf(0) (unnormalized), columns eta_1..eta_6
ETA = np.array(
    [
        [1.0, 0.0, 0.0, -_SQRT2, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0, _SQRT2, 0.0, 0.0],
    ]
).T

# config-file key for D
_CONFIG_KEYS = {"epsilon": "epsilon", "alpha": "alpha", "beta": "beta", "gamma": "gamma",
                "dd": "D", "tau": "tau", "theta": "theta"}


@dataclass(frozen=True)
class ModelParams:
    """Scalars of the reaction-diffusion system.

    ``epsilon = 0`` is accepted so the reduced vector fields can be evaluated;
    everything that needs a genuine pulse checks ``epsilon > 0`` itself.
    """

    epsilon: float = 0.01
    alpha: float = 2.0
    beta: float = 1.0
    gamma: float = 1.0
    D: float = 5.0
    tau: float = 1.0
    theta: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise InvalidParameters(f"{f.name} must be a real number, got {value!r}") from None
            if not math.isfinite(value):
                raise InvalidParameters(f"{f.name} must be finite, got {value}")
            object.__setattr__(self, f.name, value)
        if self.epsilon < 0:
            raise InvalidParameters(f"epsilon must be non-negative, got {self.epsilon}")
        if self.alpha == 0 or self.beta == 0:
            raise InvalidParameters("alpha and beta must be nonzero (symplectic form degenerates)")
        if self.D <= 1:
            raise InvalidParameters(f"D must exceed 1, got {self.D}")
        if self.tau <= 0 or self.theta <= 0:
            raise InvalidParameters("tau and theta must be positive")

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def require_positive_epsilon(self):
        if self.epsilon <= 0:
            raise InvalidParameters("this operation needs epsilon > 0")

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    def to_config_dict(self) -> dict:
        return {key: getattr(self, attr) for key, attr in _CONFIG_KEYS.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        kwargs = {}
        for key, value in data.items():
            attr = _CONFIG_KEYS.get(key, key)
            if attr not in {f.name for f in fields(cls)}:
                raise InvalidParameters(f"unknown parameter key {key!r}")
            kwargs[attr] = value
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(self.to_config_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))

    def to_config(self) -> str:
        return "".join(f"{k} = {v!r}\n" for k, v in self.to_config_dict().items())

    @classmethod
    def from_config(cls, text: str, base: "ModelParams | None" = None) -> "ModelParams":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        data = parse_config(text)
        if base is not None:
            merged = base.to_config_dict()
            merged.update(data)
            data = merged
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ModelParams":
        text = Path(path).read_text(encoding="utf-8")
        if str(path).endswith(".json"):
            return cls.from_json(text)
        return cls.from_config(text)


def parse_config(text: str) -> dict:
    data = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameters(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise InvalidParameters(f"config line {lineno}: unknown key {key!r}")
        try:
            data[key] = float(value)
        except ValueError:
            raise InvalidParameters(f"config line {lineno}: {value!r} is not a number") from None
    return data


@dataclass(frozen=True)
class PhasePoint:
    """A state of the standing-wave ODE in nonlinear ordering."""

    U: float
    P: float
    V: float
    Q: float
    W: float
    R: float

    @classmethod
    def from_array(cls, y) -> "PhasePoint":
        y = np.asarray(y, dtype=float).reshape(6)
        return cls(*(float(c) for c in y))

    @classmethod
    def from_linear(cls, y) -> "PhasePoint":
        return cls.from_array(to_nonlinear(y))

    def as_array(self) -> np.ndarray:
        return np.array([self.U, self.P, self.V, self.Q, self.W, self.R])

    def to_linear(self) -> np.ndarray:
        return to_linear(self.as_array())

    def __array__(self, dtype=None, copy=None):
        return self.as_array().astype(dtype) if dtype else self.as_array()


def to_linear(y) -> np.ndarray:
    """(U,P,V,Q,W,R) -> (u,v,w,p,q,r); works on the last axis."""
    return np.asarray(y, dtype=float)[..., TO_LINEAR]


def to_nonlinear(y) -> np.ndarray:
    return np.asarray(y, dtype=float)[..., TO_NONLINEAR]


def _cubic(U, params):
    return U**3 - U + params.epsilon * ((params.alpha + params.beta) * U + params.gamma)


def fixed_point(params: ModelParams, tol: float = 1e-14, maxiter: int = 50) -> PhasePoint:
    """Rest state ``X^- = (U^-, 0, U^-, 0, U^-, 0)`` with ``U^-`` the root near -1.

    Newton iteration on ``U^3 - U + eps((alpha + beta) U + gamma) = 0`` started at -1.
    """
    a = params.alpha + params.beta
    U = -1.0
    for _ in range(maxiter):
        g = _cubic(U, params)
        dg = 3 * U * U - 1 + params.epsilon * a
        if dg == 0:
            break
        step = g / dg
        U -= step
        if not -1.5 <= U <= -0.5:
            raise NoRootNearMinusOne(f"Newton iterate {U} left [-1.5, -0.5]")
        if abs(step) <= tol * max(1.0, abs(U)):
            return PhasePoint(U, 0.0, U, 0.0, U, 0.0)
    raise NoRootNearMinusOne(f"no convergence to the root near -1 in {maxiter} iterations")


def vector_field(point, params: ModelParams, timescale: str = "fast") -> np.ndarray:
    """Right-hand side of the standing-wave ODE in nonlinear ordering.

    ``point`` may be a :class:`PhasePoint` or an array whose last axis has length 6.
    The slow field is the fast one divided by ``eps``.
    """
    y = np.asarray(point.as_array() if isinstance(point, PhasePoint) else point, dtype=float)
    U, P, V, Q, W, R = np.moveaxis(y, -1, 0)
    eps, D = params.epsilon, params.D
    out = np.stack(
        [
            P,
            -U + U**3 + eps * (params.alpha * V + params.beta * W + params.gamma),
            eps * Q,
            eps * (V - U),
            eps / D * R,
            eps / D * (W - U),
        ],
        axis=-1,
    )
    if timescale == "fast":
        return out
    if timescale == "slow":
        params.require_positive_epsilon()
        return out / eps
    raise ValueError(f"timescale must be 'fast' or 'slow', got {timescale!r}")


def jacobian(point, params: ModelParams) -> np.ndarray:
    """Jacobian of the fast vector field in nonlinear ordering; batched on leading axes."""
    y = np.asarray(point.as_array() if isinstance(point, PhasePoint) else point, dtype=float)
    U = y[..., 0]
    eps, D = params.epsilon, params.D
    J = np.zeros(U.shape + (6, 6))
    J[..., 0, 1] = 1.0
    J[..., 1, 0] = -1.0 + 3.0 * U**2
    J[..., 1, 2] = eps * params.alpha
    J[..., 1, 4] = eps * params.beta
    J[..., 2, 3] = eps
    J[..., 3, 0] = -eps
    J[..., 3, 2] = eps
    J[..., 4, 5] = eps / D
    J[..., 5, 0] = -eps / D
    J[..., 5, 4] = eps / D
    return J


def linearization_matrix(lam: float, U, params: ModelParams) -> np.ndarray:
    """A(lambda, xi) in linearized ordering with ``U = U(xi)`` substituted.

    ``U`` may be an array, in which case the result has shape ``U.shape + (6, 6)``.
    """
    U = np.asarray(U, dtype=float)
    eps, D = params.epsilon, params.D
    A = np.zeros(U.shape + (6, 6))
    A[..., 0, 3] = 1.0
    A[..., 1, 4] = eps
    A[..., 2, 5] = eps / D
    A[..., 3, 0] = lam - 1.0 + 3.0 * U**2
    A[..., 3, 1] = params.alpha * eps
    A[..., 3, 2] = params.beta * eps
    A[..., 4, 0] = -eps
    A[..., 4, 1] = eps * (lam * params.tau + 1.0)
    A[..., 5, 0] = -eps / D
    A[..., 5, 2] = eps / D * (lam * params.theta + 1.0)
    return A


def leading_order_eigenvalues(params: ModelParams) -> np.ndarray:
    eps, D = params.epsilon, params.D
    return np.array([-_SQRT2, -eps, -eps / D, eps / D, eps, _SQRT2])


def _normalize_columns(vecs: np.ndarray) -> np.ndarray:
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        lead = np.flatnonzero(np.abs(col) > 1e-10 * np.abs(col).max())[0]
        if col[lead] < 0:
            vecs[:, j] = -col
    return vecs


@dataclass(frozen=True)
class EigenSplitting:
    """Eigen-decomposition of ``A_inf(lambda)`` sorted by ascending eigenvalue."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, unit norm, first nonzero entry positive

    @property
    def stable(self) -> np.ndarray:
        """6x3 frame spanning S(lambda)."""
        return self.eigenvectors[:, :3]

    @property
    def unstable(self) -> np.ndarray:
        """6x3 frame spanning U(lambda)."""
        return self.eigenvectors[:, 3:]

    def left_unstable(self) -> np.ndarray:
        """Rows annihilating S(lambda): ``L @ x = 0`` iff ``x`` lies in the stable subspace."""
        return np.linalg.inv(self.eigenvectors)[3:, :]


def asymptotic_splitting(lam: float, params: ModelParams, rest: PhasePoint | None = None) -> EigenSplitting:
    """Stable/unstable splitting of the constant-coefficient limit ``A_inf(lambda)``."""
    if rest is None:
        rest = fixed_point(params)
    A = linearization_matrix(lam, rest.U, params)
    w, vecs = np.linalg.eig(A)
    if np.any(np.abs(w.real) < 1e-10):
        raise NotHyperbolic(f"A_inf({lam}) has eigenvalues on the imaginary axis: {w}")
    if np.any(np.abs(w.imag) > 1e-10 * max(1.0, np.abs(w).max())):
        raise NotHyperbolic(f"A_inf({lam}) has complex eigenvalues {w}; only real splittings supported")
    order = np.argsort(w.real)
    w = w.real[order]
    vecs = vecs.real[:, order]
    if not (np.all(w[:3] < 0) and np.all(w[3:] > 0)):
        raise NotHyperbolic(f"expected a 3+3 splitting, got eigenvalues {w}")
    return EigenSplitting(w, _normalize_columns(vecs))

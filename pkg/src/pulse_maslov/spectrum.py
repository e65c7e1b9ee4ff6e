"""Point spectrum of the linearized PDE about the pulse, and the essential edge.

The eigenvalue problem is posed in the slow variable ``x = eps xi``::

    lam u       = eps^2 u_xx + (1 - 3 U^2) u - eps (alpha v + beta w)
    lam tau v   = v_xx + u - v
    lam theta w = D^2 w_xx + u - w

and discretized with three-point differences on a grid that is refined at the
two fronts.  Dirichlet conditions close the truncated domain.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import EigensolverFailure, TranslationNotFound
from .model import ModelParams, fixed_point
from .pulse import PulseProfile

__all__ = [
    "SpectrumReport",
    "CountValidation",
    "slow_grid",
    "default_half_width",
    "assemble_operator",
    "point_spectrum",
    "essential_edge",
    "symbol_matrix",
    "validate_counts",
]

UNSTABLE_THRESHOLD = 1e-3
CORRELATION_MIN = 0.99


def default_half_width(profile: PulseProfile) -> float:
    """Half-width of the slow domain: the fronts plus twelve W decay lengths."""
    return profile.jump.x_star + 12.0 * profile.params.D


def _layer_cdf(x, fronts, K, w):
    out = np.asarray(x, dtype=float).copy()
    for xf in fronts:
        out = out + K * w * np.arctan((x - xf) / w)
    return out


def _layer_density(x, fronts, K, w):
    out = np.ones_like(np.asarray(x, dtype=float))
    for xf in fronts:
        out = out + K / (1.0 + ((x - xf) / w) ** 2)
    return out


def slow_grid(N: int, half_width: float, fronts=(), width: float = 0.02, front_fraction: float = 0.5) -> np.ndarray:
    """``N`` nodes on ``[-half_width, half_width]`` equidistributing a Lorentzian density.

    About ``front_fraction`` of the nodes fall into layers of scale ``width`` around
    each entry of ``fronts``.  The map from index to node is smooth and does not
    depend on ``N``, so halving every cell is the same as doubling ``N``.
    """
    fronts = tuple(float(f) for f in fronts)
    a, b = -half_width, half_width
    K = 0.0
    if fronts:
        K = front_fraction / (1.0 - front_fraction) * (b - a) / (len(fronts) * np.pi * width)
    C = lambda x: _layer_cdf(x, fronts, K, width)  # noqa: E731
    Ca, Cb = C(a), C(b)
    target = np.linspace(Ca, Cb, N)
    aux = np.linspace(a, b, 200001)
    x = np.interp(target, C(aux), aux)
    for _ in range(4):
        x = x - (C(x) - target) / _layer_density(x, fronts, K, width)
    x[0], x[-1] = a, b
    return x


def _second_difference(x: np.ndarray) -> sp.csr_matrix:
    """Three-point ``d^2/dx^2`` at interior nodes of ``x``, Dirichlet ends dropped."""
    hm = np.diff(x)[:-1]
    hp = np.diff(x)[1:]
    lo = 2.0 / (hm * (hm + hp))
    di = -2.0 / (hm * hp)
    up = 2.0 / (hp * (hm + hp))
    return sp.diags([lo[1:], di, up[:-1]], [-1, 0, 1], format="csr")


def assemble_operator(profile: PulseProfile, x: np.ndarray) -> sp.csr_matrix:
    """``B^{-1} L`` on the interior nodes of ``x``, unknowns stacked as ``(u, v, w)``."""
    p = profile.params
    xi = x[1:-1]
    U = profile.evaluate_slow(xi)[:, 0]
    D2 = _second_difference(x)
    n = len(xi)
    I = sp.identity(n, format="csr")
    Luu = p.epsilon**2 * D2 + sp.diags(1.0 - 3.0 * U**2)
    blocks = [
        [Luu, -p.epsilon * p.alpha * I, -p.epsilon * p.beta * I],
        [I / p.tau, (D2 - I) / p.tau, None],
        [I / p.theta, None, (p.D**2 * D2 - I) / p.theta],
    ]
    return sp.bmat(blocks, format="csr")


def _weights(x: np.ndarray) -> np.ndarray:
    h = np.diff(x)
    return 0.5 * (h[:-1] + h[1:])


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)  # (3n, count) on interior nodes
    grid: np.ndarray = field(repr=False)
    translation_index: int
    translation_correlation: float
    unstable_count: int
    essential_edge: float
    params: ModelParams
    method: str = "dense"
    threshold: float = UNSTABLE_THRESHOLD

    @property
    def N_x(self) -> int:
        return len(self.grid)

    @property
    def L_x(self) -> float:
        return float(self.grid[-1])

    @property
    def translation_eigenvalue(self) -> complex:
        return complex(self.eigenvalues[self.translation_index])

    @property
    def translation_gap(self) -> float:
        others = np.delete(self.eigenvalues, self.translation_index)
        return float(np.abs(others - self.translation_eigenvalue).min()) if len(others) else float("inf")

    @property
    def unstable_eigenvalues(self) -> np.ndarray:
        mask = self.eigenvalues.real > self.threshold
        mask[self.translation_index] = False
        return self.eigenvalues[mask]

    @property
    def complex_flags(self) -> np.ndarray:
        lam = self.eigenvalues
        return np.abs(lam.imag) > 1e-9 * np.maximum(1.0, np.abs(lam))

    def eigenfunction(self, i: int) -> np.ndarray:
        """``(n, 3)`` array of ``(u, v, w)`` at interior nodes."""
        n = len(self.grid) - 2
        return self.eigenvectors[:, i].reshape(3, n).T

    def outer_mass(self, i: int, fraction: float = 0.1) -> float:
        """Share of the weighted L2 mass of eigenfunction ``i`` in the outer ``fraction`` of the domain."""
        xi = self.grid[1:-1]
        f = np.abs(self.eigenfunction(i)) ** 2
        mass = f.sum(axis=1) * _weights(self.grid)
        outer = np.abs(xi) > (1.0 - fraction) * self.L_x
        return float(mass[outer].sum() / mass.sum())

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [{"re": float(l.real), "im": float(l.imag), "complex": bool(c)}
                            for l, c in zip(self.eigenvalues, self.complex_flags)],
            "translation_eigenvalue": {"re": self.translation_eigenvalue.real,
                                       "im": self.translation_eigenvalue.imag,
                                       "gap": self.translation_gap,
                                       "correlation": self.translation_correlation},
            "unstable_count": self.unstable_count,
            "unstable_eigenvalues": [{"re": float(l.real), "im": float(l.imag)} for l in self.unstable_eigenvalues],
            "essential_edge": self.essential_edge,
            "discretization": {"N_x": self.N_x, "L_x": self.L_x, "boundary": "dirichlet",
                               "method": self.method},
            "params": self.params.to_config_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def eigenfunctions_csv(self, indices=None) -> str:
        indices = range(len(self.eigenvalues)) if indices is None else indices
        cols = ["x"]
        data = [self.grid[1:-1]]
        for i in indices:
            ef = self.eigenfunction(i)
            for name, c in zip("uvw", ef.T):
                cols += [f"{name}{i}_re", f"{name}{i}_im"]
                data += [c.real, c.imag]
        rows = np.column_stack(data)
        lines = [",".join(cols)] + [",".join(repr(float(v)) for v in r) for r in rows]
        return "\r\n".join(lines) + "\r\n"


def _translation_mode(profile: PulseProfile, x: np.ndarray) -> np.ndarray:
    """Slow-time derivative of the profile ``(P / eps, Q, R / D)`` at interior nodes."""
    y = profile.evaluate_slow(x[1:-1])
    return np.concatenate([y[:, 1] / profile.params.epsilon, y[:, 3], y[:, 5] / profile.params.D])


def _correlations(vecs: np.ndarray, t: np.ndarray, w: np.ndarray) -> np.ndarray:
    W = np.tile(w, 3)
    num = np.abs((vecs.conj() * (W * t)[:, None]).sum(axis=0))
    den = np.sqrt((W[:, None] * np.abs(vecs) ** 2).sum(axis=0) * (W * t**2).sum())
    return num / den


def point_spectrum(profile: PulseProfile, N_x: int = 800, L_x: float | None = None, count: int = 10, *,
                   method: str = "auto", sigma: float = 1.2, threshold: float = UNSTABLE_THRESHOLD,
                   grid: np.ndarray | None = None) -> SpectrumReport:
    """Rightmost ``count`` eigenvalues of the discretized linearization.

    ``L_x`` is the half-width of the slow domain; outside the computed profile the
    rest state is used for the coefficients.  ``method`` is ``"dense"``,
    ``"sparse"`` (shift-invert about ``sigma``) or ``"auto"``.
    """
    p = profile.params
    if grid is None:
        L_x = default_half_width(profile) if L_x is None else float(L_x)
        xf = p.epsilon * abs(profile.front_midpoint)
        x = slow_grid(N_x, L_x, fronts=(-xf, xf), width=2.0 * p.epsilon)
    else:
        x = np.asarray(grid, dtype=float)
    K = assemble_operator(profile, x)
    n = K.shape[0]
    if method == "auto":
        method = "dense" if n <= 1500 else "sparse"
    try:
        if method == "dense":
            lam, vecs = sla.eig(K.toarray())
        elif method == "sparse":
            k = min(max(count + 4, 2 * count), n - 2)
            lam, vecs = spla.eigs(K.tocsc(), k=k, sigma=sigma, which="LM", tol=1e-13)
        else:
            raise ValueError(f"method must be 'auto', 'dense' or 'sparse', got {method!r}")
    except (np.linalg.LinAlgError, spla.ArpackError, RuntimeError) as exc:
        raise EigensolverFailure(str(exc)) from exc
    if not np.all(np.isfinite(lam)):
        raise EigensolverFailure("non-finite eigenvalues")
    order = np.lexsort((-lam.imag, -lam.real))[:count]
    lam, vecs = lam[order], vecs[:, order]

    corr = _correlations(vecs, _translation_mode(profile, x), _weights(x))
    it = int(np.argmax(corr))
    if corr[it] <= CORRELATION_MIN:
        raise TranslationNotFound(f"best correlation with the profile derivative is {corr[it]:.4f}")
    unstable = lam.real > threshold
    unstable[it] = False
    edge = essential_edge(p)
    return SpectrumReport(lam, vecs, x, it, float(corr[it]), int(unstable.sum()), edge, p, method, threshold)


def symbol_matrix(params: ModelParams, k, U_rest: float | None = None) -> np.ndarray:
    """``B^{-1} M(k)`` of the constant-coefficient operator at the rest state."""
    p = params
    U = fixed_point(p).U if U_rest is None else U_rest
    k = np.atleast_1d(np.asarray(k, dtype=float))
    M = np.zeros(k.shape + (3, 3))
    M[..., 0, 0] = -p.epsilon**2 * k**2 + 1.0 - 3.0 * U**2
    M[..., 0, 1] = -p.epsilon * p.alpha
    M[..., 0, 2] = -p.epsilon * p.beta
    M[..., 1, 0] = 1.0 / p.tau
    M[..., 1, 1] = (-k**2 - 1.0) / p.tau
    M[..., 2, 0] = 1.0 / p.theta
    M[..., 2, 2] = (-p.D**2 * k**2 - 1.0) / p.theta
    return M


def essential_edge(params: ModelParams, k_max: float = 50.0, k_samples: int = 2001, *,
                   return_curve: bool = False):
    """Supremum over ``k`` in ``[0, k_max]`` of the real parts of the symbol spectrum."""
    k = np.linspace(0.0, k_max, k_samples)
    re = np.linalg.eigvals(symbol_matrix(params, k)).real.max(axis=1)
    edge = float(re.max())
    return (edge, k, re) if return_curve else edge


@dataclass(frozen=True)
class CountValidation:
    maslov_index: int
    unstable_count: int

    @property
    def passed(self) -> bool:
        return abs(self.maslov_index) == self.unstable_count

    def to_dict(self) -> dict:
        return {"maslov_index": self.maslov_index, "unstable_count": self.unstable_count,
                "verdict": "pass" if self.passed else "fail"}


def validate_counts(maslov, spectrum: SpectrumReport) -> CountValidation:
    """``|Maslov index| == number of unstable eigenvalues``."""
    return CountValidation(int(maslov.total_index), int(spectrum.unstable_count))

"""Standing pulse for eps > 0 as a reversible boundary value problem.

The pulse is computed on the half line ``[0, L]`` in fast time with

* ``P(0) = Q(0) = R(0) = 0`` (reversibility about the plateau midpoint),
* ``y(L) - X^-`` confined to the stable eigenspace of ``A_inf(0)``,

using Hermite-Simpson (three-point Lobatto) collocation on a mesh that is fine
around the back and coarse in the slow tail, then mirrored to ``[-L, L]``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq
from scipy.spatial import cKDTree
from scipy.sparse.linalg import splu

from .exceptions import DomainError, InvalidParameters, MeshTooCoarse, NewtonDiverged
from .model import TO_LINEAR, ModelParams, PhasePoint, asymptotic_splitting, fixed_point, jacobian, vector_field
from .singular_orbit import JumpSolution, build_singular_orbit, heteroclinic_profile

__all__ = ["PulseProfile", "solve_pulse", "evaluate_profile", "default_half_width", "pulse_mesh",
           "skeleton_distance"]

log = logging.getLogger(__name__)

# reversor: (U, P, V, Q, W, R) -> (U, -P, V, -Q, W, -R)
REVERSOR = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
_COLUMNS = ("U", "P", "V", "Q", "W", "R")


def default_half_width(params: ModelParams, jump: JumpSolution, proximity: float = 1e-7) -> float:
    """Fast-time half width that leaves the slowest tail mode below ``proximity``."""
    params.require_positive_epsilon()
    slowest = params.epsilon / params.D
    tail = math.log(1.0 / proximity) / slowest
    return jump.x_star / params.epsilon + max(tail, 40.0)


def _spacing(xi: np.ndarray, center: float, h_fast: float, h_max: float, width: float, grow: float) -> np.ndarray:
    d = np.maximum(np.abs(xi - center) - width, 0.0)
    return np.minimum(h_fast * np.exp(np.minimum(d / grow, 60.0)), h_max)


def pulse_mesh(L: float, center: float, N: int | None = None, *, h_fast: float = 0.02, h_max: float = 4.0,
               width: float = 14.0, grow: float = 8.0) -> np.ndarray:
    """Half-line mesh on ``[0, L]`` by equidistributing the density ``1 / h(xi)``.

    ``h`` equals ``h_fast`` within ``width`` of ``center`` and grows exponentially
    (length scale ``grow``) up to ``h_max``.  ``N`` fixes the node count; otherwise
    the native spacing decides it.
    """
    aux = np.linspace(0.0, L, max(20001, int(L / min(h_fast, 0.05)) + 1))
    dens = 1.0 / _spacing(aux, center, h_fast, h_max, width, grow)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(aux))])
    if N is None:
        N = int(math.ceil(cum[-1])) + 1
    if N < 10:
        raise InvalidParameters(f"need at least 10 nodes, got {N}")
    targets = np.linspace(0.0, cum[-1], N)
    mesh = np.interp(targets, cum, aux)
    mesh[0], mesh[-1] = 0.0, L
    return mesh


@dataclass
class PulseProfile:
    """Gridded standing pulse on ``[-L, L]`` (fast time), nonlinear ordering."""

    grid: np.ndarray
    values: np.ndarray
    params: ModelParams
    jump: JumpSolution
    midpoint: int
    residual: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.derivatives = vector_field(self.values, self.params)
        self._spline = CubicHermiteSpline(self.grid, self.values, self.derivatives, axis=0)
        self.rest = fixed_point(self.params)

    @property
    def L(self) -> float:
        return float(self.grid[-1])

    @property
    def N(self) -> int:
        return len(self.grid)

    def __call__(self, xi, order: str = "value"):
        return evaluate_profile(self, xi, order)

    def evaluate_slow(self, x, outside: str = "rest") -> np.ndarray:
        """Evaluate at slow positions ``x = eps xi``; outside ``[-L, L]`` use the rest state."""
        xi = np.asarray(x, dtype=float) / self.params.epsilon
        inside = np.abs(xi) <= self.L
        out = np.empty(xi.shape + (6,))
        out[...] = self.rest.as_array()
        if np.any(inside):
            out[inside] = self._spline(xi[inside])
        if outside != "rest" and not np.all(inside):
            raise DomainError("slow positions outside the computed profile")
        return out

    # diagnostics --------------------------------------------------------
    def collocation_residual(self) -> float:
        return _collocation_defect(self.grid, self.values, self.params)

    def symmetry_error(self) -> float:
        flipped = self.values[::-1] * REVERSOR
        return float(np.abs(self.values - flipped).max())

    def endpoint_error(self) -> float:
        X = self.rest.as_array()
        return float(max(np.abs(self.values[0] - X).max(), np.abs(self.values[-1] - X).max()))

    def u_crossings(self, tol: float = 1e-12) -> tuple[float, float]:
        """Fast times where ``U = 0`` on the front and on the back."""
        U = self.values[:, 0]
        f = lambda s: float(self._spline(s)[0])  # noqa: E731
        out = []
        for i in np.flatnonzero(U[:-1] * U[1:] < 0):
            out.append(brentq(f, self.grid[i], self.grid[i + 1], xtol=tol, rtol=1e-15, maxiter=200))
        # nodes where U vanishes exactly count once if the sign flips across them
        for i in np.flatnonzero(U[1:-1] == 0) + 1:
            if U[i - 1] * U[i + 1] < 0:
                out.append(float(self.grid[i]))
        if len(out) != 2:
            raise DomainError(f"expected exactly two U = 0 crossings, found {len(out)}")
        out.sort()
        return out[0], out[1]

    @property
    def front_midpoint(self) -> float:
        return self.u_crossings()[0]

    @property
    def back_midpoint(self) -> float:
        return self.u_crossings()[1]

    # serialization --------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(("xi",) + _COLUMNS)
        for xi, row in zip(self.grid, self.values):
            writer.writerow([repr(float(xi))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_config_dict(),
            "x_star": self.jump.x_star,
            "root_index": self.jump.root_index,
            "midpoint": self.midpoint,
            "residual": self.residual,
            "L": self.L,
            "grid": self.grid.tolist(),
            "values": self.values.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PulseProfile":
        d = json.loads(text)
        return cls(
            np.array(d["grid"]),
            np.array(d["values"]),
            ModelParams.from_dict(d["params"]),
            JumpSolution(d["x_star"], d["root_index"]),
            d["midpoint"],
            d.get("residual", float("nan")),
        )


def evaluate_profile(profile: PulseProfile, xi, order: str = "value"):
    """Cubic Hermite interpolation of the stored pulse.

    ``order="derivative"`` returns the interpolant's derivative, which should agree
    with the vector field evaluated on the interpolated value.
    """
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(np.abs(xi_arr) > profile.L * (1 + 1e-14)):
        raise DomainError(f"xi outside [-{profile.L}, {profile.L}]")
    if order == "value":
        out = profile._spline(xi_arr)
        # the last node sits at the end of the final interval; return it verbatim
        at_end = xi_arr == profile.grid[-1]
        if np.any(at_end):
            out[at_end] = profile.values[-1]
        return PhasePoint.from_array(out) if xi_arr.ndim == 0 else out
    if order == "derivative":
        return profile._spline(xi_arr, 1)
    raise ValueError(f"order must be 'value' or 'derivative', got {order!r}")


# --------------------------------------------------------------------------
# collocation system


def _collocation_parts(mesh, Y, params):
    h = np.diff(mesh)[:, None]
    F = vector_field(Y, params)
    ym = 0.5 * (Y[:-1] + Y[1:]) + h / 8 * (F[:-1] - F[1:])
    Fm = vector_field(ym, params)
    res = Y[1:] - Y[:-1] - h / 6 * (F[:-1] + 4 * Fm + F[1:])
    return h, F, ym, Fm, res


def _collocation_defect(mesh, Y, params) -> float:
    h, _, _, _, res = _collocation_parts(mesh, Y, params)
    return float(np.abs(1.5 * res / h).max())


class _HalfProblem:
    """Collocation system on ``[0, L]`` with the back position as an extra unknown.

    The computational mesh ``s`` is fixed.  The physical mesh stretches
    ``[0, s_c]`` linearly onto ``[0, x_b]`` and shifts the rest by ``x_b - s_c``,
    so the back stays pinned to node ``k_c`` where ``U = 0`` is imposed.
    Unknowns are ``Y.ravel()`` followed by ``x_b``.
    """

    def __init__(self, s, k_c: int, params: ModelParams):
        self.s = np.asarray(s, dtype=float)
        self.k_c = int(k_c)
        self.s_c = float(self.s[self.k_c])
        self.params = params
        self.n = len(self.s)
        self.rest = fixed_point(params).as_array()
        split = asymptotic_splitting(0.0, params)
        # rows acting on nonlinear ordering: Lu @ to_linear(y - X) = 0
        self.bc_right = np.zeros((3, 6))
        self.bc_right[:, TO_LINEAR] = split.left_unstable()
        hs = np.diff(self.s)
        # d h_i / d x_b: stretched intervals only
        self.dh = np.where(np.arange(self.n - 1) < self.k_c, hs / self.s_c, 0.0)
        self._pattern()

    @property
    def size(self) -> int:
        return 6 * self.n + 1

    def mesh(self, x_b: float) -> np.ndarray:
        s, s_c = self.s, self.s_c
        return np.where(s <= s_c, s * (x_b / s_c), x_b + (s - s_c))

    def pack(self, Y, x_b) -> np.ndarray:
        return np.concatenate([np.asarray(Y).ravel(), [x_b]])

    def unpack(self, z):
        return z[:-1].reshape(self.n, 6), float(z[-1])

    def _pattern(self):
        n = self.n
        m = n - 1
        bi = np.arange(m)
        r = 3 + 6 * bi[:, None, None] + np.arange(6)[None, :, None]
        c = 6 * bi[:, None, None] + np.arange(12)[None, None, :]
        self.rows = np.broadcast_to(r, (m, 6, 12)).ravel()
        self.cols = np.broadcast_to(c, (m, 6, 12)).ravel()
        self.bc_rows = np.concatenate([np.arange(3), np.repeat(6 * n - 3 + np.arange(3), 6)])
        self.bc_cols = np.concatenate([np.array([1, 3, 5]), np.tile(6 * (n - 1) + np.arange(6), 3)])
        self.xb_rows = 3 + np.arange(6 * m)

    def residual(self, z):
        Y, x_b = self.unpack(z)
        _, _, _, _, res = _collocation_parts(self.mesh(x_b), Y, self.params)
        left = Y[0, [1, 3, 5]]
        right = self.bc_right @ (Y[-1] - self.rest)
        return np.concatenate([left, res.ravel(), right, [Y[self.k_c, 0]]])

    def jacobian(self, z):
        Y, x_b = self.unpack(z)
        h, F, ym, Fm, _ = _collocation_parts(self.mesh(x_b), Y, self.params)
        J = jacobian(Y, self.params)
        Jm = jacobian(ym, self.params)
        I = np.eye(6)
        h3 = h[:, :, None]
        A = -I - h3 / 6 * (J[:-1] + 4 * Jm @ (0.5 * I + h3 / 8 * J[:-1]))
        B = I - h3 / 6 * (J[1:] + 4 * Jm @ (0.5 * I - h3 / 8 * J[1:]))
        dres_dh = -(F[:-1] + 4 * Fm + F[1:]) / 6 - h / 6 * 4 * np.einsum("mij,mj->mi", Jm, (F[:-1] - F[1:]) / 8)
        col = (dres_dh * self.dh[:, None]).ravel()
        blocks = np.concatenate([A, B], axis=2)
        N6 = 6 * self.n
        data = np.concatenate([blocks.ravel(), np.ones(3), self.bc_right.ravel(), col, [1.0]])
        rows = np.concatenate([self.rows, self.bc_rows, self.xb_rows, [N6]])
        cols = np.concatenate([self.cols, self.bc_cols, np.full(len(col), N6), [6 * self.k_c]])
        return sp.csc_matrix((data, (rows, cols)), shape=(N6 + 1, N6 + 1))


def _newton(problem: _HalfProblem, z0, tol: float, maxiter: int = 60):
    """Damped Newton with the natural monotonicity test.

    A trial step is accepted when the simplified correction ``J^{-1} F(trial)``
    (same factorization) is shorter than the full Newton step, which is
    insensitive to the scaling of the residual rows.
    """
    z = np.array(z0, dtype=float)
    F = problem.residual(z)
    lam = 1.0
    for it in range(maxiter):
        if np.abs(F).max() < tol:
            return z, it
        try:
            lu = splu(problem.jacobian(z))
        except RuntimeError as exc:
            raise NewtonDiverged(f"singular Newton system: {exc}", float(np.abs(F).max())) from exc
        step = lu.solve(-F)
        if not np.all(np.isfinite(step)):
            raise NewtonDiverged("singular Newton system", float(np.abs(F).max()))
        size = np.linalg.norm(step)
        lam = min(1.0, 4.0 * lam)
        while True:
            z_new = z + lam * step
            F_new = problem.residual(z_new)
            if np.all(np.isfinite(F_new)):
                simplified = np.linalg.norm(lu.solve(-F_new))
                if simplified <= (1.0 - 0.25 * lam) * size or simplified < 1e-2 * tol:
                    break
            lam /= 2
            if lam < 1e-4:
                raise NewtonDiverged("damping factor underflow", float(np.abs(F).max()))
        z, F = z_new, F_new
        log.debug("newton it=%d damping=%.3g |F|=%.3e |dz|=%.3e", it, lam, np.abs(F).max(), size)
    if np.abs(F).max() < tol:
        return z, maxiter
    raise NewtonDiverged(f"no convergence in {maxiter} iterations", float(np.abs(F).max()))


def _seed(mesh, params: ModelParams, jump: JumpSolution) -> np.ndarray:
    orbit = build_singular_orbit(params, jump)
    center = jump.x_star / params.epsilon
    Y = orbit.evaluate(params.epsilon * mesh)
    U, P = heteroclinic_profile(mesh - center, "back")
    Y[:, 0], Y[:, 1] = U, P
    return Y


def _transport(mesh_old, Y_old, xb_old, eps_old, mesh_new, xb_new, eps_new, width):
    """Carry a half-line solution to a new eps.

    The back keeps its shape in fast time; the plateau and the tail keep theirs
    in slow time.
    """
    xi = np.empty_like(mesh_new)
    left = mesh_new < xb_new - width
    right = mesh_new > xb_new + width
    inner = ~left & ~right
    lo_old, lo_new = max(xb_old - width, 0.0), max(xb_new - width, 0.0)
    xi[left] = mesh_new[left] * (lo_old / lo_new if lo_new > 0 else 1.0)
    xi[inner] = mesh_new[inner] - xb_new + xb_old
    xi[right] = xb_old + width + (mesh_new[right] - xb_new - width) * eps_new / eps_old
    xi = np.clip(xi, 0.0, mesh_old[-1])
    return np.column_stack([np.interp(xi, mesh_old, Y_old[:, k]) for k in range(6)])


def _computational_mesh(L, center, N, h_fast, h_max, width):
    s = pulse_mesh(L, center, N, h_fast=h_fast, h_max=h_max, width=width)
    k_c = int(np.argmin(np.abs(s - center)))
    return s, k_c


def _mirror(mesh, Y):
    grid = np.concatenate([-mesh[:0:-1], mesh])
    values = np.concatenate([Y[:0:-1] * REVERSOR, Y])
    return grid, values


def solve_pulse(params: ModelParams, jump: JumpSolution, L: float | None = None, N: int | None = None, *,
                h_fast: float = 0.02, h_max: float = 4.0, tol: float = 1e-11,
                eps_start: float = 0.05, continuation_steps: int = 4) -> PulseProfile:
    """Solve for the eps > 0 standing pulse seeded by the singular orbit.

    ``L`` is the fast-time half width (default: long enough for the slow tail to
    settle below 1e-7), ``N`` the number of half-line nodes (default: from the
    mesh spacings).  A direct Newton solve at the target eps is tried first; on
    failure the solve is continued in eps from ``eps_start`` down in geometric steps.
    """
    params.require_positive_epsilon()
    if L is None:
        L = default_half_width(params, jump)
    if L < 2 * jump.x_star / params.epsilon + 10:
        raise InvalidParameters(f"L = {L} is shorter than 2 x*/eps + 10")
    width = 14.0
    center = jump.x_star / params.epsilon
    s, k_c = _computational_mesh(L, center, N, h_fast, h_max, width)
    problem = _HalfProblem(s, k_c, params)

    try:
        z, iters = _newton(problem, problem.pack(_seed(s, params, jump), s[k_c]), tol)
        path = [params.epsilon]
    except NewtonDiverged as direct_failure:
        log.info("direct solve failed (%s); continuing in eps", direct_failure)
        if eps_start <= params.epsilon:
            raise
        epss = np.geomspace(eps_start, params.epsilon, continuation_steps + 1)
        prev = None
        for eps in epss:
            p = params.replace(epsilon=float(eps))
            if eps == params.epsilon:
                prob_k = problem
            else:
                L_k = max(L * params.epsilon / eps, 2 * jump.x_star / eps + 40)
                s_k, kc_k = _computational_mesh(L_k, jump.x_star / eps, None, h_fast, h_max, width)
                prob_k = _HalfProblem(s_k, kc_k, p)
            if prev is None:
                guess = prob_k.pack(_seed(prob_k.s, p, jump), prob_k.s_c)
            else:
                prob_old, z_old, eps_old = prev
                Y_old, xb_old = prob_old.unpack(z_old)
                xb_new = xb_old * eps_old / eps
                mesh_new = prob_k.mesh(xb_new)
                Y_new = _transport(prob_old.mesh(xb_old), Y_old, xb_old, eps_old, mesh_new, xb_new, eps, width)
                guess = prob_k.pack(Y_new, xb_new)
            z_k, iters = _newton(prob_k, guess, tol)
            prev = (prob_k, z_k, float(eps))
        z = prev[1]
        path = [float(e) for e in epss]

    Y, x_b = problem.unpack(z)
    mesh = problem.mesh(x_b)
    defect = _collocation_defect(mesh, Y, params)
    if defect > 1e-8:
        raise MeshTooCoarse(f"collocation defect {defect:.3e} stagnates above 1e-8")
    grid, values = _mirror(mesh, Y)
    profile = PulseProfile(grid, values, params, jump, len(mesh) - 1, defect,
                           meta={"newton_iterations": iters, "eps_path": path, "h_fast": h_fast, "h_max": h_max,
                                 "back_position": x_b})
    return profile


def skeleton_distance(profile: PulseProfile, refine: int = 8, samples: int = 4001) -> float:
    """Hausdorff distance between the ``(U, P)`` projection of the pulse and the eps = 0 skeleton.

    In that projection the skeleton is the pair of heteroclinic arcs
    ``P = +-(1 - U^2) / sqrt(2)``; the slow segments collapse onto their ends.
    The pulse is resampled ``refine`` times per grid interval so the mesh
    spacing does not bound the distance from below.
    """
    g = profile.grid
    t = np.linspace(0.0, 1.0, refine, endpoint=False)
    xi = np.append((g[:-1, None] + np.diff(g)[:, None] * t).ravel(), g[-1])
    pts = profile._spline(xi)[:, :2]
    U = np.linspace(-1.0, 1.0, samples)
    P = (1.0 - U**2) / math.sqrt(2.0)
    skel = np.vstack([np.column_stack([U, P]), np.column_stack([U, -P])])
    d_pulse = cKDTree(skel).query(pts)[0].max()
    d_skel = cKDTree(pts).query(skel)[0].max()
    return float(max(d_pulse, d_skel))

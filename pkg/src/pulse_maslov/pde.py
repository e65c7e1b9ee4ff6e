"""Direct time integration of the three-component reaction-diffusion system.

Crank-Nicolson for diffusion, forward Euler for reaction, Neumann ends, on a
nonuniform slow grid.  The first steps are backward-Euler half steps, which
damps the grid-scale modes that Crank-Nicolson alone would leave ringing.
"""
from __future__ import annotations

import io
import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import Blowup, CFLViolation
from .model import ModelParams, fixed_point
from .pulse import PulseProfile
from .spectrum import default_half_width, slow_grid

__all__ = [
    "SimState",
    "Trajectory",
    "neumann_laplacian",
    "max_stable_dt",
    "state_from_profile",
    "rest_state",
    "perturb_noise",
    "perturb_mode",
    "evolve",
    "deviation",
    "growth_rate",
    "pde_grid",
]


@dataclass
class SimState:
    x: np.ndarray
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    t: float
    params: ModelParams

    def copy(self, **changes) -> "SimState":
        data = dict(x=self.x, U=self.U.copy(), V=self.V.copy(), W=self.W.copy(), t=self.t, params=self.params)
        data.update(changes)
        return SimState(**data)

    @property
    def fields(self) -> np.ndarray:
        return np.column_stack([self.U, self.V, self.W])

    def mass(self) -> float:
        """Trapezoidal integral of ``|U|``."""
        return float(np.trapezoid(np.abs(self.U), self.x))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(("x", "U", "V", "W"))
        for row in zip(self.x, self.U, self.V, self.W):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


@dataclass
class Trajectory:
    states: list
    dt: float
    steps: int
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> SimState:
        return self.states[-1]

    def deviations(self, profile: PulseProfile) -> np.ndarray:
        return np.array([deviation(s, profile) for s in self.states])

    def deviation_csv(self, profile: PulseProfile) -> str:
        lines = ["t,deviation"] + [f"{t!r},{d!r}" for t, d in zip(self.times.tolist(), self.deviations(profile).tolist())]
        return "\r\n".join(lines) + "\r\n"


def pde_grid(profile: PulseProfile, N: int = 12800, half_width: float | None = None,
             front_fraction: float = 0.2) -> np.ndarray:
    """Front-refined slow grid of the same family as the point-spectrum grid.

    A smaller share of nodes sits in the front layers than for the eigenvalue
    problem: the slow plateau error feeds the pulse-width mode, whose decay rate
    is only O(eps^2), so it shows up as a drift in the deviation.  For the same
    reason the default ``N`` is large: the O(h^2) offset between the discrete and
    the continuum equilibrium is amplified by ``1 / |lambda_slow|``.
    """
    eps = profile.params.epsilon
    H = default_half_width(profile) if half_width is None else half_width
    xf = eps * abs(profile.front_midpoint)
    return slow_grid(N, H, fronts=(-xf, xf), width=2.0 * eps, front_fraction=front_fraction)


def neumann_laplacian(x: np.ndarray) -> sp.csr_matrix:
    """Three-point ``d^2/dx^2`` with reflecting ghost nodes at both ends."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    h = np.diff(x)
    lo = np.zeros(n - 1)
    di = np.zeros(n)
    up = np.zeros(n - 1)
    hm, hp = h[:-1], h[1:]
    lo[:-1] = 2.0 / (hm * (hm + hp))
    di[1:-1] = -2.0 / (hm * hp)
    up[1:] = 2.0 / (hp * (hm + hp))
    di[0], up[0] = -2.0 / h[0] ** 2, 2.0 / h[0] ** 2
    di[-1], lo[-1] = -2.0 / h[-1] ** 2, 2.0 / h[-1] ** 2
    return sp.diags([lo, di, up], [-1, 0, 1], format="csc")


def max_stable_dt(U: np.ndarray, safety: float = 0.2) -> float:
    """Explicit-reaction bound ``safety / max |1 - 3 U^2|``."""
    return safety / float(np.abs(1.0 - 3.0 * np.asarray(U) ** 2).max())


def rest_state(x: np.ndarray, params: ModelParams) -> SimState:
    X = fixed_point(params)
    n = len(x)
    return SimState(np.asarray(x, float), np.full(n, X.U), np.full(n, X.V), np.full(n, X.W), 0.0, params)


def state_from_profile(profile: PulseProfile, x: np.ndarray | None = None, shift: float = 0.0) -> SimState:
    """Sample ``phi(x + shift)`` on ``x`` (default: ``pde_grid``)."""
    x = pde_grid(profile) if x is None else np.asarray(x, dtype=float)
    y = profile.evaluate_slow(x + shift)
    return SimState(x, y[:, 0].copy(), y[:, 2].copy(), y[:, 4].copy(), 0.0, profile.params)


def perturb_noise(state: SimState, amplitude: float = 1e-3, seed: int = 42) -> SimState:
    rng = np.random.default_rng(seed)
    n = len(state.x)
    dU, dV, dW = rng.uniform(-amplitude, amplitude, size=(3, n))
    return state.copy(U=state.U + dU, V=state.V + dV, W=state.W + dW)


def perturb_mode(state: SimState, mode: np.ndarray, amplitude: float = 1e-3) -> SimState:
    """Add ``mode`` (``(n, 3)`` on ``state.x``, or interior nodes only) scaled to sup norm ``amplitude``.

    The sign (or phase) is fixed by making the largest entry positive.
    """
    mode = np.asarray(mode)
    k = np.unravel_index(np.argmax(np.abs(mode)), mode.shape)
    mode = (mode * np.exp(-1j * np.angle(mode[k]))).real if np.iscomplexobj(mode) else mode * np.sign(mode[k])
    if mode.shape[0] == len(state.x) - 2:
        mode = np.vstack([np.zeros(3), mode, np.zeros(3)])
    mode = amplitude * mode / np.abs(mode).max()
    return state.copy(U=state.U + mode[:, 0], V=state.V + mode[:, 1], W=state.W + mode[:, 2])


def _reaction(U, V, W, p: ModelParams):
    return (U - U**3 - p.epsilon * (p.alpha * V + p.beta * W + p.gamma), U - V, U - W)


def evolve(initial: SimState, T_final: float, dt: float | None = None, *, save_every: float = 1.0,
           rannacher: int = 4, safety: float = 0.2, check: bool = True) -> Trajectory:
    """IMEX time stepping from ``initial.t`` to ``initial.t + T_final``.

    Snapshots are stored every ``save_every`` time units (and at the end).
    ``dt`` defaults to the reaction bound ``safety / max|1 - 3U^2|`` (at most 0.1).
    """
    p = initial.params
    x = initial.x
    bound = max_stable_dt(initial.U, safety) if check else np.inf
    if dt is None:
        dt = min(0.1, bound)
    if check and dt > bound * (1 + 1e-12):
        raise CFLViolation(f"dt = {dt:g} exceeds the reaction bound {bound:g}")
    n_saves = T_final / save_every
    if save_every > 0 and abs(n_saves - round(n_saves)) < 1e-9 and round(n_saves) > 0:
        # whole number of steps per snapshot, so snapshot times are exact multiples
        per_save = int(np.ceil(save_every / dt - 1e-9))
        n_steps = per_save * int(round(n_saves))
    else:
        n_steps = int(np.ceil(T_final / dt - 1e-9))
    dt = T_final / n_steps if n_steps else dt

    Lap = neumann_laplacian(x)
    I = sp.identity(len(x), format="csc")
    diff = (p.epsilon**2, 1.0, p.D**2)
    mass = (1.0, p.tau, p.theta)

    def factors(k, theta):
        # (m/k - theta d Lap) y_new = (m/k + (1 - theta) d Lap) y + f
        lhs = [spla.splu((m / k * I - theta * d * Lap).tocsc()) for d, m in zip(diff, mass)]
        rhs = [(m / k * I + (1 - theta) * d * Lap).tocsr() for d, m in zip(diff, mass)]
        return lhs, rhs

    cn = factors(dt, 0.5)
    be = factors(dt / 2, 1.0) if rannacher else None

    Y = [initial.U.copy(), initial.V.copy(), initial.W.copy()]
    t = initial.t
    states = [initial.copy()]
    next_save = t + save_every
    substeps = 0

    def advance(Y, k, fac):
        lhs, rhs = fac
        f = _reaction(*Y, p)
        return [lu.solve(R @ y + fi) for lu, R, y, fi in zip(lhs, rhs, Y, f)]

    for step in range(n_steps):
        if rannacher and step < (rannacher + 1) // 2:
            Y = advance(Y, dt / 2, be)
            Y = advance(Y, dt / 2, be)
        else:
            Y = advance(Y, dt, cn)
        t = initial.t + (step + 1) * dt
        substeps += 1
        if not all(np.all(np.isfinite(y)) for y in Y) or np.abs(Y[0]).max() > 10:
            raise Blowup(f"sup |U| exceeded 10 at t = {t:.6g}")
        if t >= next_save - 1e-9 * max(1.0, abs(t)) or step == n_steps - 1:
            states.append(SimState(x, Y[0].copy(), Y[1].copy(), Y[2].copy(), t, p))
            next_save += save_every
    return Trajectory(states, dt, substeps, {"rannacher": rannacher, "bound": bound})


def _sup_diff(state: SimState, profile: PulseProfile, k: float) -> float:
    y = profile.evaluate_slow(state.x + k)
    return float(max(np.abs(state.U - y[:, 0]).max(), np.abs(state.V - y[:, 2]).max(),
                     np.abs(state.W - y[:, 4]).max()))


def _front_shift(state: SimState) -> float | None:
    U = state.U
    s = np.flatnonzero(np.sign(U[:-1]) * np.sign(U[1:]) < 0)
    if len(s) < 2:
        return None
    roots = []
    for i in (s[0], s[-1]):
        roots.append(state.x[i] - U[i] * (state.x[i + 1] - state.x[i]) / (U[i + 1] - U[i]))
    return -0.5 * (roots[0] + roots[1])


def deviation(state: SimState, profile: PulseProfile, *, return_shift: bool = False, xatol: float = 1e-12):
    """``min_k sup |psi(x) - phi(x + k)|`` over the three components.

    The shift is bracketed from the midpoint of the outermost ``U = 0`` crossings
    (or a coarse scan across the grid if the state has no fronts) and polished
    with golden-section search.
    """
    eps = profile.params.epsilon
    k0 = _front_shift(state)
    if k0 is None:
        span = state.x[-1] - state.x[0]
        ks = np.linspace(-span / 2, span / 2, 2001)
        k0 = float(ks[np.argmin([_sup_diff(state, profile, k) for k in ks])])
        half = span / 2000
    else:
        half = 5.0 * eps
    ks = np.linspace(k0 - half, k0 + half, 41)
    vals = [_sup_diff(state, profile, k) for k in ks]
    j = int(np.argmin(vals))
    lo, hi = ks[max(j - 1, 0)], ks[min(j + 1, len(ks) - 1)]
    best_k, best = _golden(lambda k: _sup_diff(state, profile, k), lo, hi, xatol)
    if vals[j] < best:
        best_k, best = ks[j], vals[j]
    return (float(best), float(best_k)) if return_shift else float(best)


def _golden(f, a: float, b: float, xatol: float):
    """Golden-section search for a unimodal ``f`` on ``[a, b]``; absolute tolerance only."""
    g = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xatol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
        if d <= c:
            break
    return (c, fc) if fc <= fd else (d, fd)


def growth_rate(times, deviations, window=(20.0, 60.0)) -> float:
    """Least-squares slope of ``log deviation`` over the time window."""
    t = np.asarray(times, dtype=float)
    d = np.asarray(deviations, dtype=float)
    m = (t >= window[0]) & (t <= window[1]) & (d > 0)
    if m.sum() < 2:
        raise ValueError("fewer than two samples in the fitting window")
    return float(np.polyfit(t[m], np.log(d[m]), 1)[0])

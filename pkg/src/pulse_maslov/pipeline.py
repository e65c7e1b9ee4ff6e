"""End-to-end cross-validation for one parameter set.

Pulse, Maslov index, point spectrum and (optionally) a direct simulation of the
PDE, collected in one result object.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import pde
from .exceptions import InvalidParameters, NoRootNearMinusOne
from .maslov import MaslovReport, maslov_index
from .model import ModelParams
from .pulse import PulseProfile, solve_pulse
from .singular_limit import criterion_margin, stability_criterion
from .singular_orbit import JumpSolution, solve_jump_condition
from .spectrum import CountValidation, SpectrumReport, point_spectrum, validate_counts

__all__ = ["PDECheck", "PipelineResult", "select_root", "pde_check", "run_pipeline"]

STABLE_TOL = 1e-3
GROWTH_RTOL = 0.2


def select_root(params: ModelParams, root_index: int = 1) -> JumpSolution:
    """The ``root_index``-th (1-based, ascending) jump-off root."""
    roots = solve_jump_condition(params)
    if not roots:
        raise NoRootNearMinusOne("no jump-off root: the pulse does not exist for these parameters")
    if not 1 <= root_index <= len(roots):
        raise InvalidParameters(f"root index {root_index} out of range (found {len(roots)} roots)")
    return roots[root_index - 1]


@dataclass
class PDECheck:
    kind: str  # "decay" | "growth"
    passed: bool
    initial_deviation: float
    final_deviation: float
    T_final: float
    growth_rate: float | None = None
    eigenvalue: float | None = None
    grid_eigenvalue: float | None = None
    series: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "passed": self.passed,
            "initial_deviation": self.initial_deviation,
            "final_deviation": self.final_deviation,
            "T_final": self.T_final,
        }
        if self.kind == "growth":
            d.update(growth_rate=self.growth_rate, eigenvalue=self.eigenvalue,
                     grid_eigenvalue=self.grid_eigenvalue,
                     relative_error=self.growth_rate / self.eigenvalue - 1)
        return d

    def series_csv(self) -> str:
        lines = ["t,deviation"] + [f"{t!r},{d!r}" for t, d in self.series]
        return "\r\n".join(lines) + "\r\n"


def pde_check(profile: PulseProfile, spectrum: SpectrumReport, *, N: int = 12800, T_final: float = 200.0,
              amplitude: float = 1e-3, seed: int = 42, window=(20.0, 60.0)) -> PDECheck:
    """Perturb the pulse and evolve.

    Without unstable eigenvalues the perturbation is uniform noise and the check
    is ``deviation(T_final) < 1e-3``.  Otherwise it is the leading unstable
    eigenfunction (recomputed on the simulation grid) and the check is that the
    fitted growth rate matches the reported eigenvalue within 20 %.
    """
    x = pde.pde_grid(profile, N)
    base = pde.state_from_profile(profile, x)
    if spectrum.unstable_count == 0:
        start = pde.perturb_noise(base, amplitude, seed)
        traj = pde.evolve(start, T_final, save_every=T_final / 10)
        devs = traj.deviations(profile)
        return PDECheck("decay", bool(devs[-1] < STABLE_TOL), float(devs[0]), float(devs[-1]), T_final,
                        series=tuple(zip(traj.times.tolist(), devs.tolist())))

    lam = float(spectrum.unstable_eigenvalues.real.max())
    fine = point_spectrum(profile, grid=x, count=4, method="sparse")
    lead = int(np.argmax(fine.eigenvalues.real))
    start = pde.perturb_mode(base, fine.eigenfunction(lead), amplitude)
    traj = pde.evolve(start, T_final, save_every=2.0)
    times = traj.times
    keep = [i for i, t in enumerate(times) if t <= window[1] + 1e-9 or i == len(times) - 1]
    devs = np.array([pde.deviation(traj.states[i], profile) for i in keep])
    rate = pde.growth_rate(times[keep], devs, window)
    return PDECheck("growth", bool(abs(rate / lam - 1) <= GROWTH_RTOL), float(devs[0]), float(devs[-1]), T_final,
                    growth_rate=rate, eigenvalue=lam, grid_eigenvalue=float(fine.eigenvalues[lead].real),
                    series=tuple(zip(times[keep].tolist(), devs.tolist())))


@dataclass
class PipelineResult:
    params: ModelParams
    jump: JumpSolution
    margin: float
    verdict: str
    profile: PulseProfile = field(repr=False)
    maslov: MaslovReport = field(repr=False)
    spectrum: SpectrumReport | None = field(default=None, repr=False)
    validation: CountValidation | None = None
    pde: PDECheck | None = None
    timings: dict = field(default_factory=dict)

    @property
    def maslov_verdict(self) -> str:
        return "stable" if self.maslov.total_index == 0 else "unstable"

    @property
    def checks(self) -> dict:
        """Named pass/fail flags of the cross-validation."""
        out = {
            "maslov_vs_criterion": self.maslov_verdict == self.verdict,
            "maslov_vs_singular_limit": bool(self.maslov.agreement),
        }
        if self.validation is not None:
            out["maslov_vs_spectrum"] = self.validation.passed
        if self.pde is not None:
            out["pde"] = self.pde.passed
        return out

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self, timings: bool = False) -> dict:
        d = {
            "params": self.params.to_config_dict(),
            "x_star": self.jump.x_star,
            "root_index": self.jump.root_index,
            "margin": self.margin,
            "criterion_verdict": self.verdict,
            "maslov_index": self.maslov.total_index,
            "interior_signatures": [p.signature for p in self.maslov.interior_points],
            "unstable_count": None if self.spectrum is None else self.spectrum.unstable_count,
            "pde": None if self.pde is None else self.pde.to_dict(),
            "checks": self.checks,
            "verdict": "pass" if self.passed else "fail",
        }
        if timings:
            d["timings"] = self.timings
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def run_pipeline(params: ModelParams, root_index: int = 1, *, L: float | None = None, N: int | None = None,
                 N_x: int = 800, L_x: float | None = None, spectrum: bool = True, simulate: bool = False,
                 pde_N: int = 12800, T_final: float = 200.0, seed: int = 42) -> PipelineResult:
    params.require_positive_epsilon()
    jump = select_root(params, root_index)
    verdict = stability_criterion(params, jump).verdict
    timings = {}
    t0 = time.perf_counter()
    profile = solve_pulse(params, jump, L, N)
    t1 = time.perf_counter()
    mas = maslov_index(profile)
    t2 = time.perf_counter()
    timings.update(pulse=t1 - t0, maslov=t2 - t1)
    spec = val = check = None
    if spectrum or simulate:
        spec = point_spectrum(profile, N_x, L_x)
        val = validate_counts(mas, spec)
        t3 = time.perf_counter()
        timings["spectrum"] = t3 - t2
        if simulate:
            check = pde_check(profile, spec, N=pde_N, T_final=T_final, seed=seed)
            timings["pde"] = time.perf_counter() - t3
    return PipelineResult(params, jump, criterion_margin(params, jump), verdict, profile, mas, spec, val, check,
                          timings)

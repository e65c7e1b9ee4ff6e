"""Command-line front end.

Every subcommand writes its artifacts into ``--out`` (created if missing) and a
short summary to standard output.  Bad arguments exit with status 2, numerical
failures with status 1; in both cases an error JSON goes to standard error.
"""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from .exceptions import InvalidParameters, PulseMaslovError
from .model import _CONFIG_KEYS, ModelParams

__all__ = ["main", "build_parser", "load_settings"]

log = logging.getLogger(__name__)

COMMANDS = ("exist", "orbit", "pulse", "maslov", "spectrum", "evolve", "scan", "report")
PARAM_FLAGS = ("alpha", "beta", "gamma", "dd", "epsilon", "tau", "theta")
# config-file keys for run settings, mapped to argparse destinations
RUN_KEYS = {"root-index": "root_index", "root_index": "root_index", "L": "L", "N": "N", "Nx": "Nx",
            "Lx": "Lx", "seed": "seed", "T": "T", "jobs": "jobs", "sample": "sample"}
_NEG_VALUE = re.compile(r"^-[0-9.]")


class UsageError(Exception):
    """Invalid command-line input detected after parsing."""


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model parameters")
    for name, dflt in (("alpha", 2), ("beta", 1), ("gamma", 1)):
        g.add_argument(f"--{name}", default=None, help=f"{name} (default {dflt})")
    g.add_argument("--dd", default=None, help="inhibitor diffusion ratio D > 1 (default 5)")
    g.add_argument("--epsilon", default=None, help="scale separation (default 0.01)")
    g.add_argument("--tau", default=None, help="V time constant (default 1)")
    g.add_argument("--theta", default=None, help="W time constant (default 1)")
    r = common.add_argument_group("run settings")
    r.add_argument("--config", type=Path, help="key = value file; flags override it")
    r.add_argument("--root-index", type=int, default=None, help="1-based jump-off root (default 1)")
    r.add_argument("--L", type=float, default=None, help="fast half width of the pulse domain")
    r.add_argument("--N", type=int, default=None, help="pulse mesh nodes on the half line")
    r.add_argument("--Nx", type=int, default=None, help="slow grid nodes for the spectrum (default 800)")
    r.add_argument("--Lx", type=float, default=None, help="slow half width for the spectrum")
    r.add_argument("--seed", type=int, default=None, help="random seed (default 42)")
    r.add_argument("--out", type=Path, default=None, help="output directory (default: current; exist writes "
                   "nothing unless given)")
    r.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="pulse-maslov", description="Standing pulses, their Maslov index and "
                                     "stability checks for a three-component reaction-diffusion system.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("exist", parents=[common], help="jump-off roots and criterion margins")
    sub.add_parser("orbit", parents=[common], help="singular orbit (CSV + JSON)")
    sub.add_parser("pulse", parents=[common], help="standing pulse (CSV + JSON)")
    sub.add_parser("maslov", parents=[common], help="Maslov index report (JSON)")
    sp = sub.add_parser("spectrum", parents=[common], help="point spectrum report (JSON, eigenfunction CSV)")
    sp.add_argument("--count", type=int, default=10, help="number of rightmost eigenvalues")
    ev = sub.add_parser("evolve", parents=[common], help="simulate a perturbed pulse (deviation CSV)")
    ev.add_argument("--T", type=float, default=None, help="final time (default 200)")
    ev.add_argument("--perturb", choices=("noise", "mode"), default="noise",
                    help="uniform noise or the leading eigenfunction")
    ev.add_argument("--amplitude", type=float, default=1e-3)
    ev.add_argument("--pde-N", type=int, default=12800, help="simulation grid nodes")
    sc = sub.add_parser("scan", parents=[common], help="criterion map over an (alpha, beta) grid")
    sc.add_argument("--full", action="store_true", help="run the Maslov/spectrum pipeline per cell")
    sc.add_argument("--sample", type=int, default=None,
                    help="with --full: only this many boundary-adjacent cells")
    sc.add_argument("--jobs", type=int, default=None, help="worker processes (default 1)")
    rp = sub.add_parser("report", parents=[common], help="Maslov vs spectrum vs PDE for one parameter set")
    rp.add_argument("--T", type=float, default=None, help="final simulation time (default 200)")
    rp.add_argument("--pde-N", type=int, default=12800, help="simulation grid nodes")
    return parser


def _preprocess(argv: list) -> list:
    """Glue negative values such as ``-6:2:33`` to their flag so argparse accepts them."""
    out = []
    for tok in argv:
        if out and _NEG_VALUE.match(tok) and out[-1].startswith("--") and "=" not in out[-1]:
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def _parse_number(name: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"--{name} expects a number, got {text!r}") from None


def load_settings(args: argparse.Namespace) -> tuple[dict, dict]:
    """Merge the config file with the flags; returns ``(param_values, run_settings)``."""
    params, run = {}, {}
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in _CONFIG_KEYS:
                params[key] = value
            elif key in RUN_KEYS:
                run[RUN_KEYS[key]] = value
            else:
                raise UsageError(f"config line {lineno}: unknown key {key!r}")
    for name in PARAM_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            params[name] = value
    for dest in set(RUN_KEYS.values()):
        value = getattr(args, dest, None)
        if value is not None:
            run[dest] = value
    run.setdefault("root_index", 1)
    run.setdefault("seed", 42)
    run.setdefault("T", 200.0)
    run.setdefault("jobs", 1)
    try:
        for key in ("root_index", "N", "Nx", "seed", "jobs", "sample"):
            if key in run:
                run[key] = int(run[key])
        for key in ("L", "Lx", "T"):
            if key in run:
                run[key] = float(run[key])
    except ValueError as exc:
        raise UsageError(f"bad run setting: {exc}") from None
    return params, run


def _model(values: dict, **override) -> ModelParams:
    data = {k: _parse_number(k, str(v)) for k, v in values.items()}
    data.update(override)
    return ModelParams.from_dict(data)


def _write(out: Path | None, name: str, text: str) -> str:
    out = Path(".") if out is None else out
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return str(path)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# --- commands ------------------------------------------------------------------

def cmd_exist(args, values, run):
    from .singular_limit import stability_criterion
    from .singular_orbit import solve_jump_condition

    p = _model(values)
    roots = solve_jump_condition(p)
    records = []
    for j in roots:
        v = stability_criterion(p, j)
        records.append({"root_index": j.root_index, "x_star": j.x_star, "margin": v.margin, "verdict": v.verdict})
        print(f"root {j.root_index}: x* = {j.x_star:.10g}  margin = {v.margin:.10g}  verdict = {v.verdict}")
    if not roots:
        print("no pulse")
    if args.out is not None:
        _write(args.out, "exist.json", _json({"params": p.to_config_dict(), "roots": records}))
    return 0


def _profile(values, run):
    from .pipeline import select_root
    from .pulse import solve_pulse

    p = _model(values)
    p.require_positive_epsilon()
    jump = select_root(p, run["root_index"])
    return solve_pulse(p, jump, run.get("L"), run.get("N"))


def cmd_orbit(args, values, run):
    from .pipeline import select_root
    from .singular_orbit import build_singular_orbit

    p = _model(values)
    orbit = build_singular_orbit(p, select_root(p, run["root_index"]))
    xs = orbit.jump.x_star
    x = np.linspace(-xs - 12 * p.D, xs + 12 * p.D, 2001)
    y = orbit.evaluate(x)
    lines = ["x,U,P,V,Q,W,R"] + [",".join(repr(float(v)) for v in (xi, *row)) for xi, row in zip(x, y)]
    files = [_write(args.out, "orbit.csv", "\r\n".join(lines) + "\r\n"),
             _write(args.out, "orbit.json", orbit.to_json() + "\n")]
    print(f"x* = {xs:.10g}; wrote {', '.join(files)}")
    return 0


def cmd_pulse(args, values, run):
    prof = _profile(values, run)
    files = [_write(args.out, "pulse.csv", prof.to_csv()), _write(args.out, "pulse.json", prof.to_json() + "\n")]
    print(f"x* = {prof.jump.x_star:.10g}  L = {prof.L:g}  nodes = {prof.N}  residual = {prof.residual:.3e}; "
          f"wrote {', '.join(files)}")
    return 0


def cmd_maslov(args, values, run):
    from .maslov import maslov_index

    rep = maslov_index(_profile(values, run))
    path = _write(args.out, "maslov.json", rep.to_json() + "\n")
    sigs = [p.signature for p in rep.interior_points]
    print(f"Maslov index = {rep.total_index}  interior signatures = {sigs}  agreement = {rep.agreement}; wrote {path}")
    return 0


def cmd_spectrum(args, values, run):
    from .spectrum import point_spectrum

    rep = point_spectrum(_profile(values, run), run.get("Nx", 800), run.get("Lx"), args.count)
    files = [_write(args.out, "spectrum.json", rep.to_json() + "\n"),
             _write(args.out, "eigenfunctions.csv", rep.eigenfunctions_csv())]
    print(f"unstable count = {rep.unstable_count}  translation = {rep.translation_eigenvalue.real:.3e}  "
          f"essential edge = {rep.essential_edge:.4g}; wrote {', '.join(files)}")
    return 0


def cmd_evolve(args, values, run):
    from . import pde
    from .spectrum import point_spectrum

    prof = _profile(values, run)
    x = pde.pde_grid(prof, args.pde_N)
    base = pde.state_from_profile(prof, x)
    if args.perturb == "noise":
        start = pde.perturb_noise(base, args.amplitude, run["seed"])
    else:
        spec = point_spectrum(prof, grid=x, count=4, method="sparse")
        start = pde.perturb_mode(base, spec.eigenfunction(int(np.argmax(spec.eigenvalues.real))), args.amplitude)
    traj = pde.evolve(start, run["T"], save_every=1.0)
    devs = traj.deviations(prof)
    lines = ["t,deviation,mass"] + [f"{s.t!r},{d!r},{s.mass()!r}" for s, d in zip(traj.states, devs.tolist())]
    files = [_write(args.out, "deviation.csv", "\r\n".join(lines) + "\r\n"),
             _write(args.out, "final_state.csv", traj.final.to_csv())]
    print(f"deviation {devs[0]:.3e} -> {devs[-1]:.3e} at t = {traj.final.t:g}; wrote {', '.join(files)}")
    return 0


def cmd_scan(args, values, run):
    from .scan import parse_range, render_svg, run_scan

    ranges = {}
    for name in ("alpha", "beta"):
        text = str(values.pop(name, None) or {"alpha": "-6:2:33", "beta": "-2:6:33"}[name])
        try:
            ranges[name] = parse_range(text)
        except InvalidParameters as exc:
            raise UsageError(str(exc)) from None
    base = _model(values, alpha=1.0, beta=1.0)
    if run.get("sample") is not None and not args.full:
        raise UsageError("--sample requires --full")
    res = run_scan(base, ranges["alpha"], ranges["beta"], full=args.full, sample=run.get("sample"),
                   seed=run["seed"], jobs=run["jobs"])
    files = [_write(args.out, "scan.csv", res.to_csv()), _write(args.out, "scan.svg", render_svg(res)),
             _write(args.out, "scan.json", res.to_json() + "\n")]
    s = res.summary()
    print(f"{s['shape'][0]}x{s['shape'][1]} cells  {s['counts']}; wrote {', '.join(files)}")
    if args.full:
        print(f"pipeline agreement {s['pipeline_agreement']}/{s['pipeline_checked']} "
              f"(failed {s['pipeline_failed']})")
    return 0


def cmd_report(args, values, run):
    from .pipeline import run_pipeline

    p = _model(values)
    res = run_pipeline(p, run["root_index"], L=run.get("L"), N=run.get("N"), N_x=run.get("Nx", 800),
                       L_x=run.get("Lx"), simulate=True, pde_N=args.pde_N, T_final=run["T"], seed=run["seed"])
    files = [_write(args.out, "report.json", res.to_json() + "\n"),
             _write(args.out, "report_deviation.csv", res.pde.series_csv())]
    for name, ok in res.checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"{'PASS' if res.passed else 'FAIL'}  overall (Maslov index {res.maslov.total_index}, "
          f"unstable count {res.spectrum.unstable_count}); wrote {', '.join(files)}")
    return 0


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def _error(exc: BaseException, code: str) -> None:
    payload = exc.to_dict() if isinstance(exc, PulseMaslovError) else {
        "error": type(exc).__name__, "code": code, "message": str(exc)}
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def main(argv=None) -> int:
    argv = _preprocess(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        values, run = load_settings(args)
        return HANDLERS[args.command](args, values, run)
    except (UsageError, InvalidParameters) as exc:
        _error(exc, "usage")
        return 2
    except PulseMaslovError as exc:
        _error(exc, exc.code)
        return 1
    except (ArithmeticError, ValueError, np.linalg.LinAlgError, RuntimeError) as exc:
        _error(exc, "numerical")
        return 1


if __name__ == "__main__":
    sys.exit(main())

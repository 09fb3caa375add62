"""Command-line front end: ``apes <subcommand> [flags]``.

Exit codes: 0 success, 1 a verification check failed, 2 invalid input,
3 blow-up, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as apes_io
from .dynamics import BlowUpError, run
from .monitors import fit_growth_rate
from .state import ConstraintError, Params

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_VALIDATION = 2
EXIT_BLOWUP = 3
EXIT_IO = 4


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


# ---------------------------------------------------------------------------
# Parameters from config file and flags
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--resolution", nargs=3, type=int, metavar=("NX", "NY", "NZ"))
    p.add_argument("--epsilon", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-final", type=float, dest="t_final")
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir", default="apes_out", dest="output_dir")
    p.add_argument("--monitor-stride", type=int, dest="monitor_stride")
    p.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    p.add_argument("--q-list", dest="q_list", help="comma separated exponents, e.g. 4,8,16,32")


def params_from_args(args, base: dict | None = None) -> Params:
    """Defaults, then ``base``, then the config file, then command-line flags."""
    values = dict(base or {})
    if getattr(args, "config", None):
        values.update(apes_io.load_config(args.config))
    if args.resolution:
        values["nx"], values["ny"], values["nz"] = args.resolution
    for key in ("epsilon", "dt", "t_final", "seed", "monitor_stride", "checkpoint_every"):
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    if getattr(args, "q_list", None):
        values["q_list"] = apes_io.parse_config_text(f"q_list = {args.q_list}")["q_list"]
    if "q_list" in values:
        values["q_list"] = tuple(values["q_list"])
    return Params(**values)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    params = params_from_args(args)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": params.to_dict(),
        "code_version": __version__,
        "seed": params.seed,
        "start_time": _now(),
    }
    status, code, result = "ok", EXIT_OK, None
    try:
        result = run(params, output_dir=out, track_energy=True, resume=args.resume)
    except BlowUpError as exc:
        status, code, result = "blowup", EXIT_BLOWUP, exc.result
        print(f"apes: blow-up at t = {exc.t:.6g}: {exc}", file=sys.stderr)
    files = list(result.files) if result is not None else []
    if result is not None and status == "ok":
        final = out / "final.apes"
        apes_io.write_snapshot(final, result.state)
        files.append(final)
    fitted = {"c": None, "C_scheme": None}
    if result is not None and result.records:
        t = np.array([r.t for r in result.records])
        e = np.array([r.l2_vT for r in result.records])
        fitted["c"] = fit_growth_rate(t, e) if t.size > 1 and e[0] > 0 else None
    if result is not None and result.energy_imbalance:
        fitted["C_scheme"] = float(np.max(np.abs(result.energy_imbalance))) / params.dt**2
    manifest.update(end_time=_now(), status=status, fitted_constants=fitted)
    apes_io.write_manifest(out / "manifest.json", manifest, files)
    if code == EXIT_OK:
        print(f"apes: {params.n_steps} steps, t = {result.state.t:.6g}, output in {out}")
    return code


def cmd_check_inequalities(args) -> int:
    from .inequalities import EXPLICIT, NAMES, check_inequality, random_fields

    names = args.names.split(",") if args.names else list(NAMES)
    for n in names:
        if n not in NAMES:
            raise ValueError(f"unknown inequality {n!r}; expected one of {NAMES}")
    rows, failed = [], []
    for name in names:
        worst = 0.0
        for i in range(args.count):
            seed = args.seed + i
            rng = np.random.default_rng(seed)
            case = check_inequality(name, random_fields(name, rng, args.K, args.M, args.slope))
            rows.append([name, seed, apes_io.format_float(case.lhs),
                         apes_io.format_float(case.rhs_structural), apes_io.format_float(case.ratio)])
            worst = max(worst, case.ratio)
        if name in EXPLICIT and worst > 1 + 1e-6:
            failed.append(name)
        print(f"{name}: max ratio {worst:.6g} over {args.count} cases", file=sys.stderr)
    _write_csv(args.output, ["name", "seed", "lhs", "rhs_structural", "ratio"], rows)
    if failed:
        print(f"apes: explicit-constant inequality violated: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_gronwall_demo(args) -> int:
    from .inequalities import gronwall_oracle, random_gronwall_instance

    rng = np.random.default_rng(args.seed)
    rows, bad = [], 0
    for i in range(args.count):
        inst, beta = random_gronwall_instance(rng, horizon=args.horizon)
        res = gronwall_oracle(inst, B=lambda t, A, b=beta: b * A)
        bad += not res["holds"]
        rows.append([i, apes_io.format_float(inst.A0), apes_io.format_float(beta),
                     apes_io.format_float(inst.K), apes_io.format_float(inst.alpha),
                     apes_io.format_float(res["A"][-1]), apes_io.format_float(res["int_B"][-1]),
                     apes_io.format_float(res["bound"][-1]), int(res["holds"]),
                     apes_io.format_float(res["margin"])])
    header = ["index", "A0", "beta", "K", "alpha", "A_final", "int_B_final", "bound_final", "holds", "margin"]
    _write_csv(args.output, header, rows)
    print(f"gronwall: {args.count - bad}/{args.count} instances hold", file=sys.stderr)
    return EXIT_CHECK_FAILED if bad else EXIT_OK


def _trajectory_files(directory: Path):
    files = sorted(directory.glob("snapshot_*.apes")) + sorted(directory.glob("checkpoint_*.apes"))
    states = {}
    for f in files:
        s, _ = apes_io.read_snapshot(f)
        states.setdefault(s.step, s)
    return [states[k] for k in sorted(states)]


def cmd_residuals(args) -> int:
    from .consistency import appendix_a_check
    from .diagnostics import compute_residuals

    directory = Path(args.trajectory)
    if not directory.is_dir():
        raise FileNotFoundError(f"trajectory directory {directory} not found")
    base = {}
    man = directory / "manifest.json"
    if man.exists():
        base = json.loads(man.read_text()).get("config", {})
    params = params_from_args(args, base)
    states = _trajectory_files(directory)
    if not states:
        raise FileNotFoundError(f"no snapshots in {directory}")
    rows = []
    keys = ("u", "eta", "theta", "varphi", "psi")
    for i, s in enumerate(states):
        ident = appendix_a_check(s, params)
        row = {"t": s.t, "eta_identity_rel": ident["eta_rel"], "theta_identity_rel": ident["theta_rel"]}
        if 0 < i < len(states) - 1:
            try:
                res = compute_residuals(states[i - 1: i + 2], params)
                row.update({f"res_{k}": res[k] for k in keys})
            except ValueError:
                pass
        rows.append(row)
    header = ["t", "eta_identity_rel", "theta_identity_rel"] + [f"res_{k}" for k in keys]
    body = [[apes_io.format_float(r[c]) if c in r else "" for c in header] for r in rows]
    _write_csv(args.output, header, body)
    return EXIT_OK


def cmd_twin(args) -> int:
    from .consistency import continuous_dependence_experiment

    params = params_from_args(args)
    rep = continuous_dependence_experiment(params, args.delta, args.horizon)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "twin.json"
    payload = rep.to_json()
    payload["config"] = params.to_dict()
    payload["delta"] = args.delta
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"twin: growth exponent {rep.growth_exponent:.6g}, report in {path}")
    return EXIT_OK


def cmd_halfdomain(args) -> int:
    from .consistency import halfdomain_equivalence

    params = params_from_args(args)
    res = halfdomain_equivalence(params, n_steps=args.steps)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "halfdomain.json"
    payload = {
        "config": params.to_dict(),
        "steps": res["steps"],
        "max_discrepancy": res["max_discrepancy"],
        "field_scale": res["field_scale"],
        "history": res["history"].tolist(),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"halfdomain: max discrepancy {res['max_discrepancy']:.3e} over {res['steps']} steps")
    return EXIT_OK if res["max_discrepancy"] <= args.tol else EXIT_CHECK_FAILED


def _write_csv(target, header, rows) -> None:
    if target in (None, "-"):
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    path = Path(target)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apes", description="Primitive-equation simulator and checks.")
    parser.add_argument("--version", action="version", version=f"apes {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate a configuration")
    _common(p)
    p.add_argument("--resume", help="checkpoint file to restart from")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check-inequalities", help="evaluate functional inequalities on random fields")
    p.add_argument("--names", help="comma separated inequality names (default: all)")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--K", type=int, default=4, help="horizontal wavenumber cutoff")
    p.add_argument("--M", type=int, default=4, help="vertical mode cutoff")
    p.add_argument("--slope", type=float, default=2.0)
    p.add_argument("--output", default="-", help="CSV path, '-' for stdout")
    p.set_defaults(func=cmd_check_inequalities)

    p = sub.add_parser("gronwall-demo", help="random logarithmic Gronwall instances")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_gronwall_demo)

    p = sub.add_parser("residuals", help="derived-equation residuals over a saved trajectory")
    _common(p)
    p.add_argument("trajectory", help="directory holding snapshot_*.apes files")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_residuals)

    p = sub.add_parser("twin", help="continuous dependence twin runs")
    _common(p)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--horizon", type=float, default=None)
    p.set_defaults(func=cmd_twin)

    p = sub.add_parser("halfdomain", help="half column versus full column equivalence")
    _common(p)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_halfdomain)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    if getattr(args, "count", 1) is not None and getattr(args, "count", 1) < 1:
        print("apes: --count must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except BlowUpError as exc:
        print(f"apes: blow-up at t = {exc.t:.6g}: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except OSError as exc:
        print(f"apes: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, ConstraintError) as exc:
        print(f"apes: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

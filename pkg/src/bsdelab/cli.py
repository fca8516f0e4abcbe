"""Command-line surface.

Exit codes: 0 all checks passed (expected failures in negative controls
count as passes), 1 any check failed, 2 usage error, 3 internal error.
Every subcommand writes a JSON report echoing its effective configuration;
identical argv + seed give byte-identical reports (timestamps live in a
sidecar key outside the determinism contract) regardless of --threads.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import tomli

from .errors import BsdelabError, UsageError
from .reporting import write_report
from .validate import DEFAULT_SUITE, run_case, run_experiment


def _parse_tolerances(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"--tolerance expects NAME=VALUE, got {item!r}")
        name, val = item.split("=", 1)
        try:
            out[name.strip()] = float(val)
        except ValueError:
            raise UsageError(f"--tolerance value {val!r} is not a number") from None
    return out


def _load_toml(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"configuration file not found: {path}")
    with open(p, "rb") as fh:
        try:
            return tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise UsageError(f"cannot parse {path}: {exc}") from None


def _problem_params(args) -> dict:
    params = {}
    if getattr(args, "problem", None):
        cfg = _load_toml(args.problem)
        params.update(cfg.get("problem", {}))
        params.update(cfg.get("solver", {}))
    for name, key in (("model", "model"), ("terminal", "terminal"),
                      ("horizon", "horizon"), ("steps", "steps"),
                      ("scheme", "scheme")):
        val = getattr(args, name, None)
        if val is not None:
            params[key] = val
    return params


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bsdelab",
        description="Verification and lattice numerics for scalar BSDEs with "
                    "iterated-logarithmically sublinear generators.",
    )
    ap.add_argument("--seed", type=int, default=0, help="master seed for all sampling")
    ap.add_argument("--out-dir", default="bsdelab-reports", help="report directory")
    ap.add_argument("--threads", type=int, default=1, help="worker threads (never affects results)")
    ap.add_argument("--tolerance", action="append", metavar="NAME=VALUE",
                    help="override a named tolerance (psi, key-ineq, testfn, cert, "
                         "apriori, comparison); repeatable")
    sub = ap.add_subparsers(dest="command", required=True)

    def ilflags(sp, default_n=2, default_lam=0.75):
        sp.add_argument("--n", type=int, default=default_n)
        sp.add_argument("--lambda", dest="lam", type=float, default=default_lam)
        sp.add_argument("--k", default="auto",
                        help='shift: number, "auto" (ladder search), "floor", or "tower"')
        sp.add_argument("--p", type=float, default=2.0)
        sp.add_argument("--grid", type=int, default=1000)
        sp.add_argument("--xmax", type=float, default=1e8)

    sp = sub.add_parser("verify-psi", help="margins of the three psi conditions")
    ilflags(sp)
    sp.set_defaults(grid=10**5)

    sp = sub.add_parser("check-ineq", help="pairwise grid check of the key inequality")
    ilflags(sp)

    sp = sub.add_parser("find-k", help="smallest ladder k passing psi + key inequality")
    ilflags(sp)

    sp = sub.add_parser("counterexample", help="explicit violation for p <= 1")
    ilflags(sp)
    sp.set_defaults(p=1.0)
    sp.add_argument("--y", type=float, default=10.0)

    sp = sub.add_parser("verify-testfn", help="sandwich bounds + supersolution grid check")
    sp.add_argument("--beta", type=float, default=0.0)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.75)
    sp.add_argument("--k", type=float, default=None, help="explicit shift (default: constructor search)")
    sp.add_argument("--horizon", type=float, default=1.0)
    sp.add_argument("--grid-s", type=int, default=50)
    sp.add_argument("--grid-x", type=int, default=200)
    sp.add_argument("--grid-z", type=int, default=200)
    sp.add_argument("--fd-check", action="store_true",
                    help="also cross-check derivatives against extended-precision differences")
    sp.add_argument("--csv", action="store_true", help="emit worst-margin slice CSV")

    sp = sub.add_parser("check-generator", help="sampling checks of assumption certificates")
    sp.add_argument("--model", default="example26")
    sp.add_argument("--model-config", dest="model_config", default=None,
                    help="TOML file with a [model] table of atoms (overrides --model)")
    sp.add_argument("--assumptions", default=None, help="comma list, e.g. H1,H2,H3")
    sp.add_argument("--samples", type=int, default=10**5)
    sp.add_argument("--cert-from", dest="cert_from", default=None,
                    help="borrow certificates from another builtin model")

    for name, extra in (("solve", ()), ("compare", ("shift",)), ("apriori", ("tamper",))):
        sp = sub.add_parser(name)
        sp.add_argument("--problem", default=None, help="TOML file with [problem]/[solver] tables")
        sp.add_argument("--model", default=None)
        sp.add_argument("--terminal", default=None)
        sp.add_argument("--horizon", type=float, default=None)
        sp.add_argument("--steps", type=int, default=None)
        sp.add_argument("--scheme", default=None, choices=["picard-implicit", "explicit"])
        if "shift" in extra:
            sp.add_argument("--shift-xi", type=float, default=0.0)
            sp.add_argument("--shift-g", type=float, default=0.0)
        if "tamper" in extra:
            sp.add_argument("--tamper-factor", type=float, default=0.0)
    sub.choices["solve"].add_argument("--norm-p", type=float, default=0.5)
    sub.choices["solve"].add_argument("--csv", action="store_true",
                                      help="dump the solution lattice as CSV")

    sp = sub.add_parser("suite", help="run a suite of cases from TOML (or the builtin default)")
    sp.add_argument("--config", default="default", help='TOML path or "default"')
    return ap


def _case_params(args) -> tuple[str, dict]:
    cmd = args.command
    if cmd in ("verify-psi", "check-ineq", "find-k", "counterexample"):
        k = args.k
        if isinstance(k, str) and k not in ("auto", "floor", "tower"):
            try:
                k = float(k)
            except ValueError:
                raise UsageError(f'--k must be a number, "auto", "floor" or "tower"; got {k!r}') from None
        params = {"n": args.n, "lambda": args.lam, "p": args.p, "k": k,
                  "grid": args.grid, "xmax": args.xmax}
        if cmd == "counterexample":
            params["y"] = args.y
        if cmd == "find-k":
            params.pop("k")
        return cmd, params
    if cmd == "verify-testfn":
        params = {"beta": args.beta, "gamma": args.gamma, "n": args.n,
                  "lambda": args.lam, "horizon": args.horizon,
                  "grid_s": args.grid_s, "grid_x": args.grid_x, "grid_z": args.grid_z,
                  "fd_check": args.fd_check}
        if args.k is not None:
            params["k"] = args.k
        return cmd, params
    if cmd == "check-generator":
        params = {"model": args.model, "samples": args.samples}
        if args.model_config:
            params["model"] = _load_toml(args.model_config).get("model", {})
        if args.assumptions:
            params["assumptions"] = args.assumptions
        if args.cert_from:
            params["cert_from"] = args.cert_from
        return cmd, params
    if cmd in ("solve", "compare", "apriori"):
        params = _problem_params(args)
        if cmd == "compare":
            params["shift_xi"] = args.shift_xi
            params["shift_g"] = args.shift_g
        if cmd == "apriori" and args.tamper_factor:
            params["tamper_factor"] = args.tamper_factor
        if cmd == "solve":
            params["norm_p"] = args.norm_p
        return cmd, params
    raise UsageError(f"unhandled command {cmd!r}")


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors and 0 for --help, matching ours
        return int(exc.code or 0)

    out_dir = Path(args.out_dir)
    try:
        tolerances = _parse_tolerances(args.tolerance)
        out_dir.mkdir(parents=True, exist_ok=True)

        if args.command == "suite":
            suite = DEFAULT_SUITE if args.config == "default" else _load_toml(args.config)
            manifest = run_experiment(suite, out_dir, seed=args.seed,
                                      threads=args.threads, tolerances=tolerances)
            for entry in manifest["cases"]:
                flag = "ok " if entry["ok"] else "BAD"
                print(f"[{flag}] {entry['kind']:16s} expect={entry['expect']:5s} "
                      f"outcome={entry['outcome']}")
            print(f"suite {'PASS' if manifest['all_ok'] else 'FAIL'}; "
                  f"manifest at {out_dir / 'manifest.json'}")
            return 0 if manifest["all_ok"] else 1

        kind, params = _case_params(args)
        report = run_case(kind, params, seed=args.seed, threads=args.threads,
                          tolerances=tolerances)
        report["config_echo"] = {"command": kind, "params": params,
                                 "seed": args.seed, "threads": args.threads,
                                 "tolerances": tolerances}
        path = write_report(out_dir / f"{kind}.json", report)

        if kind == "solve" and getattr(args, "csv", False):
            _dump_solution_csv(params, out_dir, args)
        if kind == "verify-testfn" and getattr(args, "csv", False):
            _dump_testfn_csv(report, params, out_dir)
        if kind == "apriori":
            _dump_apriori_csv(params, out_dir)
        passed = bool(report.get("pass", False))
        print(f"{kind}: {'PASS' if passed else 'FAIL'}; report at {path}")
        return 0 if passed else 1

    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except BsdelabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def _dump_solution_csv(params: dict, out_dir: Path, args) -> None:
    from .lattice import dump_csv
    from .solver import solve
    from .validate import _problem_from_params, _solver_config

    problem = _problem_from_params(params)
    cfg = _solver_config(params, z_free=not problem.model.z_dependent)
    sol = solve(problem, cfg)
    dump_csv(out_dir / "solution.csv", sol.lattice,
             {"Y": sol.Y, "Z": sol.Z, "f_integral": sol.f_integral})
    print(f"lattice CSV at {out_dir / 'solution.csv'}")


def _dump_testfn_csv(report: dict, params: dict, out_dir: Path) -> None:
    """Worst-margin (x, z) slice of the supersolution check for plotting."""
    import csv

    import numpy as np

    from ._util import log_grid
    from .genmodel import il_damped
    from .testfn import TestFunctionSpec, phi_s, phi_x, phi_xx

    spec = TestFunctionSpec(beta=float(params.get("beta", 0.0)),
                            gamma=float(params.get("gamma", 1.0)),
                            n=int(params.get("n", 2)),
                            lam=float(params.get("lambda", 0.75)),
                            horizon=float(params.get("horizon", 1.0)),
                            k=params.get("k"))
    s_worst = report["supersolution"]["worst_point"][0]
    gx = log_grid(1e6, int(params.get("grid_x", 200)))
    gz = log_grid(1e6, int(params.get("grid_z", 200)))
    px = phi_x(spec, s_worst, gx)
    pxx = phi_xx(spec, s_worst, gx)
    ps = phi_s(spec, s_worst, gx)
    damped = il_damped(spec.il_spec, gz)
    margin = (ps - spec.beta * px * gx)[:, None] \
        - spec.gamma * np.outer(px, damped) + 0.5 * np.outer(pxx, gz**2)
    with open(out_dir / "testfn_worst_slice.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", "x", "z", "margin"])
        for i, x in enumerate(gx):
            for j, z in enumerate(gz):
                w.writerow([s_worst, repr(float(x)), repr(float(z)), repr(float(margin[i, j]))])
    print(f"worst-margin slice CSV at {out_dir / 'testfn_worst_slice.csv'}")


def _dump_apriori_csv(params: dict, out_dir: Path) -> None:
    """Per-step envelope (t, max Ybar, min bound, min margin) for plotting."""
    import csv

    import numpy as np

    from .solver import solve
    from .validate import (_problem_from_params, _solver_config,
                           remaining_driver_expectation, tamper_solution)
    from .lattice import expectation_process
    from .genmodel import builtin_model
    from .testfn import TestFunctionSpec, mu

    problem = _problem_from_params(params)
    cfg = _solver_config(params)
    sol = solve(problem, cfg)
    if float(params.get("tamper_factor", 0.0)):
        sol = tamper_solution(sol, float(params["tamper_factor"]))
    cert = problem.model.certificate("H2")
    spec = TestFunctionSpec(beta=cert.beta, gamma=cert.gamma, n=cert.n,
                            lam=cert.lam, horizon=problem.horizon)
    C = 2.0 * mu(spec, spec.horizon) * max(spec.k, 1.0)
    lat = sol.lattice
    xi_abs = expectation_process(lat, np.abs(problem.terminal(lat.node_values(lat.steps))))
    remaining = remaining_driver_expectation(sol)
    with open(out_dir / "apriori_bounds.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "t", "max_ybar", "min_bound", "min_margin"])
        for i in range(lat.steps + 1):
            I = sol.f_integral.layer(i)
            ybar = np.abs(sol.Y.layer(i)) + I
            bound = C * (xi_abs.layer(i) + I + remaining[i]) + C
            w.writerow([i, repr(lat.time(i)), repr(float(np.max(ybar))),
                        repr(float(np.min(bound))), repr(float(np.min(bound - ybar)))])
    print(f"bound-envelope CSV at {out_dir / 'apriori_bounds.csv'}")


if __name__ == "__main__":
    sys.exit(main())

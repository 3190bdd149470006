"""Command line entry point: synth, simulate, verify, compare."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import config as cfgmod
from .controller import GainFile, load_gains, save_gains
from .errors import (BackendFailure, ConfigError, DimensionMismatch, Divergence, IllConditioned,
                     Infeasible, VerificationFailed)
from .sim import SimConfig, compare_mechanisms, run, write_trace
from .synthesis import certify_gains, averaging_slack, solve, solve_with_sigma_grid, verify

log = logging.getLogger("memdetm")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

DEFAULT_VARIANTS = [
    {"name": "dynamic"},
    {"name": "static", "beta": 0.0},
    {"name": "every-step", "alpha": 0.0},
    {"name": "memoryless-H", "H": "memoryless"},
    {"name": "geometric-H", "H": "geometric"},
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="memdetm", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", parser_class=_Parser)

    def common(sp):
        sp.add_argument("scenario_pos", nargs="?", metavar="SCENARIO")
        sp.add_argument("--scenario", help="scenario YAML file or bundled name (paper_s4)")
        sp.add_argument("--out", help="output directory (defaults to the scenario's output_dir)")
        sp.add_argument("--seed", type=int, default=0)
        return sp

    s = common(sub.add_parser("synth", help="solve the LMIs and write gains"))
    s.add_argument("--sigma", type=float)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--backend", help="cvxopt or scs (default from MEMDETM_LMI_BACKEND, else cvxopt)")
    s.add_argument("--no-grid", action="store_true", help="do not fall back to the sigma grid")
    s.add_argument("--omega-form", choices=["expanded", "projected"])

    s = common(sub.add_parser("simulate", help="run the closed loop and write CSV traces"))
    s.add_argument("--gains", required=True)
    s.add_argument("--horizon", type=int)
    s.add_argument("--refresh", choices=["step", "trigger"])

    s = common(sub.add_parser("verify", help="check a gain file against the certificate"))
    s.add_argument("--gains", required=True)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--backend", help="cvxopt or scs")
    s.add_argument("--averaging-draws", type=int, default=0,
                   help="also run the averaging-bound Monte Carlo with this many draws")

    s = common(sub.add_parser("compare", help="compare trigger variants"))
    s.add_argument("--gains", required=True)
    s.add_argument("--horizon", type=int)
    return p


def _scenario(args):
    name = args.scenario or args.scenario_pos
    if not name:
        raise ConfigError("a scenario is required (--scenario or positional)")
    return cfgmod.load_scenario(name)


def _gains_file(path) -> GainFile:
    p = Path(path)
    if not p.exists():
        if str(path) in cfgmod.BUNDLED:
            p = cfgmod.bundled_gains_path(str(path))
        elif Path(str(path) + ".json").exists():
            p = Path(str(path) + ".json")
    return load_gains(p)


def _out(args, sc) -> Path:
    out = Path(args.out or sc.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_gains(sc, gf):
    if gf.kappa != sc.kappa or len(gf.gains) != sc.N:
        raise ConfigError(f"gain file has kappa={gf.kappa} and {len(gf.gains)} agents, "
                          f"scenario has kappa={sc.kappa} and {sc.N}")


def cmd_synth(args) -> int:
    sc = _scenario(args)
    out = _out(args, sc)
    pr = sc.synthesis_problem(sigma=args.sigma, epsilon=args.epsilon, omega_form=args.omega_form)
    report = {"scenario": sc.name, "vertices": len(pr.vertices()), "lmi_size": pr.size,
              "omega_form": pr.omega_form, "epsilon": pr.epsilon}
    try:
        if args.no_grid:
            res = solve(pr, args.backend)
        else:
            res = solve_with_sigma_grid(pr, sc.sigma_grid, args.backend)
    except Infeasible as exc:
        report.update(feasible=False, message=str(exc), best_margin=exc.margin,
                      sigma_margins={str(k): v for k, v in getattr(exc, "tried", {}).items()})
        (out / "synth_report.json").write_text(json.dumps(report, indent=1))
        print(f"infeasible: {exc}")
        return EXIT_FAIL
    rep = verify(res, pr.with_(sigma=res.sigma), raise_on_fail=False)
    gf = GainFile(res.gains, res.trigger_weights, res.P,
                  {"source": "synthesis", "sigma": res.sigma, "margin": res.margin,
                   "omega_form": res.omega_form})
    save_gains(out / "gains.json", gf)
    report.update(feasible=True, sigma=res.sigma, margin=res.margin,
                  vertex_max_eig=res.vertex_max_eig, solver=res.solver_info,
                  omega=[np.asarray(w).tolist() for w in res.trigger_weights],
                  verify=rep.summary())
    (out / "synth_report.json").write_text(json.dumps(report, indent=1, default=str))
    print(f"feasible: sigma={res.sigma:g} margin={res.margin:.3e}; gains -> {out / 'gains.json'}")
    if not rep.ok:
        print(f"verification failed: {rep.failures[0]}")
        return EXIT_FAIL
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    gf = _gains_file(args.gains)
    _check_gains(sc, gf)
    out = _out(args, sc)
    conf = SimConfig(horizon=args.horizon or sc.horizon, refresh=args.refresh or sc.refresh,
                     divergence=sc.divergence, settle=sc.settle, P=gf.P)
    try:
        tr = run(sc, gf.gains, sc.detm_params(gf.omega), conf)
    except Divergence as exc:
        print(f"diverged: {exc}")
        return EXIT_FAIL
    write_trace(tr, out)
    print(f"T={tr.horizon} TRs={np.round(tr.TRs, 3).tolist()} "
          f"max|x(T)|={tr.max_norm[-1]:.3e} consensus={tr.consensus_error[-1]:.3e}; CSVs -> {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    sc = _scenario(args)
    gf = _gains_file(args.gains)
    _check_gains(sc, gf)
    out = _out(args, sc)
    pr = sc.synthesis_problem(epsilon=args.epsilon)
    report = {"scenario": sc.name}
    ok = True
    if gf.P is None:
        # no certificate stored: search for one with the gains held fixed
        try:
            cert = certify_gains(pr, gf.gains, args.backend)
            report.update(certificate="found", margin=cert.margin)
        except Infeasible as exc:
            report.update(certificate="none", message=str(exc), best_margin=exc.margin)
            ok = False
    else:
        params = sc.detm_params(gf.omega)
        res = SimpleNamespace(P=gf.P, W=[p.weight for p in params], gains=gf.gains,
                              epsilon=pr.epsilon)
        try:
            rep = verify(res, pr, raise_on_fail=False)
        except DimensionMismatch as exc:
            raise ConfigError(str(exc)) from exc
        report.update(rep.summary())
        ok = rep.ok
    if args.averaging_draws:
        slack = averaging_slack(args.seed, args.averaging_draws)
        report["averaging_min_slack"] = slack
        ok = ok and slack >= -1e-9
    (out / "verify_report.json").write_text(json.dumps(report, indent=1, default=str))
    print(("verified" if ok else "verification failed") + f"; report -> {out / 'verify_report.json'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_compare(args) -> int:
    sc = _scenario(args)
    gf = _gains_file(args.gains)
    _check_gains(sc, gf)
    out = _out(args, sc)
    conf = SimConfig(horizon=args.horizon or sc.horizon, refresh=sc.refresh,
                     divergence=sc.divergence, settle=sc.settle)
    rows = compare_mechanisms(sc, gf.gains, DEFAULT_VARIANTS, sc.detm_params(gf.omega), conf)
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant"] + [f"TRs_{i + 1}" for i in range(sc.N)] +
                   ["mean_TRs", "settling_step", "consensus_error", "max_norm", "stable"])
        for r in rows:
            trs = r["TRs"] or [""] * sc.N
            w.writerow([r["variant"]] + trs + [r["mean_TRs"], r["settling_step"], r["consensus_error"],
                                               r["max_norm"], int(r["stable"])])
    for r in rows:
        print(f"{r['variant']:>14}: mean TRs={r['mean_TRs']}, settle={r['settling_step']}, stable={r['stable']}")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "simulate": cmd_simulate, "verify": cmd_verify, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    if args.cmd not in COMMANDS:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.cmd](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (Infeasible, VerificationFailed, IllConditioned, BackendFailure) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()

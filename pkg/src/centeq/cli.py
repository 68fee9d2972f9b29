"""Command-line entry point ``centeq``.

Every subcommand writes a JSON summary (stdout or ``--json PATH``) carrying
``schema_version`` and the full run configuration, optionally a CSV table
(``--csv PATH``), and logs to stderr.  Exit status: 0 success, 1 a check
reported FAIL, 2 usage error, 3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time

import numpy as np

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CONFIG = 0, 1, 2, 3

log = logging.getLogger("centeq")


class ConfigError(Exception):
    pass


def default_seed():
    raw = os.environ.get("CENTEQ_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"CENTEQ_SEED must be an integer, got {raw!r}") from None


def _system(spec):
    from .dynsys import load_system

    try:
        return load_system(spec)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot load system {spec!r}: {exc}") from exc


def _potential(args, sys):
    from .quasicocycle import TrigPotential

    pot = TrigPotential.constant(0.0, sys.d)
    if getattr(args, "potential", None):
        try:
            pot = TrigPotential.from_file(args.potential, sys.d)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read potential {args.potential!r}: {exc}") from exc
    if getattr(args, "const", 0.0):
        pot = pot + args.const
    return pot


def _cocycle(args, sys):
    from .quasicocycle import birkhoff, zero_cocycle

    pot = _potential(args, sys)
    if not len(pot.freqs) and pot.const == 0.0:
        return zero_cocycle(sys)
    return birkhoff(sys, pot)


def _n_range(args, sys):
    from .pressure import default_window

    lo, hi = default_window(sys)
    lo = args.nmin if args.nmin is not None else lo
    hi = args.nmax if args.nmax is not None else hi
    if hi - lo < 3:
        raise ConfigError(f"window [{lo}, {hi}] needs at least 4 values of n")
    return range(lo, hi + 1)


def _quasimorphism(args):
    from .latticebridge import expression_quasimorphism, rotation, table_quasimorphism, twisted_cocycle

    try:
        if args.rotation is not None:
            return twisted_cocycle(rotation(args.rotation), args.w)
        if args.table:
            return table_quasimorphism(args.table)
        return expression_quasimorphism(args.expr)
    except (OSError, ValueError, SyntaxError) as exc:
        raise ConfigError(f"bad quasimorphism: {exc}") from exc


def _write_csv(path, header, rows):
    if not path:
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# --- subcommands ------------------------------------------------------------

def cmd_net(args):
    from .netting import validate_separated, greedy_separated

    sys_ = _system(args.system)
    net = greedy_separated(sys_, args.n, args.eps, args.resolution, args.order, args.seed)
    ok = True
    out = {"n": args.n, "eps": args.eps, "size": len(net), "resolution": net.resolution}
    if args.validate:
        ok = bool(validate_separated(sys_, net))
        out["separated"] = ok
    _write_csv(args.csv, [f"x{i + 1}" for i in range(sys_.d)], net.points.tolist())
    return out, ok


def cmd_qp(args):
    from .netting import build_quasiperiodic_family, verify_family_separation

    sys_ = _system(args.system)
    fam = build_quasiperiodic_family(sys_, range(args.nmin, args.nmax + 1), args.delta)
    counts = fam.counts()
    rates = {n: math.log(c) / n for n, c in counts.items()}
    ok = True
    if args.validate:
        ok = all(verify_family_separation(sys_, qp.points, n, fam.delta) for n, qp in fam.members.items())
    _write_csv(args.csv, ["n", "count", "log_count_over_n"], [[n, counts[n], rates[n]] for n in counts])
    return {"delta": args.delta, "counts": counts, "growth": rates, "entropy": sys_.entropy, "separated": ok}, ok


def cmd_shadow(args):
    from .acceptance import random_two_segment_specs, shadow_trials
    from .specification import density_probe

    sys_ = _system(args.system)
    M = args.M if args.M is not None else density_probe(sys_, args.eps)
    if M is None:
        return {"eps": args.eps, "M": None, "status": "unstable disks never eps-dense"}, False
    specs = random_two_segment_specs(sys_, args.trials, M, np.random.default_rng(args.seed))
    worst, transverse, closed, failures = shadow_trials(sys_, specs, args.eps, M, sys_.dim_c == 0)
    ok = failures == 0 and worst <= 5 and transverse <= 1e-9
    return {"eps": args.eps, "M": M, "trials": args.trials, "failures": failures,
            "max_shadow_over_eps": worst, "max_transverse_return": transverse,
            "closed_form_err": closed}, ok


def _pressure_out(args, sys_, qc):
    from .pressure import pressure_estimate

    est = pressure_estimate(sys_, qc, args.eps, _n_range(args, sys_))
    rows = [[e.n, e.log_z, e.size] for e in est.series.entries]
    _write_csv(args.csv, ["n", "log_Z", "net_size"], rows)
    return {"P": est.P, "window": list(est.window), "residual": est.residual, "eps": args.eps,
            "unstable_fit": est.unstable, "log_Z": {r[0]: r[1] for r in rows}}, not est.unstable


def cmd_pressure(args):
    sys_ = _system(args.system)
    return _pressure_out(args, sys_, _cocycle(args, sys_))


def cmd_entropy(args):
    from .quasicocycle import zero_cocycle

    sys_ = _system(args.system)
    out, ok = _pressure_out(args, sys_, zero_cocycle(sys_))
    out["log_lambda"] = sys_.entropy
    return out, ok


def cmd_equilibrium(args):
    from .equilibrium import cesaro_measure, haar_comparison, invariance_defect, frequency_battery
    from .netting import build_quasiperiodic_family

    sys_ = _system(args.system)
    qc = _cocycle(args, sys_)
    fam = build_quasiperiodic_family(sys_, [args.n], args.delta)
    nu = cesaro_measure(sys_, qc, fam, args.n)
    four = haar_comparison(nu, sys_.d, args.cutoff, args.threshold)
    inv = invariance_defect(sys_, nu, frequency_battery(sys_.d, args.cutoff))
    _write_csv(args.csv, [f"k{i + 1}" for i in range(sys_.d)] + ["abs_coefficient"],
               [list(k) + [v] for k, v in four.coefficients.items()])
    return {"n": args.n, "atoms": len(nu), "max_fourier": four.max_coefficient, "worst_k": list(four.worst_k),
            "invariance_defect": inv, "threshold": args.threshold}, four.passed


def cmd_gibbs(args):
    from .equilibrium import cesaro_measure, gibbs_report
    from .netting import build_quasiperiodic_family
    from .pressure import pressure_estimate

    sys_ = _system(args.system)
    qc = _cocycle(args, sys_)
    fam = build_quasiperiodic_family(sys_, [args.N], args.delta)
    nu = cesaro_measure(sys_, qc, fam, args.N)
    P = pressure_estimate(sys_, qc, args.eps).P
    rep = gibbs_report(sys_, qc, nu, P, args.eps, range(args.nmin, args.nmax + 1), args.samples, args.seed)
    _write_csv(args.csv, [f"x{i + 1}" for i in range(sys_.d)] + ["n", "mass", "ratio"],
               [list(x) + [n, m, r] for x, n, m, r in rep.table])
    return {"P": P, "c": rep.c, "C": rep.C, "spread": rep.spread, "trend": rep.trend,
            "zero_mass": rep.zero_mass, "measure_n": args.N, "eps": args.eps}, rep.passed


def cmd_bridge_defect(args):
    from .latticebridge import BridgeCocycle

    qm = _quasimorphism(args)
    a = args.translation if args.translation else [math.sqrt(3)] * qm.d
    rep = BridgeCocycle(qm).defect_report(a, args.samples, args.box, seed=args.seed)
    return {"measured": rep.measured, "K1": rep.bound.K1, "K2": rep.bound.K2, "K": rep.bound.K,
            "decomposition_residual": rep.decomposition_residual, "samples": rep.samples}, rep.passed


def cmd_homogenize(args):
    from .latticebridge import homogenize

    qm = _quasimorphism(args)
    try:
        est = homogenize(qm, range(-args.probe, args.probe + 1), args.n_limit)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _write_csv(args.csv, ["gamma", "L_bar"], sorted(est.values.items()))
    return {"values": est.values, "n_limit": est.n_limit, "converged": est.converged,
            "additivity_error": est.additivity_error, "defect": est.defect}, est.converged


def cmd_weyl_check(args):
    from .latticebridge import RootSystem, builtin_root_system, weyl_kernel_check

    try:
        rs = RootSystem.from_json(args.root_system) if args.root_system.endswith(".json") else \
            builtin_root_system(args.root_system)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"bad root system: {exc}") from exc
    rep = weyl_kernel_check(rs)
    return {"name": rep.name, "rank": rep.rank, "ambient": rep.ambient, "roots_span": rep.spans}, rep.passed


def cmd_haar_h(args):
    from .latticebridge import haar_average_H

    qm = _quasimorphism(args)
    try:
        est = haar_average_H(qm, args.a, args.n_limit, args.method)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return {"H": est.H.tolist(), "n_limit": est.n_limit, "additivity_error": est.additivity_error,
            "converged": est.converged}, est.converged


def cmd_selftest(args):
    from .acceptance import run_all

    try:
        only = {int(v) for v in args.only.split(",")} if args.only else None
    except ValueError:
        raise ConfigError(f"--only expects comma-separated integers, got {args.only!r}") from None
    results = run_all(only, args.seed, echo=lambda line: print(line, file=sys.stderr, flush=True))
    out = {r.number: {"title": r.title, "passed": r.passed, "seconds": r.seconds,
                      "detail": r.detail} for r in results}
    return {"criteria": out, "passed": sum(r.passed for r in results), "total": len(results)}, \
        all(r.passed for r in results)


COMMANDS = {
    "net": cmd_net, "qp": cmd_qp, "shadow": cmd_shadow, "pressure": cmd_pressure, "entropy": cmd_entropy,
    "equilibrium": cmd_equilibrium, "gibbs": cmd_gibbs, "bridge-defect": cmd_bridge_defect,
    "homogenize": cmd_homogenize, "weyl-check": cmd_weyl_check, "haar-h": cmd_haar_h, "selftest": cmd_selftest,
}


def build_parser():
    p = argparse.ArgumentParser(prog="centeq", description="Equilibrium states of toral center isometries.")
    p.add_argument("--replay", metavar="JSON", help="re-run the configuration recorded in an emitted summary")
    p.add_argument("--json", dest="replay_json", help="with --replay: write the JSON summary here")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")

    def common(sp, system=True):
        if system:
            sp.add_argument("--system", default="builtin:cat", help="builtin:cat, builtin:t3 or a system file")
        sp.add_argument("--seed", type=int, default=None, help="default: $CENTEQ_SEED or 0")
        sp.add_argument("--json", help="write the JSON summary here instead of stdout")
        sp.add_argument("--csv", help="write the result table as CSV")
        sp.add_argument("--workers", type=int, default=None,
                        help="accepted for interface stability; computations are single-process")

    def potential(sp):
        sp.add_argument("--potential", help="trigonometric potential file (rows: k1..kd cos sin)")
        sp.add_argument("--const", type=float, default=0.0, help="constant added to the potential")

    def window(sp):
        sp.add_argument("--nmin", type=int)
        sp.add_argument("--nmax", type=int)

    def qm(sp):
        sp.add_argument("--expr", default="floor(n*sqrt(2))", help="quasimorphism expression in n")
        sp.add_argument("--table", help="CSV table k, L(k)")
        sp.add_argument("--rotation", type=float, help="angle of pi(1); selects the exact twisted cocycle")
        sp.add_argument("--w", type=float, nargs=2, default=[1.0, 0.0], help="twisted cocycle seed vector")

    s = sub.add_parser("net", help="maximal (n, eps)-separated net")
    common(s)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--eps", type=float, default=0.05)
    s.add_argument("--resolution", type=int)
    s.add_argument("--order", choices=["lex", "shuffled"])
    s.add_argument("--validate", action="store_true")

    s = sub.add_parser("qp", help="separated quasiperiodic family counts")
    common(s)
    s.add_argument("--nmin", type=int, default=3)
    s.add_argument("--nmax", type=int, default=8)
    s.add_argument("--delta", type=float, default=0.05)
    s.add_argument("--validate", action="store_true")

    s = sub.add_parser("shadow", help="random two-segment specification trials")
    common(s)
    s.add_argument("--eps", type=float, default=0.05)
    s.add_argument("--M", type=int)
    s.add_argument("--trials", type=int, default=50)

    for name, helptext in (("pressure", "pressure of a Birkhoff cocycle"), ("entropy", "topological entropy")):
        s = sub.add_parser(name, help=helptext)
        common(s)
        window(s)
        s.add_argument("--eps", type=float, default=0.05)
        if name == "pressure":
            potential(s)

    s = sub.add_parser("equilibrium", help="Cesaro family measure and its Fourier coefficients")
    common(s)
    potential(s)
    s.add_argument("--n", type=int, default=9)
    s.add_argument("--delta", type=float, default=0.05)
    s.add_argument("--cutoff", type=int, default=3)
    s.add_argument("--threshold", type=float, default=0.05)

    s = sub.add_parser("gibbs", help="Gibbs ratio table of a Cesaro family measure")
    common(s)
    potential(s)
    s.add_argument("--N", type=int, default=15, help="index of the measure nu_N")
    s.add_argument("--delta", type=float, default=0.05)
    s.add_argument("--eps", type=float, default=0.04)
    s.add_argument("--nmin", type=int, default=3)
    s.add_argument("--nmax", type=int, default=9)
    s.add_argument("--samples", type=int, default=200)

    s = sub.add_parser("bridge-defect", help="defect of the induced cocycle against the assembled bound")
    common(s, system=False)
    qm(s)
    s.add_argument("--translation", type=float, nargs="+")
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--box", type=int, default=1000)

    s = sub.add_parser("homogenize", help="homogenization of a quasimorphism on Z")
    common(s, system=False)
    qm(s)
    s.add_argument("--n-limit", type=int, default=10**7)
    s.add_argument("--probe", type=int, default=10)

    s = sub.add_parser("weyl-check", help="rank of the reflection differences of a root system")
    common(s, system=False)
    s.add_argument("--root-system", default="A2", help="A2, B2, G2, single or a JSON file")

    s = sub.add_parser("haar-h", help="Haar average H(a)")
    common(s, system=False)
    qm(s)
    s.add_argument("--a", type=float, nargs="+", default=[1.0])
    s.add_argument("--n-limit", type=int, default=10**7)
    s.add_argument("--method", choices=["exact", "quadrature"], default="exact")

    s = sub.add_parser("selftest", help="run the acceptance checks end to end")
    common(s, system=False)
    s.add_argument("--only", help="comma-separated criterion numbers")
    return p


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    return str(obj)


def _stringify_keys(obj):
    if isinstance(obj, dict):
        return {str(k): _stringify_keys(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_stringify_keys(v) for v in obj]
    return obj


def _config(args):
    skip = {"replay", "replay_json", "verbose", "json"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        if args.replay:
            try:
                with open(args.replay) as fh:
                    cfg = json.load(fh)["config"]
            except (OSError, KeyError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot replay {args.replay!r}: {exc}") from exc
            target = args.replay_json
            args = argparse.Namespace(**cfg)
            args.json, args.replay, args.verbose = target, None, False
        if not args.command:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        if args.seed is None:
            args.seed = default_seed()
        t0 = time.perf_counter()
        log.info("running %s", args.command)
        result, ok = COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"centeq: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    payload = {"schema_version": SCHEMA_VERSION, "command": args.command, "status": "PASS" if ok else "FAIL",
               "seconds": time.perf_counter() - t0, "config": _config(args), "result": result}
    text = json.dumps(_stringify_keys(payload), default=_jsonable, indent=2, sort_keys=True)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

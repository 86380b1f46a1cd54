"""``ldpc-lab`` command line.

Each subcommand writes CSV/JSON data files plus a run manifest into
``--out-dir``. Exit codes: 0 success, 1 runtime failure, 2 bad flags,
3 invalid configuration, 4 output directory not writable.
"""
from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .decoder import bp_decode, sample_erasures
from .density_evolution import bp_threshold
from .ensemble import EnsembleParams, design_rate, sample_graph, write_graph
from .error_floor import FloorModel, empirical_n2_distribution
from .montecarlo import (
    PHI_COLUMNS,
    SWEEP_COLUMNS,
    ConfigError,
    ScalingError,
    ScalingRule,
    SimConfig,
    code_seed,
    phi_rows,
    run_sweep,
    scaling_experiment,
    sweep_rows,
    trial_seeds,
    write_csv,
)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_CONFIG, EXIT_OUTPUT = 0, 1, 2, 3, 4
SEED_ENV = "LDPC_LAB_SEED"


class OutputError(OSError):
    pass


def _params(args, need_M=True) -> EnsembleParams:
    try:
        return EnsembleParams(args.l, args.k, args.L, args.M if need_M else None)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _seed(args, fallback: int | None = None) -> int:
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            seed = int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from exc
    elif args.seed is not None:
        seed = args.seed
    else:
        seed = fallback if fallback is not None else 0
    if seed < 0:
        raise ConfigError("seed must be non-negative")
    return seed


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OutputError(f"output directory {out} is not writable: {exc}") from exc
    return out


class Run:
    """Collects outputs and writes the manifest at the end of a command."""

    def __init__(self, args, argv, config: dict):
        self.args = args
        self.argv = argv
        self.config = config
        self.out = _out_dir(args)
        self.files: list[str] = []
        self.start = dt.datetime.now(dt.timezone.utc)
        self.t0 = time.perf_counter()
        self.notes: dict = {}

    def path(self, name: str) -> Path:
        p = self.out / name
        self.files.append(str(p))
        return p

    def finish(self) -> None:
        blob = json.dumps(self.config, sort_keys=True, default=str)
        manifest = {
            "command": ["ldpc-lab", *self.argv],
            "subcommand": self.args.cmd,
            "config": self.config,
            "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
            "master_seed": self.config.get("seed"),
            "version": __version__,
            "backend": kernels.backend.NAME,
            "numpy": np.__version__,
            "start": self.start.isoformat(),
            "end": dt.datetime.now(dt.timezone.utc).isoformat(),
            "wall_time_s": time.perf_counter() - self.t0,
            "outputs": self.files,
            **self.notes,
        }
        (self.out / f"manifest_{self.args.cmd}.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


# -- subcommands ------------------------------------------------------------

def cmd_rate(args, argv):
    params = _params(args, need_M=False)
    rate = design_rate(params)
    run = Run(args, argv, {"l": params.l, "k": params.k, "L": params.L})
    print(f"{rate.numerator}/{rate.denominator}")
    print(f"{float(rate):.6f}")
    _write_json(run.path("rate.json"), {"l": params.l, "k": params.k, "L": params.L,
                                        "rate": f"{rate.numerator}/{rate.denominator}",
                                        "value": float(rate)})
    run.finish()


def cmd_threshold(args, argv):
    if args.uncoupled:
        if args.l < 3 or args.l % 2 == 0 or args.k < 2:
            raise ConfigError("need odd l >= 3 and k >= 2")
        target = (args.l, args.k * args.l)
    else:
        if args.L is None:
            raise ConfigError("--L is required unless --uncoupled is given")
        target = _params(args, need_M=False)
    cfg = {"l": args.l, "k": args.k, "L": None if args.uncoupled else args.L,
           "tol": args.tol, "de_tol": args.de_tol, "max_iters": args.max_iters}
    run = Run(args, argv, cfg)
    res = bp_threshold(target, tol_bisect=args.tol, tol_de=args.de_tol, max_iters=args.max_iters)
    out = res.to_json()
    print(json.dumps(out))
    _write_json(run.path("threshold.json"), out)
    run.finish()


def _sim_configs(args) -> list[SimConfig]:
    if args.config:
        if args.L:
            raise ConfigError("--L cannot be combined with --config")
        if not Path(args.config).is_file():
            raise ConfigError(f"config file {args.config} does not exist")
        cfg = SimConfig.from_json(args.config)
        cfg.seed = _seed(args, cfg.seed)
        return [cfg]
    if args.M is None or not args.L or not args.eps:
        raise ConfigError("give --config or all of --L, --M and --eps")
    seed = _seed(args)
    out = []
    for L in args.L:
        try:
            params = EnsembleParams(args.l, args.k, L, args.M)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        out.append(SimConfig(params, list(args.eps), args.trials, args.codes, seed,
                             max_iters=args.max_iters, delta=args.delta,
                             record_sections=args.record_sections,
                             stop_after_failures=args.stop_after_failures))
    return out


def cmd_simulate(args, argv):
    cfgs = _sim_configs(args)
    config = cfgs[0].to_dict()
    if len(cfgs) > 1:
        config["L"] = [c.params.L for c in cfgs]
    run = Run(args, argv, config)
    rows, prows, srows = [], [], []
    run.notes["ell_min"], run.notes["code_seeds"] = {}, {}
    for cfg in cfgs:
        stats = run_sweep(cfg, workers=args.workers)
        rows.extend(sweep_rows(stats))
        prows.extend(phi_rows(stats))
        L = cfg.params.L
        for p in stats.points:
            if p.sections is not None:
                srows.extend([L, repr(p.epsilon), r, j, repr(float(v))]
                             for r, row in enumerate(p.sections) for j, v in enumerate(row))
        run.notes["ell_min"][str(L)] = {repr(p.epsilon): p.ell_min for p in stats.points}
        run.notes["code_seeds"][str(L)] = stats.code_seeds
        for p in stats.points:
            print(f"L={L} eps={p.epsilon:.4f} Pb={p.Pb:.4e}±{p.Pb_ci:.1e} PB={p.PB:.4e}±{p.PB_ci:.1e} "
                  f"ell_min={'unreachable' if p.ell_min is None else p.ell_min}")
    write_csv(run.path("sweep.csv"), SWEEP_COLUMNS, rows)
    write_csv(run.path("phi.csv"), PHI_COLUMNS, prows)
    if any(c.record_sections for c in cfgs):
        write_csv(run.path("sections.csv"), ["L", "epsilon", "round", "section_index", "residual_fraction"], srows)
        run.notes["averaging"] = "mean over trials, then over code samples; finished trials hold their final state"
    run.finish()


def cmd_scaling(args, argv):
    try:
        rule = ScalingRule(args.rule, L0=args.L0, c=args.c, p=args.p, a=args.a, b=args.b,
                           offset=args.offset, max_L=args.max_L).resolve(args.M)
        Ls = [rule(M) for M in args.M]
    except ScalingError as exc:
        raise ConfigError(str(exc)) from exc
    if args.trials < 1:
        raise ConfigError("trials must be positive")
    seed = _seed(args)
    cfg = {"rule": args.rule, "L0": args.L0, "c": args.c, "p": args.p, "a": args.a, "b": args.b,
           "offset": rule.offset, "M": args.M, "L": Ls, "epsilons": args.eps, "trials": args.trials,
           "codes": args.codes, "seed": seed, "l": args.l, "k": args.k}
    run = Run(args, argv, cfg)
    points = scaling_experiment(rule, args.M, args.eps, args.trials, seed, args.l, args.k,
                                codes=args.codes, max_iters=args.max_iters, workers=args.workers)
    rows, prows = [], []
    for pt in points:
        rows.extend(sweep_rows(pt.stats))
        prows.extend(phi_rows(pt.stats))
        print(f"M={pt.M} L={pt.L} " + " ".join(f"Pb({q.epsilon})={q.Pb:.3e}" for q in pt.stats.points))
    write_csv(run.path("scaling.csv"), SWEEP_COLUMNS, rows)
    write_csv(run.path("scaling_phi.csv"), PHI_COLUMNS, prows)
    run.finish()


def cmd_iterdist(args, argv):
    seed = _seed(args)
    cfg = {"l": args.l, "k": args.k, "L": args.L, "M": args.M, "epsilon": args.eps,
           "trials": args.trials, "codes": args.codes, "seed": seed, "delta": args.delta}
    run = Run(args, argv, cfg)
    prows, summary = [], []
    for L in args.L:
        for M in args.M:
            try:
                sc = SimConfig(EnsembleParams(args.l, args.k, L, M), [args.eps], args.trials,
                               args.codes, seed, max_iters=args.max_iters, delta=args.delta)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            stats = run_sweep(sc, workers=args.workers)
            pt = stats.points[0]
            prows.extend(phi_rows(stats))
            summary.append([L, M, repr(args.eps), repr(pt.dist.mean()), repr(pt.dist.variance()),
                            repr(pt.PB), "unreachable" if pt.ell_min is None else pt.ell_min])
            print(f"L={L} M={M} mean={pt.dist.mean():.2f} var={pt.dist.variance():.2f} PB={pt.PB:.3e}")
    write_csv(run.path("phi.csv"), PHI_COLUMNS, prows)
    write_csv(run.path("iterdist_summary.csv"),
              ["L", "M", "epsilon", "mean", "variance", "PB", "ell_min"], summary)
    run.finish()


def cmd_floor(args, argv):
    params = _params(args)
    seed = _seed(args)
    if args.samples and args.samples < 100:
        raise ConfigError("--samples must be 0 or at least 100")
    run = Run(args, argv, {"l": params.l, "k": params.k, "L": params.L, "M": params.M,
                           "epsilons": args.eps, "samples": args.samples, "seed": seed})
    model = FloorModel.of(params)
    out = {"lambda": model.lam, "clean_fraction": model.clean_fraction,
           "floor_curve": [[e, v] for e, v in model.curve(args.eps)]}
    if args.samples:
        dist = empirical_n2_distribution(params, args.samples, seed, workers=args.workers)
        out.update({"samples": args.samples, "mean_n2": dist.mean,
                    "empirical_clean_fraction": dist.clean_fraction,
                    "chi2": dist.chi2, "chi2_dof": dist.dof, "chi2_p_value": dist.p_value})
        rows = [[int(n), repr(float(e)), repr(float(p))]
                for n, e, p in zip(dist.support, dist.empirical_pmf, dist.poisson_pmf)]
        write_csv(run.path("n2_histogram.csv"), ["n2", "empirical_pmf", "poisson_pmf"], rows)
    _write_json(run.path("floor.json"), out)
    print(json.dumps({k: out[k] for k in ("lambda", "clean_fraction")}))
    run.finish()


def cmd_wave(args, argv):
    params = _params(args)
    seed = _seed(args)
    if args.trials < 1:
        raise ConfigError("trials must be positive")
    run = Run(args, argv, {"l": params.l, "k": params.k, "L": params.L, "M": params.M,
                           "epsilon": args.eps, "trials": args.trials, "seed": seed})
    g = sample_graph(params, code_seed(seed, 0))
    traces = []
    for s in trial_seeds(seed, 0, 0, args.trials):
        pat = sample_erasures(g.n, args.eps, s)
        traces.append(bp_decode(g, pat, max_iters=args.max_iters, record_sections=True))
    last = max(t.iterations_used for t in traces)
    total = np.zeros((last + 1, params.num_sections))
    for t in traces:
        res = t.residual_by_section
        total[: len(res)] += res
        total[len(res):] += res[-1]
    frac = total / (len(traces) * params.M)
    rows = [[r, s, repr(float(frac[r, s]))]
            for r in range(0, last + 1, args.stride) for s in range(params.num_sections)]
    write_csv(run.path("wave.csv"), ["round", "section_index", "residual_fraction"], rows)
    write_csv(run.path("wave_trials.csv"), ["trial", "success", "iterations_used"],
              [[i, int(t.success), t.iterations_used] for i, t in enumerate(traces)])
    run.notes["averaging"] = "mean over trials of one fixed code sample; finished trials hold their final state"
    its = [t.iterations_used for t in traces if t.success]
    print(f"successes={len(its)}/{len(traces)} median_rounds={np.median(its) if its else float('nan')}")
    run.finish()


def cmd_lift(args, argv):
    params = _params(args)
    seed = _seed(args)
    run = Run(args, argv, {"l": params.l, "k": params.k, "L": params.L, "M": params.M, "seed": seed})
    write_graph(sample_graph(params, seed), run.path(args.name))
    run.finish()


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"master seed (env {SEED_ENV} overrides)")
    common.add_argument("--out-dir", default="ldpc_lab_out")
    common.add_argument("--workers", type=int, default=None, help="worker threads (default: all cores)")

    ens = argparse.ArgumentParser(add_help=False)
    ens.add_argument("--l", type=int, default=3)
    ens.add_argument("--k", type=int, default=2)

    p = argparse.ArgumentParser(prog="ldpc-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("rate", parents=[common, ens], help="design rate")
    s.add_argument("--L", type=int, required=True)
    s.set_defaults(func=cmd_rate)

    s = sub.add_parser("threshold", parents=[common, ens], help="DE BP threshold")
    s.add_argument("--L", type=int)
    s.add_argument("--uncoupled", action="store_true")
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--de-tol", type=float, default=1e-10)
    s.add_argument("--max-iters", type=int, default=10**6)
    s.set_defaults(func=cmd_threshold)

    s = sub.add_parser("simulate", parents=[common, ens], help="Monte Carlo sweep over eps")
    s.add_argument("--config", help="JSON config file")
    s.add_argument("--L", type=int, nargs="+", help="one or more chain lengths")
    s.add_argument("--M", type=int)
    s.add_argument("--eps", type=float, nargs="+")
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--codes", type=int, default=1)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--delta", type=float, default=0.9)
    s.add_argument("--stop-after-failures", type=int)
    s.add_argument("--record-sections", action="store_true", help="also write per-section residuals")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("scaling", parents=[common, ens], help="L = f(M) scaling experiment")
    s.add_argument("--rule", choices=["constant", "linear", "polynomial", "exponential"], required=True)
    s.add_argument("--L0", type=int, default=100)
    s.add_argument("--c", type=float, default=0.5)
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--a", type=float, default=1.0)
    s.add_argument("--b", type=float, default=2.0)
    s.add_argument("--offset", type=int)
    s.add_argument("--max-L", type=int, default=1 << 20)
    s.add_argument("--M", type=int, nargs="+", required=True)
    s.add_argument("--eps", type=float, nargs="+", required=True)
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--codes", type=int, default=1)
    s.add_argument("--max-iters", type=int)
    s.set_defaults(func=cmd_scaling)

    s = sub.add_parser("iterdist", parents=[common, ens], help="distribution of required iterations")
    s.add_argument("--L", type=int, nargs="+", required=True)
    s.add_argument("--M", type=int, nargs="+", required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--codes", type=int, default=1)
    s.add_argument("--delta", type=float, default=0.9)
    s.add_argument("--max-iters", type=int)
    s.set_defaults(func=cmd_iterdist)

    s = sub.add_parser("floor", parents=[common, ens], help="weight-2 error floor model and census")
    s.add_argument("--L", type=int, required=True)
    s.add_argument("--M", type=int, required=True)
    s.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.2, 0.3, 0.4])
    s.add_argument("--samples", type=int, default=0)
    s.set_defaults(func=cmd_floor)

    s = sub.add_parser("wave", parents=[common, ens], help="per-section residuals during decoding")
    s.add_argument("--L", type=int, required=True)
    s.add_argument("--M", type=int, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--stride", type=int, default=1)
    s.add_argument("--max-iters", type=int)
    s.set_defaults(func=cmd_wave)

    s = sub.add_parser("lift", parents=[common, ens], help="export one lifted code sample")
    s.add_argument("--L", type=int, required=True)
    s.add_argument("--M", type=int, required=True)
    s.add_argument("--name", default="graph.txt")
    s.set_defaults(func=cmd_lift)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        args.func(args, argv)
    except ConfigError as exc:
        print(f"ldpc-lab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"ldpc-lab: output error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except Exception as exc:  # noqa: BLE001
        print(f"ldpc-lab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

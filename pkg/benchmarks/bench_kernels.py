"""Compare the compiled and numpy kernel backends.

Two workloads: flooding erasure decodes on one lifted code, and density
evolution on a coupled protograph. Both backends are run on identical inputs
and their outputs are checked to agree before timings are reported.

    python benchmarks/bench_kernels.py [--L 20] [--M 1024] [--decodes 20] [--json out.json]
"""
import argparse
import json
import platform
import time

import numpy as np

from ldpc_lab import kernels
from ldpc_lab.decoder import bp_decode, sample_erasures
from ldpc_lab.density_evolution import de_converges
from ldpc_lab.ensemble import EnsembleParams, build_coupled_protograph, sample_graph


def _best(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_decode(params, eps, decodes, repeat, names):
    g = sample_graph(params, 1)
    masks = [sample_erasures(g.n, eps, (1, i)).erased for i in range(decodes)]
    res = {}
    for name in names:
        def work():
            return [bp_decode(g, m, backend=name).recovered_at for m in masks]
        res[name] = _best(work, repeat)
    return g.n, res


def bench_de(L, eps, iters, repeat, names):
    proto = build_coupled_protograph(EnsembleParams(3, 2, L))
    res = {}
    for name in names:
        def work():
            return de_converges(proto, eps, max_iters=iters, backend=name)
        res[name] = _best(work, repeat)
    return proto.num_edges, res


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=20)
    ap.add_argument("--M", type=int, default=1024)
    ap.add_argument("--eps", type=float, default=0.44)
    ap.add_argument("--decodes", type=int, default=20)
    ap.add_argument("--de-L", type=int, default=100)
    ap.add_argument("--de-iters", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args(argv)

    names = kernels.available()
    if "cython" not in names:
        print("compiled backend not built; timing the numpy fallback only")

    n, dec = bench_decode(EnsembleParams(3, 2, args.L, args.M), args.eps, args.decodes, args.repeat, names)
    edges, de = bench_de(args.de_L, 0.47, args.de_iters, args.repeat, names)

    if len(names) == 2:
        for a, b in zip(dec["cython"][1], dec["python"][1]):
            assert np.array_equal(a, b), "decode outputs differ between backends"
        c, p = de["cython"][1], de["python"][1]
        assert (c.verdict, c.iterations) == (p.verdict, p.iterations), "DE outcomes differ"
        assert abs(c.max_erasure - p.max_erasure) <= 1e-12

    report = {"python": platform.python_version(), "numpy": np.__version__, "workloads": []}
    rows = [("decode", f"(3,6,L={args.L},M={args.M}) n={n}, {args.decodes} decodes at eps={args.eps}", dec),
            ("de", f"(3,6,L={args.de_L}) {edges} edges, {args.de_iters} iterations at eps=0.47", de)]
    print(f"{'workload':8} {'backend':8} {'best [s]':>10} {'per unit [ms]':>14}")
    for label, desc, res in rows:
        units = args.decodes if label == "decode" else args.de_iters
        entry = {"workload": label, "description": desc, "seconds": {}}
        for name in names:
            t = res[name][0]
            entry["seconds"][name] = t
            print(f"{label:8} {name:8} {t:10.4f} {1e3 * t / units:14.4f}")
        if len(names) == 2:
            entry["speedup"] = res["python"][0] / res["cython"][0]
            print(f"{label:8} speedup  {entry['speedup']:10.1f}x   {desc}")
        report["workloads"].append(entry)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(report, fh, indent=2)


if __name__ == "__main__":
    main()

"""Monte Carlo sweeps over code samples and channel parameters.

Every trial's erasure pattern is seeded by ``(master, code id, eps index,
trial index)`` and every code by ``(master, code id)``, so results do not
depend on how trials are spread over workers. Partial results are always
merged in trial-index order.

Estimates follow the ensemble-average structure: a quantity is averaged
over trials within a code sample, then over code samples.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from .decoder import bp_decode, sample_erasures
from .ensemble import EnsembleParams, TannerGraph, sample_graph
from .seeding import TAG_BOOTSTRAP, TAG_CODE, TAG_TRIAL, as_generator, derive_seed

CHUNK = 64
BOOTSTRAP_RESAMPLES = 200
Z95 = 1.959963984540054


class ConfigError(ValueError):
    """Invalid simulation configuration."""


@dataclass
class SimConfig:
    params: EnsembleParams
    epsilons: list[float]
    trials: int = 100_000
    codes: int = 1
    seed: int = 0
    max_iters: int | None = None
    delta: float = 0.9
    record_sections: bool = False
    stop_after_failures: int | None = None

    def __post_init__(self):
        if self.params.M is None:
            raise ConfigError("params.M is required")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}")
        if not isinstance(self.codes, int) or self.codes < 1:
            raise ConfigError(f"codes must be a positive integer, got {self.codes!r}")
        if not self.epsilons:
            raise ConfigError("epsilon grid is empty")
        for e in self.epsilons:
            if not 0.0 <= e <= 1.0:
                raise ConfigError(f"epsilon {e} outside [0, 1]")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.max_iters is not None and self.max_iters < 1:
            raise ConfigError("max_iters must be positive")
        if self.stop_after_failures is not None and self.stop_after_failures < 1:
            raise ConfigError("stop_after_failures must be positive")

    # JSON config: flat object, see README for the schema
    KEYS = ("l", "k", "L", "M", "epsilons", "trials", "codes", "seed", "max_iters",
            "delta", "record_sections", "stop_after_failures")

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        unknown = set(d) - set(cls.KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"l", "k", "L", "M", "epsilons"} - set(d)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        try:
            params = EnsembleParams(d["l"], d["k"], d["L"], d["M"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        rest = {k: d[k] for k in cls.KEYS[5:] if k in d}
        eps = d["epsilons"]
        if not isinstance(eps, list) or not all(isinstance(e, (int, float)) for e in eps):
            raise ConfigError("epsilons must be a list of numbers")
        return cls(params, [float(e) for e in eps], **rest)

    @classmethod
    def from_json(cls, path: str | Path) -> "SimConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        p = self.params
        d = {"l": p.l, "k": p.k, "L": p.L, "M": p.M}
        d.update({k: v for k, v in asdict(self).items() if k != "params"})
        return d


@dataclass(frozen=True)
class TrialRecord:
    epsilon: float
    code: int
    trial: int
    success: bool
    iterations_used: int
    residual: int
    truncated: bool = False


@dataclass(eq=False)
class TrialBlock:
    """Columnar trial outcomes for one (code, eps) pair, in trial order."""

    epsilon: float
    code: int
    success: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray
    truncated: np.ndarray

    @property
    def trials(self) -> int:
        return len(self.success)

    def records(self) -> Iterator[TrialRecord]:
        for t in range(self.trials):
            yield TrialRecord(self.epsilon, self.code, t, bool(self.success[t]),
                              int(self.iterations[t]), int(self.residual[t]), bool(self.truncated[t]))


@dataclass
class IterationDistribution:
    """``phi[ell]``: fraction of trials whose decoding first succeeds at round ``ell``."""

    phi: np.ndarray
    Phi: np.ndarray
    success_counts: np.ndarray  # summed over codes
    trials: int
    failures: int

    @property
    def ell_max(self) -> int:
        return len(self.phi) - 1

    def mean(self) -> float:
        """Mean round count among successful trials."""
        ell = np.arange(len(self.phi))
        mass = self.phi.sum()
        return float((ell * self.phi).sum() / mass) if mass > 0 else math.nan

    def variance(self) -> float:
        ell = np.arange(len(self.phi))
        mass = self.phi.sum()
        if mass <= 0:
            return math.nan
        mu = (ell * self.phi).sum() / mass
        return float(((ell - mu) ** 2 * self.phi).sum() / mass)


@dataclass
class PointStats:
    epsilon: float
    trials: int
    Pb: float
    Pb_ci: float
    PB: float
    PB_ci: float
    failures: int
    truncated: int
    bit_errors: int
    dist: IterationDistribution
    ell_min: int | None
    # (round, section) residual fraction, mean over trials then codes; only with record_sections
    sections: np.ndarray | None = field(default=None, repr=False)


@dataclass
class AggregateStats:
    params: EnsembleParams
    points: list[PointStats]
    code_seeds: list[int]
    blocks: list[list[TrialBlock]] = field(repr=False, default_factory=list)

    def records(self) -> Iterator[TrialRecord]:
        for per_code in self.blocks:
            for blk in per_code:
                yield from blk.records()

    def point(self, epsilon: float) -> PointStats:
        for p in self.points:
            if p.epsilon == epsilon:
                return p
        raise KeyError(epsilon)


def iteration_distribution(records: Sequence[TrialBlock] | Sequence[TrialRecord]) -> IterationDistribution:
    """Per-code round histograms of first success, averaged over codes."""
    blocks = _as_blocks(records)
    if not blocks or sum(b.trials for b in blocks) == 0:
        raise ValueError("no trial records")
    top = max((int(b.iterations[b.success].max(initial=0)) for b in blocks), default=0)
    phis, counts = [], np.zeros(top + 1, dtype=np.int64)
    for b in blocks:
        c = np.bincount(b.iterations[b.success], minlength=top + 1)
        counts += c
        phis.append(c / b.trials)
    phi = np.mean(phis, axis=0)
    trials = sum(b.trials for b in blocks)
    return IterationDistribution(phi, np.cumsum(phi), counts, trials, int(trials - counts.sum()))


def _as_blocks(records) -> list[TrialBlock]:
    records = list(records)
    if records and isinstance(records[0], TrialBlock):
        return records
    by_code: dict[int, list[TrialRecord]] = {}
    for r in records:
        by_code.setdefault(r.code, []).append(r)
    out = []
    for code, rs in sorted(by_code.items()):
        rs.sort(key=lambda r: r.trial)
        out.append(TrialBlock(
            rs[0].epsilon, code,
            np.array([r.success for r in rs], dtype=bool),
            np.array([r.iterations_used for r in rs], dtype=np.int64),
            np.array([r.residual for r in rs], dtype=np.int64),
            np.array([r.truncated for r in rs], dtype=bool),
        ))
    return out


def min_iterations(Phi: np.ndarray, delta: float) -> int | None:
    """Smallest ``ell`` with ``Phi[ell] >= delta``; None when ``delta`` is unreachable."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    hit = np.flatnonzero(np.asarray(Phi) >= delta)
    return int(hit[0]) if hit.size else None


def tail_exponent(phi: np.ndarray, lo: int, hi: int) -> float:
    """Least-squares slope of ``log phi`` against ``log ell`` over ``lo..hi``."""
    ell = np.arange(len(phi))
    sel = (ell >= max(lo, 1)) & (ell <= hi) & (np.asarray(phi) > 0)
    if sel.sum() < 2:
        raise ValueError("fewer than two positive bins in the fit window")
    slope, _ = np.polyfit(np.log(ell[sel]), np.log(np.asarray(phi)[sel]), 1)
    return float(slope)


# -- running trials ---------------------------------------------------------

DecodeFn = Callable[[TannerGraph, float, tuple, "int | None"], tuple]


def decode_trial(graph: TannerGraph, epsilon: float, seed: tuple, max_iters: int | None):
    pat = sample_erasures(graph.n, epsilon, seed)
    tr = bp_decode(graph, pat, max_iters=max_iters)
    return tr.success, tr.iterations_used, tr.final_residual, tr.truncated


class _SectionRecorder:
    """Decode function that also sums integer per-section residuals, one buffer per chunk.

    Integer sums make the merge order-free; only chunks kept by ``run_trials``
    are merged, so the result does not depend on the worker count.
    """

    def __init__(self, sections: int):
        self.sections = sections
        self.chunks: dict[int, np.ndarray] = {}

    def __call__(self, graph, epsilon, seed, max_iters):
        tr = bp_decode(graph, sample_erasures(graph.n, epsilon, seed), max_iters=max_iters,
                       record_sections=True)
        res = tr.residual_by_section.astype(np.int64)
        cid = seed[-1] // CHUNK
        acc = self.chunks.get(cid)
        if acc is None or len(acc) < len(res):
            grown = np.empty((len(res), self.sections), dtype=np.int64)
            if acc is None:
                grown[:] = 0
            else:
                grown[: len(acc)] = acc
                grown[len(acc):] = acc[-1]
            acc = grown
        pad = np.vstack([res, np.repeat(res[-1:], len(acc) - len(res), axis=0)])
        # trials already summed hold their final state in later rounds
        self.chunks[cid] = acc + pad
        return tr.success, tr.iterations_used, tr.final_residual, tr.truncated

    def profile(self, trials: int, section_size: int) -> np.ndarray:
        keep = [self.chunks[c] for c in sorted(self.chunks) if c * CHUNK < trials]
        depth = max(len(a) for a in keep)
        total = np.zeros((depth, self.sections), dtype=np.int64)
        for a in keep:
            total[: len(a)] += a
            total[len(a):] += a[-1]
        return total / (trials * section_size)


def _run_chunk(fn: DecodeFn, graph, epsilon, seeds, max_iters):
    out = np.empty((len(seeds), 4), dtype=np.int64)
    for i, s in enumerate(seeds):
        out[i] = fn(graph, epsilon, s, max_iters)
    return out


def _default_workers() -> int:
    return os.cpu_count() or 1


def run_trials(
    graph: TannerGraph,
    epsilon: float,
    seeds: Sequence[tuple],
    max_iters: int | None = None,
    workers: int | None = None,
    stop_after_failures: int | None = None,
    decode_fn: DecodeFn = decode_trial,
) -> np.ndarray:
    """Run trials in fixed chunks; rows are (success, iterations, residual, truncated).

    With ``stop_after_failures`` the result ends at the first chunk boundary
    where the failure count reaches the target, independent of ``workers``.
    """
    workers = workers or _default_workers()
    chunks = [seeds[i:i + CHUNK] for i in range(0, len(seeds), CHUNK)]
    results: list[np.ndarray] = []
    failures = 0
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for start in range(0, len(chunks), workers):
            wave = chunks[start:start + workers]
            futs = [pool.submit(_run_chunk, decode_fn, graph, epsilon, c, max_iters) for c in wave]
            for f in futs:
                part = f.result()
                results.append(part)
                failures += int(len(part) - part[:, 0].sum())
                if stop_after_failures is not None and failures >= stop_after_failures:
                    return np.concatenate(results)
    if not results:
        return np.empty((0, 4), dtype=np.int64)
    return np.concatenate(results)


def trial_seeds(master: int, code: int, eps_index: int, trials: int) -> list[tuple]:
    return [(master, TAG_TRIAL, code, eps_index, t) for t in range(trials)]


def code_seed(master: int, code: int) -> int:
    return derive_seed(master, TAG_CODE, code)


def run_sweep(
    config: SimConfig,
    workers: int | None = None,
    decode_fn: DecodeFn = decode_trial,
    graphs: Sequence[TannerGraph] | None = None,
) -> AggregateStats:
    """Simulate every (code sample, eps) pair of ``config``.

    ``graphs`` overrides the sampled codes (for fixed, e.g. expurgated, codes).
    """
    params = config.params
    seeds = [code_seed(config.seed, c) for c in range(config.codes)]
    if graphs is None:
        graphs = [sample_graph(params, s) for s in seeds]
    blocks: list[list[TrialBlock]] = []
    profiles: list[list[np.ndarray]] = [[] for _ in config.epsilons]
    for cid, g in enumerate(graphs):
        per_code = []
        for ei, eps in enumerate(config.epsilons):
            fn = _SectionRecorder(params.num_sections) if config.record_sections else decode_fn
            rows = run_trials(g, eps, trial_seeds(config.seed, cid, ei, config.trials),
                              config.max_iters, workers, config.stop_after_failures, fn)
            per_code.append(TrialBlock(eps, cid, rows[:, 0].astype(bool), rows[:, 1],
                                       rows[:, 2], rows[:, 3].astype(bool)))
            if config.record_sections:
                profiles[ei].append(fn.profile(len(rows), params.M))
        blocks.append(per_code)
    points = [
        aggregate([blocks[c][ei] for c in range(len(graphs))], params.n, config.delta,
                  as_generator((config.seed, TAG_BOOTSTRAP, ei)))
        for ei in range(len(config.epsilons))
    ]
    if config.record_sections:
        for pt, per_code in zip(points, profiles):
            pt.sections = _mean_held(per_code)
    return AggregateStats(params, points, seeds, blocks)


def _mean_held(profiles: list[np.ndarray]) -> np.ndarray:
    """Mean of per-code (round, section) profiles, shorter ones held at their last row."""
    depth = max(len(p) for p in profiles)
    out = np.zeros((depth, profiles[0].shape[1]))
    for p in profiles:
        out[: len(p)] += p
        out[len(p):] += p[-1]
    return out / len(profiles)


def aggregate(blocks: list[TrialBlock], n: int, delta: float, rng: np.random.Generator) -> PointStats:
    """Combine per-code trial blocks at one eps into estimates with 95% intervals."""
    trials = sum(b.trials for b in blocks)
    PB = float(np.mean([1.0 - b.success.mean() for b in blocks]))
    Pb = float(np.mean([b.residual.mean() / n for b in blocks]))
    PB_ci = Z95 * math.sqrt(PB * (1.0 - PB) / trials)
    boot = np.zeros(BOOTSTRAP_RESAMPLES)
    for b in blocks:
        picks = rng.integers(0, b.trials, size=(BOOTSTRAP_RESAMPLES, b.trials))
        boot += b.residual[picks].mean(axis=1) / n
    boot /= len(blocks)
    lo, hi = np.quantile(boot, [0.025, 0.975])
    dist = iteration_distribution(blocks)
    return PointStats(
        epsilon=blocks[0].epsilon,
        trials=trials,
        Pb=Pb,
        Pb_ci=float(hi - lo) / 2.0,
        PB=PB,
        PB_ci=PB_ci,
        failures=int(sum(int((~b.success).sum()) for b in blocks)),
        truncated=int(sum(int(b.truncated.sum()) for b in blocks)),
        bit_errors=int(sum(int(b.residual.sum()) for b in blocks)),
        dist=dist,
        ell_min=min_iterations(dist.Phi, delta),
    )


# -- scaling experiments ----------------------------------------------------

class ScalingError(ValueError):
    pass


@dataclass(frozen=True)
class ScalingRule:
    """``L = f(M)`` for the scaling experiments.

    kinds: ``constant`` (L0), ``linear`` ceil(c*M), ``polynomial``
    ceil((c*M)**p), ``exponential`` ceil(a * b**(M - offset)).
    """

    kind: str
    L0: int = 1
    c: float = 0.5
    p: float = 2.0
    a: float = 1.0
    b: float = 2.0
    offset: int | None = None
    max_L: int = 1 << 20

    def __post_init__(self):
        if self.kind not in ("constant", "linear", "polynomial", "exponential"):
            raise ScalingError(f"unknown scaling rule {self.kind!r}")

    def resolve(self, Ms: Sequence[int]) -> "ScalingRule":
        """Fix the exponential offset so that L(first M) = 16 when none was given."""
        if self.kind != "exponential" or self.offset is not None:
            return self
        shift = round(math.log(16.0 / self.a) / math.log(self.b))
        return ScalingRule(self.kind, self.L0, self.c, self.p, self.a, self.b, Ms[0] - shift, self.max_L)

    def __call__(self, M: int) -> int:
        if self.kind == "constant":
            L = self.L0
        elif self.kind == "linear":
            L = math.ceil(Fraction(str(self.c)) * M)
        elif self.kind == "polynomial":
            base = Fraction(str(self.c)) * M
            if float(self.p).is_integer():
                L = math.ceil(base ** int(self.p))
            else:
                L = math.ceil(float(base) ** self.p)
        else:
            if self.offset is None:
                raise ScalingError("exponential rule needs an offset; call resolve() first")
            try:
                L = math.ceil(self.a * self.b ** (M - self.offset))
            except OverflowError as exc:
                raise ScalingError(f"L overflows for M={M}") from exc
        if L > self.max_L:
            raise ScalingError(f"L={L} for M={M} exceeds the cap {self.max_L}")
        return max(1, int(L))


@dataclass
class ScalingPoint:
    M: int
    L: int
    stats: AggregateStats


def scaling_experiment(
    rule: ScalingRule,
    Ms: Sequence[int],
    epsilons: Sequence[float],
    trials: int,
    seed: int,
    l: int = 3,
    k: int = 2,
    codes: int = 1,
    delta: float = 0.9,
    max_iters: int | None = None,
    workers: int | None = None,
) -> list[ScalingPoint]:
    rule = rule.resolve(list(Ms))
    Ls = [rule(M) for M in Ms]  # validate every point before simulating any
    out = []
    for M, L in zip(Ms, Ls):
        cfg = SimConfig(EnsembleParams(l, k, L, M), list(epsilons), trials, codes, seed,
                        max_iters=max_iters, delta=delta)
        out.append(ScalingPoint(M, L, run_sweep(cfg, workers)))
    return out


# -- output -----------------------------------------------------------------

SWEEP_COLUMNS = ["l", "k", "L", "M", "epsilon", "trials", "Pb", "Pb_ci", "PB", "PB_ci"]
PHI_COLUMNS = ["epsilon", "L", "M", "ell", "phi", "Phi"]


def _f(x: float) -> str:
    return repr(float(x))


def sweep_rows(stats: AggregateStats) -> list[list]:
    p = stats.params
    return [[p.l, p.k, p.L, p.M, _f(pt.epsilon), pt.trials, _f(pt.Pb), _f(pt.Pb_ci), _f(pt.PB), _f(pt.PB_ci)]
            for pt in stats.points]


def phi_rows(stats: AggregateStats) -> list[list]:
    p = stats.params
    rows = []
    for pt in stats.points:
        for ell, (ph, Ph) in enumerate(zip(pt.dist.phi.tolist(), pt.dist.Phi.tolist())):
            rows.append([_f(pt.epsilon), p.L, p.M, ell, _f(ph), _f(Ph)])
    return rows


def write_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)

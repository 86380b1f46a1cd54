"""Weight-2 codewords and the error floor they cause.

Two variables form a weight-2 codeword exactly when they share all ``l``
neighbouring checks; for two variables this is the same as a stopping set
of size two. Because neighbours sit at positions ``i-lhat .. i+lhat``, such
pairs always lie in one section.

The number of such pairs in a random sample is asymptotically Poisson with
mean ``lambda = k^(l-2) * C(k,2) * (2L+1) / M^(l-2)``, and the ensemble
floor is ``2 * C(k,2) * k^(l-2) * eps^2 / M^(l-1)``. Larger stopping sets
are not counted.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import comb, exp, sqrt

import numpy as np
from scipy import stats

from .ensemble import EnsembleParams, TannerGraph, sample_graph
from .seeding import TAG_SAMPLE, derive_seed


def poisson_lambda(params: EnsembleParams) -> float:
    return float(poisson_lambda_exact(params))


def poisson_lambda_exact(params: EnsembleParams) -> Fraction:
    l, k, M = params.l, params.k, params._need_M()
    if k < 2:
        raise ValueError("k must be >= 2")
    return Fraction(k ** (l - 2) * comb(k, 2) * params.num_sections, M ** (l - 2))


def clean_fraction(params: EnsembleParams) -> float:
    """Asymptotic fraction of codes without weight-2 codewords."""
    return exp(-poisson_lambda(params))


def expected_floor(params: EnsembleParams, epsilon: float) -> float:
    """Floor on the bit erasure rate from weight-2 codewords.

    Only meaningful well below the BP threshold; the caller is responsible
    for that. Independent of ``L``.
    """
    l, k, M = params.l, params.k, params._need_M()
    if np.any(np.asarray(epsilon) < 0) or np.any(np.asarray(epsilon) > 1):
        raise ValueError("epsilon must lie in [0, 1]")
    return 2 * comb(k, 2) * k ** (l - 2) * epsilon**2 / M ** (l - 1)


@dataclass(frozen=True)
class FloorModel:
    lam: float
    clean_fraction: float
    params: EnsembleParams

    @classmethod
    def of(cls, params: EnsembleParams) -> "FloorModel":
        lam = poisson_lambda(params)
        return cls(lam, exp(-lam), params)

    def floor(self, epsilon):
        return expected_floor(self.params, np.asarray(epsilon, dtype=float))

    def curve(self, epsilons) -> list[tuple[float, float]]:
        return [(float(e), float(expected_floor(self.params, float(e)))) for e in epsilons]


@dataclass
class Weight2Census:
    count: int
    pairs: list[tuple[int, int]]


def _pairs_from_groups(order: np.ndarray, starts: np.ndarray, sizes: np.ndarray) -> list[tuple[int, int]]:
    pairs = []
    for s, g in zip(starts.tolist(), sizes.tolist()):
        members = sorted(order[s:s + g].tolist())
        pairs.extend((members[a], members[b]) for a in range(g) for b in range(a + 1, g))
    return sorted(pairs)


def count_weight2(g: TannerGraph, with_pairs: bool = True) -> Weight2Census:
    """Census of variable pairs with identical neighbourhoods, scanning each section.

    Rows of one section are sorted lexicographically; equal adjacent rows
    form groups contributing ``C(size, 2)`` pairs each.
    """
    vc = np.sort(np.asarray(g.var_checks), axis=1)
    sec = g.var_section
    keys = [vc[:, d] for d in range(vc.shape[1] - 1, -1, -1)] + [sec]
    order = np.lexsort(keys)
    rows, secs = vc[order], sec[order]
    same = np.all(rows[1:] == rows[:-1], axis=1) & (secs[1:] == secs[:-1])
    if not same.any():
        return Weight2Census(0, [])
    # run boundaries among equal neighbours
    edges = np.diff(np.concatenate(([0], same.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    sizes = np.flatnonzero(edges == -1) - starts + 1
    count = int(sum(comb(int(s), 2) for s in sizes))
    pairs = _pairs_from_groups(order, starts, sizes) if with_pairs else []
    return Weight2Census(count, pairs)


def count_weight2_allpairs(g: TannerGraph) -> Weight2Census:
    """Oracle census over all variables, keyed by neighbour set (no positional argument)."""
    groups: dict[frozenset, list[int]] = {}
    for v, row in enumerate(g.var_checks.tolist()):
        groups.setdefault(frozenset(row), []).append(v)
    pairs = []
    for members in groups.values():
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                pairs.append((members[a], members[b]))
    pairs.sort()
    return Weight2Census(len(pairs), pairs)


@dataclass
class N2Distribution:
    params: EnsembleParams
    counts: np.ndarray  # N2 per sample
    lam: float
    support: np.ndarray
    empirical_pmf: np.ndarray
    poisson_pmf: np.ndarray
    chi2: float
    dof: int
    p_value: float

    @property
    def mean(self) -> float:
        return float(self.counts.mean())

    @property
    def clean_fraction(self) -> float:
        return float(np.mean(self.counts == 0))

    def clean_fraction_sigma(self) -> float:
        p = exp(-self.lam)
        return sqrt(p * (1 - p) / len(self.counts))


def sample_n2(params: EnsembleParams, num_samples: int, seed: int, workers: int | None = None) -> np.ndarray:
    """N2 of ``num_samples`` lifted codes; sample ``i`` uses seed ``(seed, i)``."""
    def one(i: int) -> int:
        g = sample_graph(params, derive_seed(seed, TAG_SAMPLE, i))
        return count_weight2(g, with_pairs=False).count

    if workers == 1:
        return np.array([one(i) for i in range(num_samples)], dtype=np.int64)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.fromiter(pool.map(one, range(num_samples)), dtype=np.int64, count=num_samples)


def chi_square_poisson(counts: np.ndarray, lam: float, min_expected: float = 5.0) -> tuple[float, int, float]:
    """Chi-square of sample counts against Pois(lam), merging bins until expected >= 5.

    The last bin absorbs the whole upper tail. Returns ``(stat, dof, p)``;
    ``dof`` is bins - 1 since ``lam`` is not fitted.
    """
    N = len(counts)
    top = int(max(counts.max(initial=0), stats.poisson.ppf(1 - 1e-12, lam) if lam > 0 else 0)) + 1
    exp_pmf = stats.poisson.pmf(np.arange(top), lam) * N
    exp_pmf[-1] += stats.poisson.sf(top - 1, lam) * N
    obs = np.bincount(np.minimum(counts, top - 1), minlength=top).astype(float)
    bins_e, bins_o = [], []
    acc_e = acc_o = 0.0
    for e, o in zip(exp_pmf, obs):
        acc_e += e
        acc_o += o
        if acc_e >= min_expected:
            bins_e.append(acc_e)
            bins_o.append(acc_o)
            acc_e = acc_o = 0.0
    if acc_e > 0 or acc_o > 0:
        if bins_e:
            bins_e[-1] += acc_e
            bins_o[-1] += acc_o
        else:
            bins_e.append(acc_e)
            bins_o.append(acc_o)
    be, bo = np.array(bins_e), np.array(bins_o)
    if len(be) < 2:
        return 0.0, 0, 1.0
    chi2 = float(((bo - be) ** 2 / be).sum())
    dof = len(be) - 1
    return chi2, dof, float(stats.chi2.sf(chi2, dof))


def empirical_n2_distribution(params: EnsembleParams, num_samples: int, seed: int,
                              workers: int | None = None) -> N2Distribution:
    if num_samples < 100:
        raise ValueError("num_samples must be at least 100")
    counts = sample_n2(params, num_samples, seed, workers)
    lam = poisson_lambda(params)
    support = np.arange(int(counts.max()) + 1)
    emp = np.bincount(counts, minlength=len(support)) / num_samples
    pois = stats.poisson.pmf(support, lam)
    chi2, dof, p = chi_square_poisson(counts, lam)
    return N2Distribution(params, counts, lam, support, emp, pois, chi2, dof, p)


class ExpurgationFailed(RuntimeError):
    def __init__(self, attempts: int, clean_observed: float):
        super().__init__(f"no code without weight-2 codewords in {attempts} attempts "
                         f"(observed clean fraction {clean_observed})")
        self.attempts = attempts
        self.clean_observed = clean_observed


@dataclass
class Expurgated:
    graph: TannerGraph
    attempts: int


def expurgate(params: EnsembleParams, seed: int, max_attempts: int = 1000) -> Expurgated:
    """Resample codes until one has no weight-2 codeword."""
    for attempt in range(1, max_attempts + 1):
        g = sample_graph(params, derive_seed(seed, TAG_SAMPLE, attempt - 1))
        if count_weight2(g, with_pairs=False).count == 0:
            return Expurgated(g, attempt)
    raise ExpurgationFailed(max_attempts, 0.0)

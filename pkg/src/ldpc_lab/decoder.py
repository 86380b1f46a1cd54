"""Instrumented flooding BP decoder for the BEC.

Transmission of the all-zero codeword is assumed; for a linear code on the
erasure channel the decoder's behaviour depends only on which positions
are erased, so this is exact.

One round updates every check-to-variable message and then every
variable-to-check message. A variable is recovered in round ``t`` when some
neighbouring check had all of its other neighbours known after round
``t - 1``. Decoding stops at the first round that recovers nothing.
"""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .ensemble import TannerGraph
from .seeding import as_generator


@dataclass(frozen=True, eq=False)
class ErasurePattern:
    erased: np.ndarray  # bool mask over [0, n)
    epsilon: float
    seed: int | tuple | None = None

    @property
    def n(self) -> int:
        return len(self.erased)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.erased)

    @classmethod
    def from_indices(cls, n: int, indices, epsilon: float = float("nan")) -> "ErasurePattern":
        mask = np.zeros(n, dtype=bool)
        mask[np.asarray(indices, dtype=np.int64)] = True
        return cls(mask, epsilon)


def sample_erasures(n: int, epsilon: float, seed: int | Sequence[int]) -> ErasurePattern:
    """Erase each of ``n`` positions independently with probability ``epsilon``."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    mask = as_generator(seed).random(n) < epsilon
    return ErasurePattern(mask, float(epsilon), seed if isinstance(seed, int) else tuple(seed))


class SectionsNotRecorded(ValueError):
    pass


@dataclass(eq=False)
class DecodeTrace:
    """Outcome of one decode.

    ``recovered_at[v]`` is 0 for bits the channel delivered, the round in
    which an erased bit was recovered, or -1 if it was never recovered.
    ``residual_by_section[i]`` counts still-erased bits per section after
    round ``recorded_rounds[i]``.
    """

    iterations_used: int
    success: bool
    truncated: bool
    final_residual: int
    recovered_at: np.ndarray
    recorded_rounds: np.ndarray | None = None
    residual_by_section: np.ndarray | None = None
    section_size: int | None = None

    @property
    def unresolved(self) -> np.ndarray:
        return np.flatnonzero(self.recovered_at < 0)

    def recovered_per_round(self) -> np.ndarray:
        """Number of bits recovered in rounds ``1 .. iterations_used``."""
        hits = self.recovered_at[self.recovered_at > 0]
        return np.bincount(hits, minlength=self.iterations_used + 1)[1:]


def bp_decode(
    g: TannerGraph,
    pattern: ErasurePattern | np.ndarray,
    max_iters: int | None = None,
    record_sections: bool = False,
    stride: int = 1,
    backend=None,
) -> DecodeTrace:
    """Decode one erasure pattern on ``g``.

    ``max_iters`` defaults to ``n + 1``, which no decode can reach. A decode
    stopped by the cap while it could still progress is flagged
    ``truncated``. With ``record_sections`` the per-section residual is kept
    for rounds ``0, stride, 2*stride, ...`` and the final round.
    """
    erased = pattern.erased if isinstance(pattern, ErasurePattern) else np.asarray(pattern, dtype=bool)
    if erased.shape != (g.n,):
        raise ValueError(f"erasure pattern has length {erased.shape}, graph has {g.n} variables")
    if max_iters is None:
        max_iters = g.n + 1
    rec, rounds, truncated = kernels.get(backend).bp_flood(
        g.var_checks, g.num_checks, np.ascontiguousarray(erased, dtype=np.uint8), int(max_iters)
    )
    residual = int(np.count_nonzero(rec < 0))
    trace = DecodeTrace(
        iterations_used=int(rounds),
        success=residual == 0,
        truncated=bool(truncated),
        final_residual=residual,
        recovered_at=rec,
    )
    if record_sections:
        _record_sections(trace, g, erased, max(1, int(stride)))
    return trace


def _record_sections(trace: DecodeTrace, g: TannerGraph, erased: np.ndarray, stride: int) -> None:
    T = trace.iterations_used
    S = g.params.num_sections
    rounds = np.arange(0, T + 1, stride)
    if rounds[-1] != T:
        rounds = np.append(rounds, T)
    # bits erased by the channel, binned by (section, round recovered); never-recovered go in bin T+1
    idx = np.flatnonzero(erased)
    when = trace.recovered_at[idx].astype(np.int64)
    when[when < 0] = T + 1
    hist = np.zeros((S, T + 2), dtype=np.int64)
    np.add.at(hist, (g.var_section[idx], when), 1)
    # residual after round t = erased bits recovered strictly later than t
    still = hist[:, ::-1].cumsum(axis=1)[:, ::-1]
    trace.recorded_rounds = rounds
    trace.residual_by_section = np.ascontiguousarray(still[:, rounds + 1].T)
    trace.section_size = g.params.M


def section_profile(trace: DecodeTrace, round_: int) -> np.ndarray:
    """Residual erasure fraction per section after ``round_``."""
    if trace.residual_by_section is None:
        raise SectionsNotRecorded("sections were not recorded for this trace")
    if not 0 <= round_ <= trace.iterations_used:
        raise ValueError(f"round {round_} outside [0, {trace.iterations_used}]")
    rows = trace.recorded_rounds
    pos = int(np.searchsorted(rows, round_))
    if pos >= len(rows) or rows[pos] != round_:
        raise SectionsNotRecorded(f"round {round_} was not recorded (stride)")
    return trace.residual_by_section[pos] / trace.section_size


def write_section_profiles(trace: DecodeTrace, path: str | Path) -> None:
    """CSV dump with columns round, section_index, residual_fraction."""
    if trace.residual_by_section is None:
        raise SectionsNotRecorded("sections were not recorded for this trace")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "section_index", "residual_fraction"])
        for t, row in zip(trace.recorded_rounds.tolist(), trace.residual_by_section):
            for s, cnt in enumerate(row.tolist()):
                w.writerow([t, s, repr(cnt / trace.section_size)])


def peel_stopping_set(g: TannerGraph, erased) -> np.ndarray:
    """Maximal stopping set inside ``erased``, by sequential peeling.

    Independent of the round-based decoder: checks with a single erased
    neighbour are resolved one at a time from a work queue. Returns the
    sorted indices left erased.
    """
    mask = np.asarray(erased, dtype=bool).copy()
    nbrs: dict[int, list[int]] = {}
    for v in np.flatnonzero(mask).tolist():
        for c in g.var_checks[v].tolist():
            nbrs.setdefault(c, []).append(v)
    unknown = {c: len(vs) for c, vs in nbrs.items()}
    queue = deque(c for c, cnt in unknown.items() if cnt == 1)
    while queue:
        c = queue.popleft()
        if unknown[c] != 1:
            continue
        v = next(u for u in nbrs[c] if mask[u])
        mask[v] = False
        for c2 in g.var_checks[v].tolist():
            unknown[c2] -= 1
            if unknown[c2] == 1:
                queue.append(c2)
    return np.flatnonzero(mask)


def is_stopping_set(g: TannerGraph, subset) -> bool:
    """True if every check touching ``subset`` touches it at least twice."""
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        return True
    counts = np.bincount(g.var_checks[subset].ravel(), minlength=g.num_checks)
    return not np.any(counts == 1)

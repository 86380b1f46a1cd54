"""Coupled protographs and their lifted Tanner graphs.

A ``(l, r=k*l, L, M)`` ensemble chains ``2L+1`` sections. Each section
holds ``k`` variable node types, and every variable type at position ``i``
sends one edge to the check type at each position ``i-lhat .. i+lhat``,
where ``lhat = (l-1)/2``. Check positions run over ``-(L+lhat) .. L+lhat``,
so the ``lhat`` outermost checks on each side have reduced degree.

Lifting makes ``M/k`` copies of the protograph and wires every edge bundle
through an independent uniform permutation.

Index conventions (0-based, dense)
----------------------------------
* section ``p = i + L`` in ``[0, 2L]``; check position ``q = j + L + lhat``
  in ``[0, 2L + 2 lhat]``.
* variable ``v = p*M + t*(M/k) + c`` for type ``t`` and copy ``c``.
* check ``q*(M/k) + c``.
* column ``d`` of ``var_checks[v]`` holds the neighbour at position
  ``q = p + d``, so rows are sorted by construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np

from .seeding import fisher_yates_rows, stream_keys


@dataclass(frozen=True)
class EnsembleParams:
    """Parameters of a ``(l, r=k*l, L, M)`` coupled ensemble.

    ``M`` may be omitted when only the protograph is needed (rate, DE).
    """

    l: int
    k: int
    L: int
    M: int | None = None

    def __post_init__(self):
        for name in ("l", "k", "L"):
            if not isinstance(getattr(self, name), (int, np.integer)):
                raise TypeError(f"{name} must be an integer")
        if self.l < 3 or self.l % 2 == 0:
            raise ValueError(f"variable degree l must be odd and >= 3, got {self.l}")
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.M is not None:
            if self.M <= 0:
                raise ValueError(f"M must be positive, got {self.M}")
            if self.M % self.k:
                raise ValueError(f"M={self.M} is not divisible by k={self.k}")

    @property
    def r(self) -> int:
        return self.k * self.l

    @property
    def lhat(self) -> int:
        return (self.l - 1) // 2

    @property
    def num_sections(self) -> int:
        return 2 * self.L + 1

    @property
    def num_check_positions(self) -> int:
        return 2 * (self.L + self.lhat) + 1

    @property
    def copies(self) -> int:
        """Lifting factor ``M/k``."""
        return self._need_M() // self.k

    @property
    def n(self) -> int:
        return self._need_M() * self.num_sections

    @property
    def num_checks(self) -> int:
        return self.num_check_positions * self.copies

    def with_M(self, M: int) -> "EnsembleParams":
        return EnsembleParams(self.l, self.k, self.L, M)

    def _need_M(self) -> int:
        if self.M is None:
            raise ValueError("M is required for lifted quantities")
        return self.M


def design_rate(params: EnsembleParams) -> Fraction:
    """Design rate ``(k-1)/k - 2*lhat/(k*(2L+1))`` as an exact fraction."""
    k, lhat, L = params.k, params.lhat, params.L
    return Fraction(k - 1, k) - Fraction(2 * lhat, k * (2 * L + 1))


@dataclass(frozen=True, eq=False)
class Protograph:
    """Bipartite multigraph of variable and check node types.

    Edges are listed as parallel arrays ``edge_var``/``edge_check`` of node
    type indices. Positions are signed chain coordinates.
    """

    var_position: np.ndarray
    var_type: np.ndarray
    check_position: np.ndarray
    edge_var: np.ndarray
    edge_check: np.ndarray

    @property
    def num_vars(self) -> int:
        return len(self.var_position)

    @property
    def num_check_types(self) -> int:
        return len(self.check_position)

    @property
    def num_edges(self) -> int:
        return len(self.edge_var)

    def var_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_var, minlength=self.num_vars)

    def check_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_check, minlength=self.num_check_types)

    def var_edge_table(self) -> np.ndarray:
        """Edge ids incident to each variable type, padded with -1."""
        return _incidence_table(self.edge_var, self.num_vars)

    def check_edge_table(self) -> np.ndarray:
        """Edge ids incident to each check type, padded with -1."""
        return _incidence_table(self.edge_check, self.num_check_types)


def _incidence_table(owner: np.ndarray, count: int) -> np.ndarray:
    deg = np.bincount(owner, minlength=count)
    table = np.full((count, max(int(deg.max(initial=0)), 1)), -1, dtype=np.int64)
    order = np.argsort(owner, kind="stable")
    starts = np.concatenate(([0], np.cumsum(deg)[:-1]))
    slot = np.arange(len(owner)) - np.repeat(starts, deg)
    table[owner[order], slot] = order
    return table


def build_coupled_protograph(params: EnsembleParams) -> Protograph:
    """Terminated coupled protograph; edges ordered by (section, type, offset)."""
    L, k, l, lhat = params.L, params.k, params.l, params.lhat
    positions = np.arange(-L, L + 1)
    var_position = np.repeat(positions, k)
    var_type = np.tile(np.arange(k), len(positions))
    check_position = np.arange(-(L + lhat), L + lhat + 1)
    edge_var = np.repeat(np.arange(len(var_position)), l)
    offsets = np.tile(np.arange(l), len(var_position))
    # check index q = (i - lhat + d) + (L + lhat) = p + d
    edge_check = (var_position[edge_var] + L) + offsets
    return Protograph(var_position, var_type, check_position, edge_var, edge_check)


def uncoupled_protograph(l: int, k: int) -> Protograph:
    """Single regular ``(l, k*l)`` protograph: k variables, l parallel edges each to one check."""
    EnsembleParams(l, k, 1)  # validates l and k
    return Protograph(
        var_position=np.zeros(k, dtype=np.int64),
        var_type=np.arange(k),
        check_position=np.zeros(1, dtype=np.int64),
        edge_var=np.repeat(np.arange(k), l),
        edge_check=np.zeros(k * l, dtype=np.int64),
    )


def protograph_violations(proto: Protograph, params: EnsembleParams) -> list[str]:
    """Check a coupled protograph against its structural invariants."""
    issues = []
    if np.any(proto.var_degrees() != params.l):
        issues.append("variable type with degree != l")
    lhat = params.lhat
    j = proto.check_position
    expected = params.k * (np.minimum(j + lhat, params.L) - np.maximum(j - lhat, -params.L) + 1)
    if np.any(proto.check_degrees() != expected):
        issues.append("check degree spectrum mismatch")
    pairs = proto.edge_var.astype(np.int64) * proto.num_check_types + proto.edge_check
    if len(np.unique(pairs)) != len(pairs):
        issues.append("parallel edges")
    dist = proto.check_position[proto.edge_check] - proto.var_position[proto.edge_var]
    if np.any(np.abs(dist) > lhat):
        issues.append("edge outside coupling window")
    return issues


@dataclass(frozen=True, eq=False)
class TannerGraph:
    """A lifted code sample. Immutable; safe to share across threads."""

    params: EnsembleParams
    var_checks: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        self.var_checks.setflags(write=False)

    @property
    def n(self) -> int:
        return self.var_checks.shape[0]

    @property
    def num_checks(self) -> int:
        return self.params.num_checks

    @cached_property
    def var_section(self) -> np.ndarray:
        return np.arange(self.n, dtype=np.int64) // self.params.M

    @cached_property
    def check_position_index(self) -> np.ndarray:
        """0-based position ``q`` of each check."""
        return np.arange(self.num_checks, dtype=np.int64) // self.params.copies

    @cached_property
    def check_degrees(self) -> np.ndarray:
        return np.bincount(self.var_checks.ravel(), minlength=self.num_checks)

    @cached_property
    def edge_var(self) -> np.ndarray:
        """Variable endpoint of every edge, in ``var_checks.ravel()`` order."""
        return np.repeat(np.arange(self.n, dtype=np.int64), self.var_checks.shape[1])

    def neighbours(self, v: int) -> tuple[int, ...]:
        return tuple(int(c) for c in self.var_checks[v])

    def same_as(self, other: "TannerGraph") -> bool:
        return self.params == other.params and np.array_equal(self.var_checks, other.var_checks)


def lift(proto: Protograph, params: EnsembleParams, seed: int) -> TannerGraph:
    """Lift ``proto`` by ``M/k`` with one seeded Fisher-Yates permutation per edge bundle.

    Bundle ``e`` (the protograph edge with that id) maps variable copy ``c``
    to check copy ``perm_e[c]``. Its permutation comes from the substream
    keyed by ``(seed, e)``, so the graph does not depend on traversal order.
    """
    if params.M is None or params.M % params.k:
        raise ValueError(f"cannot lift: M={params.M} must be a positive multiple of k={params.k}")
    if proto.num_edges != params.k * params.l * params.num_sections:
        raise ValueError("protograph does not match the ensemble parameters")
    m = params.copies
    perms = fisher_yates_rows(stream_keys(seed, proto.num_edges), m)

    # variable type u = p*k + t owns variables p*M + t*m + c
    var_base = proto.edge_var.astype(np.int64) * m
    chk_base = proto.edge_check.astype(np.int64) * m
    # protograph edges of one variable type are consecutive, offsets in order
    order = np.lexsort((proto.edge_check, proto.edge_var))
    var_base, chk_base, perms = var_base[order], chk_base[order], perms[order]

    n = params.n
    checks_of_edge = chk_base[:, None] + perms  # (edges, m)
    var_of_edge = var_base[:, None] + np.arange(m)
    var_checks = np.empty((n, params.l), dtype=np.int32)
    col = np.tile(np.arange(params.l), proto.num_vars)
    var_checks[var_of_edge, col[:, None]] = checks_of_edge
    return TannerGraph(params, var_checks, int(seed))


def sample_graph(params: EnsembleParams, seed: int) -> TannerGraph:
    return lift(build_coupled_protograph(params), params, seed)


def validate_graph(g: TannerGraph, params: EnsembleParams) -> list[dict]:
    """Return every invariant violation of ``g``; an empty list means valid."""
    out: list[dict] = []
    if params.M is None:
        return [{"kind": "missing_M"}]
    vc = np.asarray(g.var_checks, dtype=np.int64)
    if vc.ndim != 2 or vc.shape[1] != params.l:
        return [{"kind": "degree", "expected": params.l, "shape": list(vc.shape)}]
    if vc.shape[0] != params.n:
        out.append({"kind": "variable_count", "expected": params.n, "found": int(vc.shape[0])})
    nc = params.num_checks
    bad_index = (vc < 0) | (vc >= nc)
    for v, d in zip(*np.nonzero(bad_index)):
        out.append({"kind": "check_index_out_of_range", "variable": int(v), "check": int(vc[v, d])})

    m = params.copies
    sec = np.arange(vc.shape[0])[:, None] // params.M
    pos = vc // m
    offset = pos - sec  # valid window is [0, 2*lhat]
    outside = ~bad_index & ((offset < 0) | (offset > 2 * params.lhat))
    for v, d in zip(*np.nonzero(outside)):
        out.append({
            "kind": "edge_position_out_of_window",
            "variable": int(v),
            "check": int(vc[v, d]),
            "section": int(sec[v, 0]),
        })

    srt = np.sort(vc, axis=1)
    dup_edge = np.any(srt[:, 1:] == srt[:, :-1], axis=1)
    for v in np.nonzero(dup_edge)[0]:
        out.append({"kind": "parallel_edge", "variable": int(v)})
    spos = np.sort(pos, axis=1)
    dup_pos = np.any(spos[:, 1:] == spos[:, :-1], axis=1) & ~dup_edge
    for v in np.nonzero(dup_pos)[0]:
        out.append({"kind": "repeated_position", "variable": int(v)})
    return out


def write_graph(g: TannerGraph, path: str | Path) -> None:
    """Plain-text export: ``l k L M seed`` header, one line of check indices per variable."""
    p = g.params
    seed = -1 if g.seed is None else g.seed
    lines = [f"{p.l} {p.k} {p.L} {p.M} {seed}"]
    lines.extend(" ".join(map(str, row)) for row in g.var_checks.tolist())
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph(path: str | Path) -> TannerGraph:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 5:
            raise ValueError(f"{path}: bad header, expected 'l k L M seed'")
        l, k, L, M, seed = (int(x) for x in header)
        params = EnsembleParams(l, k, L, M)
        rows = np.loadtxt(fh, dtype=np.int32, ndmin=2)
    if rows.shape != (params.n, l):
        raise ValueError(f"{path}: expected {params.n} rows of {l} checks, got {rows.shape}")
    return TannerGraph(params, np.ascontiguousarray(rows), None if seed < 0 else seed)


def expected_check_degrees(params: EnsembleParams) -> np.ndarray:
    """Protograph check degree at each 0-based check position."""
    q = np.arange(params.num_check_positions)
    lo = np.maximum(q - 2 * params.lhat, 0)
    hi = np.minimum(q, 2 * params.L)
    return params.k * (hi - lo + 1)


def rate_from_counts(params: EnsembleParams) -> Fraction:
    """``(n - #checks) / n`` from lifted node counts."""
    return Fraction(params.n - params.num_checks, params.n)


__all__ = [
    "EnsembleParams",
    "Protograph",
    "TannerGraph",
    "build_coupled_protograph",
    "design_rate",
    "expected_check_degrees",
    "lift",
    "protograph_violations",
    "rate_from_counts",
    "read_graph",
    "sample_graph",
    "uncoupled_protograph",
    "validate_graph",
    "write_graph",
]

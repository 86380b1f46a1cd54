"""Density evolution over the BEC on protographs, and BP threshold search.

The recursion tracks one erasure probability per directed protograph edge.
From the all-ones start every round applies

    y(c->v) = 1 - prod_{other edges e at c} (1 - x(e))
    x(v->c) = eps * prod_{other edges e at v} y(e)

and the state decreases monotonically to a fixed point.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .ensemble import EnsembleParams, Protograph, build_coupled_protograph, uncoupled_protograph

# MAP threshold of the (3,6) ensemble as quoted alongside BP threshold 0.4294.
# Stored for reference only; it is not computed here.
EPS_MAP_3_6 = 0.4815

DEFAULT_TOL = 1e-10
DEFAULT_STALL = 1e-12
DEFAULT_MAX_ITERS = 10**6
DEFAULT_BISECT_TOL = 1e-4


class Verdict(enum.Enum):
    DECODES = "decodes"
    STUCK = "stuck"
    UNDECIDED = "undecided"


_VERDICTS = {kernels.DECODES: Verdict.DECODES, kernels.STUCK: Verdict.STUCK,
             kernels.UNDECIDED: Verdict.UNDECIDED}


class ThresholdError(RuntimeError):
    """A DE probe stayed undecided even after raising the iteration cap."""


@dataclass
class DEState:
    x: np.ndarray  # variable-to-check erasure probability per edge
    y: np.ndarray  # check-to-variable erasure probability per edge

    @classmethod
    def ones(cls, num_edges: int) -> "DEState":
        return cls(np.ones(num_edges), np.ones(num_edges))

    def copy(self) -> "DEState":
        return DEState(self.x.copy(), self.y.copy())


@dataclass
class DEOutcome:
    verdict: Verdict
    iterations: int
    max_erasure: float
    residual: float  # last per-iteration change


@dataclass
class ThresholdResult:
    epsilon_bp: float
    bracket: tuple[float, float]
    tol: float
    max_iters: int
    de_tol: float
    probes: int
    l: int | None
    k: int | None
    L: int | None

    def to_json(self) -> dict:
        return {
            "l": self.l,
            "k": self.k,
            "L": self.L,
            "epsilon_bp": self.epsilon_bp,
            "bracket": [self.bracket[0], self.bracket[1]],
            "tol": self.tol,
        }


@functools.lru_cache(maxsize=16)
def _tables(proto: Protograph):
    return proto.var_edge_table(), proto.check_edge_table()


def _check_eps(epsilon: float) -> float:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    return float(epsilon)


def de_iterate(proto: Protograph, epsilon: float, state: DEState, backend=None) -> DEState:
    """One parallel DE round; returns a new state."""
    eps = _check_eps(epsilon)
    ve, ce = _tables(proto)
    out = state.copy()
    kernels.get(backend).de_step(ve, ce, eps, out.x, out.y)
    return out


def de_converges(
    proto: Protograph,
    epsilon: float,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    stall: float = DEFAULT_STALL,
    backend=None,
) -> DEOutcome:
    """Run DE from all-ones until the largest edge erasure probability drops below
    ``tol`` (decodes), the per-round change drops below ``stall`` (stuck), or
    ``max_iters`` rounds pass (undecided)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    eps = _check_eps(epsilon)
    ve, ce = _tables(proto)
    st = DEState.ones(proto.num_edges)
    it, mx, change, code = kernels.get(backend).de_run(ve, ce, eps, st.x, st.y, tol, stall, int(max_iters))
    return DEOutcome(_VERDICTS[code], it, mx, change)


def bp_threshold(
    proto: Protograph | tuple[int, int] | EnsembleParams,
    tol_bisect: float = DEFAULT_BISECT_TOL,
    tol_de: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    stall: float = DEFAULT_STALL,
    max_retries: int = 2,
    backend=None,
) -> ThresholdResult:
    """Bisect on ``eps`` in [0, 1] for the BP threshold.

    ``proto`` is a protograph, an ``EnsembleParams`` (coupled chain) or an
    ``(l, r)`` pair for the uncoupled regular ensemble. An undecided probe is
    retried with ten times the iteration cap; if it stays undecided a
    :class:`ThresholdError` is raised.
    """
    if tol_bisect <= 0 or tol_de <= 0:
        raise ValueError("tolerances must be positive")
    l = k = L = None
    if isinstance(proto, EnsembleParams):
        l, k, L = proto.l, proto.k, proto.L
        graph = build_coupled_protograph(proto)
    elif isinstance(proto, tuple):
        l, r = proto
        if r % l:
            raise ValueError(f"check degree {r} is not a multiple of l={l}")
        k = r // l
        graph = uncoupled_protograph(l, k)
    else:
        graph = proto

    def probe(eps: float) -> bool:
        cap = max_iters
        for _ in range(max_retries + 1):
            res = de_converges(graph, eps, tol_de, cap, stall, backend)
            if res.verdict is not Verdict.UNDECIDED:
                return res.verdict is Verdict.DECODES
            cap *= 10
        raise ThresholdError(f"DE undecided at eps={eps} after {cap // 10} iterations")

    lo, hi = 0.0, 1.0
    probes = 0
    while hi - lo > tol_bisect:
        mid = 0.5 * (lo + hi)
        probes += 1
        if probe(mid):
            lo = mid
        else:
            hi = mid
    return ThresholdResult(0.5 * (lo + hi), (lo, hi), tol_bisect, max_iters, tol_de, probes, l, k, L)


def scalar_recursion(epsilon: float, l: int, r: int, x: float) -> float:
    """Uncoupled regular ``(l, r)`` DE map ``x -> eps (1 - (1-x)^(r-1))^(l-1)``."""
    return epsilon * (1.0 - (1.0 - x) ** (r - 1)) ** (l - 1)


def reflection_permutation(params: EnsembleParams) -> np.ndarray:
    """Edge permutation induced by position reflection ``i -> -i`` on the coupled protograph."""
    k, l, S = params.k, params.l, params.num_sections
    e = np.arange(k * l * S)
    p, rest = np.divmod(e, k * l)
    t, d = np.divmod(rest, l)
    return ((S - 1 - p) * k + t) * l + (l - 1 - d)

"""Seed derivation and counter-based random streams.

All randomness in the package flows from one integer master seed. Sub-seeds
are derived by hashing a tuple of integer keys with
:class:`numpy.random.SeedSequence`, so the stream a work item sees depends
only on its keys and never on the order in which items are scheduled.

Lifting needs one independent stream per edge bundle. Those are produced by
a splitmix64 counter generator evaluated on numpy ``uint64`` arrays: output
``s`` of the stream keyed ``b`` is ``mix(key_b + (s + 1) * GAMMA)``. This is
vectorizable across bundles and trivially reproducible in any language.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# Domain tags keep derived seeds for different purposes apart.
TAG_CODE = 0xC0DE
TAG_TRIAL = 0x7A1A
TAG_BOOTSTRAP = 0xB007
TAG_SAMPLE = 0x5A3B


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64(keys: np.ndarray, counter: int) -> np.ndarray:
    """Output number ``counter`` of the splitmix64 streams started at ``keys``."""
    keys = np.asarray(keys, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(keys + np.uint64(counter + 1) * GAMMA)


def stream_keys(seed: int, count: int) -> np.ndarray:
    """Keys for ``count`` independent substreams of ``seed``.

    Substream ``b`` is keyed by output ``b`` of the splitmix64 stream seeded
    with the mixed master seed.
    """
    base = _mix(np.array([int(seed) & MASK64], dtype=np.uint64))
    with np.errstate(over="ignore"):
        ids = np.arange(1, count + 1, dtype=np.uint64)
        return _mix(base + ids * GAMMA)


def uniform53(bits: np.ndarray) -> np.ndarray:
    """Map uint64 words to doubles in [0, 1) using the top 53 bits."""
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def derive_seed(*keys: int) -> int:
    """Hash integer keys into a 64-bit seed (order-sensitive)."""
    for key in keys:
        if int(key) < 0:
            raise ValueError(f"seed keys must be non-negative, got {key}")
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def as_generator(seed: int | Sequence[int]) -> np.random.Generator:
    """A PCG64 generator seeded from an int or a tuple of int keys."""
    if isinstance(seed, (int, np.integer)):
        entropy: int | list[int] = int(seed)
    else:
        entropy = [int(s) for s in seed]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def fisher_yates_rows(keys: np.ndarray, size: int) -> np.ndarray:
    """One uniform permutation of ``range(size)`` per key, by Fisher-Yates.

    Row ``b`` is shuffled with the stream keyed ``keys[b]``; step ``s``
    (from ``size - 1`` down to 1) consumes stream output ``s`` and swaps
    slot ``s`` with slot ``floor(u * (s + 1))``.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    nrows = keys.shape[0]
    perm = np.tile(np.arange(size, dtype=np.int32), (nrows, 1))
    rows = np.arange(nrows)
    for s in range(size - 1, 0, -1):
        j = (uniform53(splitmix64(keys, s)) * (s + 1)).astype(np.int64)
        tail = perm[:, s].copy()
        perm[:, s] = perm[rows, j]
        perm[rows, j] = tail
    return perm

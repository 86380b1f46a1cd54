"""Numpy implementations of the hot loops.

Same contracts as the compiled ``_ckernels`` module; used when the
extension is unavailable or ``LDPC_LAB_PURE_PYTHON`` is set.
"""
from __future__ import annotations

import numpy as np

NAME = "python"

DECODES, STUCK, UNDECIDED = 0, 1, 2


def bp_flood(var_checks, num_checks, erased, max_iters):
    """Flooding erasure decoder.

    Returns ``(recovered_at, rounds, truncated)``. ``recovered_at[v]`` is 0
    for a bit the channel delivered, ``t >= 1`` if it was recovered in round
    ``t`` and -1 if it is still erased at the end.
    """
    var_checks = np.asarray(var_checks)
    n, l = var_checks.shape
    erased = np.asarray(erased, dtype=bool)
    recovered_at = np.where(erased, -1, 0).astype(np.int32)
    edge_check = var_checks.ravel()
    edge_var = np.repeat(np.arange(n), l)
    unknown = erased.copy()
    remaining = int(unknown.sum())
    rounds = 0
    truncated = False
    while remaining:
        unknown_edge = unknown[edge_var]
        counts = np.bincount(edge_check[unknown_edge], minlength=num_checks)
        hit = unknown_edge & (counts[edge_check] == 1)
        if not hit.any():
            break
        if rounds >= max_iters:
            truncated = True
            break
        rounds += 1
        newly = np.unique(edge_var[hit])
        recovered_at[newly] = rounds
        unknown[newly] = False
        remaining -= len(newly)
    return recovered_at, rounds, truncated


def _exclusive_products(vals):
    """Row-wise product of all other entries, via prefix and suffix products."""
    rows, width = vals.shape
    pre = np.ones((rows, width))
    suf = np.ones((rows, width))
    if width > 1:
        pre[:, 1:] = np.cumprod(vals[:, :-1], axis=1)
        suf[:, :-1] = np.cumprod(vals[:, :0:-1], axis=1)[:, ::-1]
    return pre * suf


def de_step(var_edges, chk_edges, eps, x, y):
    """One DE round in place: check update then variable update.

    Returns ``(max_x, max_change)`` after the round.
    """
    x_pad = np.append(x, 0.0)
    a = 1.0 - x_pad[chk_edges]
    prod = _exclusive_products(a)
    mask = chk_edges >= 0
    y[chk_edges[mask]] = 1.0 - prod[mask]

    y_pad = np.append(y, 1.0)
    b = y_pad[var_edges]
    prod = _exclusive_products(b)
    mask = var_edges >= 0
    new = eps * prod[mask]
    idx = var_edges[mask]
    change = float(np.max(np.abs(new - x[idx]), initial=0.0))
    x[idx] = new
    return float(np.max(x, initial=0.0)), change


def de_run(var_edges, chk_edges, eps, x, y, tol, stall, max_iters):
    """Iterate DE in place until a verdict.

    Returns ``(iterations, max_x, last_change, verdict)``.
    """
    it = 0
    max_x, change = float(np.max(x, initial=0.0)), np.inf
    while it < max_iters:
        max_x, change = de_step(var_edges, chk_edges, eps, x, y)
        it += 1
        if max_x < tol:
            return it, max_x, change, DECODES
        if change < stall:
            return it, max_x, change, STUCK
    return it, max_x, change, UNDECIDED

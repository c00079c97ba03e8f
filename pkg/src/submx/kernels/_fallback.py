"""Vectorized NumPy versions of the row-set scans (same contracts as ``_ckernels``)."""
from __future__ import annotations

import itertools

import numpy as np

CHUNK = 4096


def _row_set_chunks(n: int, k: int):
    combos = itertools.combinations(range(n), k)
    while True:
        block = list(itertools.islice(combos, CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.intp)


def census_scan(W: np.ndarray, k: int):
    W = np.ascontiguousarray(W, dtype=np.float64)
    n = W.shape[0]
    if k < 1 or k > n:
        raise ValueError("need 1 <= k <= n")
    opt_r, opt_c, tied_r = [], [], []
    for combos in _row_set_chunks(n, k):
        c = combos.shape[0]
        cs = W[combos].sum(axis=1)
        order = np.argsort(-cs, axis=1, kind="stable")
        if k < n:
            r = np.arange(c)
            tied = cs[r, order[:, k - 1]] == cs[r, order[:, k]]
        else:
            tied = np.zeros(c, dtype=bool)
        J = np.sort(order[:, :k], axis=1)
        rs = W[:, J].sum(axis=2).T
        mask = np.zeros((c, n), dtype=bool)
        np.put_along_axis(mask, combos, True, axis=1)
        min_in = np.where(mask, rs, np.inf).min(axis=1)
        max_out = np.where(mask, -np.inf, rs).max(axis=1)
        opt = (min_in >= max_out) & ~tied
        opt_r.append(combos[opt])
        opt_c.append(J[opt])
        tied_r.append(combos[tied])
    cat = lambda parts: np.concatenate(parts).astype(np.int32).reshape(-1, k)
    return cat(opt_r), cat(opt_c), cat(tied_r)


def global_max_scan(W: np.ndarray, k: int):
    W = np.ascontiguousarray(W, dtype=np.float64)
    n = W.shape[0]
    if k < 1 or k > n:
        raise ValueError("need 1 <= k <= n")
    best, best_rows, best_cs = -np.inf, None, None
    for combos in _row_set_chunks(n, k):
        cs = W[combos].sum(axis=1)
        totals = -np.sort(-cs, axis=1)[:, :k].sum(axis=1)
        i = int(np.argmax(totals))
        if best_rows is None or totals[i] > best:
            best, best_rows, best_cs = float(totals[i]), combos[i].copy(), cs[i]
    cols = np.sort(np.argsort(-best_cs, kind="stable")[:k])
    return best, best_rows, cols

"""Pair-classification kernels behind the rank-correlation statistics.

A WMT-scale evaluation compares every system against every other system on
every segment (54 systems x ~2,000 segments x 3 language pairs is ~8.6M
comparisons), which is the one numeric inner loop in this package worth
compiling. The numba kernel is used by default; set ``GEMBA_DISABLE_NUMBA=1``
to force the pure-numpy fallback (also taken automatically when numba is
unavailable). Both paths return identical integer counts.

Inputs are dense integer rank codes per comparison group (one group per
segment), concatenated, with ``offsets[k]:offsets[k+1]`` delimiting group k.
Counts returned, over unordered within-group pairs:

    [concordant, discordant, metric-only ties, gold-only ties, both tied]
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False


def _count_pairs_py(metric, gold, offsets):
    counts = np.zeros(5, dtype=np.int64)
    for k in range(len(offsets) - 1):
        start = offsets[k]
        stop = offsets[k + 1]
        for i in range(start, stop):
            for j in range(i + 1, stop):
                dm = metric[i] - metric[j]
                dg = gold[i] - gold[j]
                if dm == 0 and dg == 0:
                    counts[4] += 1
                elif dm == 0:
                    counts[2] += 1
                elif dg == 0:
                    counts[3] += 1
                elif (dm > 0) == (dg > 0):
                    counts[0] += 1
                else:
                    counts[1] += 1
    return counts


if HAS_NUMBA:
    _count_pairs_njit = njit(cache=True)(_count_pairs_py)


def _count_pairs_numpy(metric, gold, offsets):
    counts = np.zeros(5, dtype=np.int64)
    for k in range(len(offsets) - 1):
        group_m = metric[offsets[k] : offsets[k + 1]]
        group_g = gold[offsets[k] : offsets[k + 1]]
        n = group_m.shape[0]
        if n < 2:
            continue
        iu, ju = np.triu_indices(n, k=1)
        dm = np.sign(group_m[iu] - group_m[ju])
        dg = np.sign(group_g[iu] - group_g[ju])
        m_tied = dm == 0
        g_tied = dg == 0
        counts[0] += int(np.count_nonzero(~m_tied & ~g_tied & (dm == dg)))
        counts[1] += int(np.count_nonzero(~m_tied & ~g_tied & (dm != dg)))
        counts[2] += int(np.count_nonzero(m_tied & ~g_tied))
        counts[3] += int(np.count_nonzero(~m_tied & g_tied))
        counts[4] += int(np.count_nonzero(m_tied & g_tied))
    return counts


def numba_enabled() -> bool:
    return HAS_NUMBA and os.environ.get("GEMBA_DISABLE_NUMBA", "") not in ("1", "true", "yes")


def count_pairs(
    metric: np.ndarray, gold: np.ndarray, offsets: np.ndarray
) -> np.ndarray:
    """Classify all within-group pairs; see the module docstring for layout."""
    metric = np.ascontiguousarray(metric, dtype=np.int64)
    gold = np.ascontiguousarray(gold, dtype=np.int64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    if numba_enabled():
        return _count_pairs_njit(metric, gold, offsets)
    return _count_pairs_numpy(metric, gold, offsets)

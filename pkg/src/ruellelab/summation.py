"""Compensated (Kahan) row sums with a fixed, data-independent order."""

from __future__ import annotations

import numpy as np


def _kahan_columns(a):
    # sum a[:, j] over j, left to right, with Kahan compensation per row
    s = np.zeros(a.shape[:-1], dtype=a.dtype)
    comp = np.zeros_like(s)
    for j in range(a.shape[-1]):
        y = a[..., j] - comp
        t = s + y
        comp = (t - s) - y
        s = t
    return s


def kahan_rows(a, lanes: int = 64):
    """Compensated sum of each row of a 2-D array.

    Long rows are cut into ``lanes`` contiguous blocks; each block is summed
    left to right with compensation and the block sums are then combined in
    block order, so the reduction order is a fixed two-level traversal of the
    row and never depends on how rows are batched.
    """
    a = np.asarray(a)
    if a.ndim == 1:
        a = a[None, :]
    n = a.shape[1]
    if n <= 4 * lanes:
        return _kahan_columns(a)
    width = -(-n // lanes)
    pad = width * lanes - n
    if pad:
        a = np.concatenate([a, np.zeros((a.shape[0], pad), dtype=a.dtype)], axis=1)
    blocks = a.reshape(a.shape[0], lanes, width)
    return _kahan_columns(_kahan_columns(blocks))


def kahan_sum(values):
    return kahan_rows(np.asarray(values)[None, :])[0]


def segment_sums(values, seg, nseg):
    """Compensated sums of ``values`` grouped by ``seg`` (sorted, contiguous groups)."""
    values = np.asarray(values)
    counts = np.bincount(seg, minlength=nseg)
    width = int(counts.max()) if counts.size else 0
    if width == 0:
        return np.zeros(nseg, dtype=values.dtype)
    if np.all(counts == width):
        return kahan_rows(values.reshape(nseg, width))
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    pos = np.arange(values.size) - np.repeat(starts, counts)
    rect = np.zeros((nseg, width), dtype=values.dtype)
    rect[seg, pos] = values
    return kahan_rows(rect)

"""Batched polynomial root finding (Aberth-Ehrlich) and root clustering.

Coefficient arrays are ascending: ``c[..., k]`` multiplies ``w**k``.

Every row of a batch is iterated independently and frozen once it has
converged, so the roots returned for one polynomial do not depend on which
other polynomials share its batch.  The tree summation in
:mod:`ruellelab.transfer` relies on this for reproducible output.
"""

from __future__ import annotations

import numpy as np

from .errors import RootSolveFailure

EPS = np.finfo(float).eps


def horner(c, w):
    """Evaluate ascending coefficients ``c`` (shape (B, n+1)) at ``w`` (shape (B, m))."""
    p = np.broadcast_to(c[:, -1:], w.shape).astype(complex)
    for k in range(c.shape[1] - 2, -1, -1):
        p = p * w + c[:, k:k + 1]
    return p


def horner_with_derivative(c, w):
    n = c.shape[1] - 1
    p = np.broadcast_to(c[:, -1:], w.shape).astype(complex)
    dp = np.zeros_like(p)
    for k in range(n - 1, -1, -1):
        dp = dp * w + p
        p = p * w + c[:, k:k + 1]
    return p, dp


def backward_error(c, w):
    """Relative residual |p(w)| / sum |c_k| |w|^k, per root."""
    num = np.abs(horner(c, w))
    den = horner(np.abs(c).astype(complex), np.abs(w).astype(complex)).real
    return num / np.maximum(den, np.finfo(float).tiny)


def _quadratic(c):
    # monic w^2 + b w + q, cancellation-free form
    b = c[:, 1]
    q = c[:, 0]
    sq = np.sqrt(b * b - 4.0 * q)
    flip = (b.real * sq.real + b.imag * sq.imag) < 0
    sq = np.where(flip, -sq, sq)
    big = -(b + sq) / 2.0
    safe = np.where(big == 0, 1.0, big)
    small = np.where(big == 0, 0.0, q / safe)
    return np.stack([big, small], axis=1)


def _initial_guess(a, attempt):
    B, n1 = a.shape
    d = n1 - 1
    centre = -a[:, d - 1] / d
    k = np.arange(d)
    with np.errstate(divide="ignore"):
        mags = np.abs(a[:, :d]) ** (1.0 / (d - k))
    radius = np.max(mags, axis=1) * (0.5 * 1.3 ** attempt) + 1e-3
    angles = 2.0 * np.pi * k / d + 0.7 + 0.31 * attempt
    return centre[:, None] + radius[:, None] * np.exp(1j * angles)[None, :]


def _aberth_rows(a, w, max_iter):
    B, d = w.shape
    done = np.zeros(B, dtype=bool)
    eye = np.eye(d, dtype=bool)
    for _ in range(max_iter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        wa = w[act]
        p, dp = horner_with_derivative(a[act], wa)
        zero = p == 0
        dp = np.where(dp == 0, EPS, dp)
        newton = np.where(zero, 0.0, p / dp)
        diff = wa[:, :, None] - wa[:, None, :]
        diff[:, eye] = np.inf
        s = np.sum(1.0 / diff, axis=2)
        corr = newton / (1.0 - newton * s)
        corr = np.where(np.isfinite(corr), corr, 0.0)
        w[act] = wa - corr
        small = np.abs(corr) <= 4.0 * EPS * np.maximum(np.abs(wa), 1.0)
        done[act[np.all(small, axis=1)]] = True
    return w, done


def aberth(c, max_iter=120, restarts=4, accept=1e-11):
    """Roots of each row of ``c`` (ascending, nonzero leading coefficient).

    Returns ``(roots, ok)`` where ``ok`` flags rows whose roots all have
    backward error below ``accept``.  Rows that fail are restarted from a
    rotated, enlarged starting circle.
    """
    c = np.atleast_2d(np.asarray(c, dtype=complex))
    d = c.shape[1] - 1
    if d < 1:
        return np.zeros((c.shape[0], 0), dtype=complex), np.ones(c.shape[0], bool)
    a = c / c[:, -1:]
    if d == 1:
        return -a[:, :1].copy(), np.ones(c.shape[0], bool)
    if d == 2:
        w = _quadratic(a)
        return w, np.all(backward_error(a, w) < accept, axis=1)

    w = _initial_guess(a, 0)
    w, _ = _aberth_rows(a, w, max_iter)
    ok = np.all(backward_error(a, w) < accept, axis=1)
    for attempt in range(1, restarts + 1):
        bad = np.flatnonzero(~ok)
        if bad.size == 0:
            break
        wb = _initial_guess(a[bad], attempt)
        wb, _ = _aberth_rows(a[bad], wb, max_iter)
        w[bad] = wb
        ok[bad] = np.all(backward_error(a[bad], wb) < accept, axis=1)
    return w, ok


def trim(c, rel=1e-13):
    """Drop negligible leading coefficients (relative to the largest)."""
    c = np.asarray(c, dtype=complex)
    if c.size == 0:
        return c
    scale = np.max(np.abs(c))
    if scale == 0:
        return c[:1] * 0
    n = c.size
    while n > 1 and abs(c[n - 1]) <= rel * scale:
        n -= 1
    return c[:n]


def poly_roots(c, rel=1e-13):
    """Finite roots of a single polynomial plus the count of roots at infinity.

    The nominal degree is ``len(c) - 1``; leading coefficients that vanish to
    relative precision ``rel`` are counted as roots at infinity.
    """
    c = np.asarray(c, dtype=complex)
    nominal = c.size - 1
    t = trim(c, rel)
    if np.all(t == 0):
        raise RootSolveFailure("zero polynomial has no isolated roots")
    n_inf = nominal - (t.size - 1)
    # exact roots at the origin come off first
    k = int(np.argmax(t != 0))
    zeros, t = np.zeros(k, dtype=complex), t[k:]
    if t.size == 1:
        return zeros, n_inf
    w, ok = aberth(t[None, :])
    w = w[0]
    if not ok[0]:
        # multiple roots slow Aberth to a crawl; companion eigenvalues handle them
        w = np.roots(t[::-1]).astype(complex)
        if not np.all(backward_error(t[None, :], w[None, :]) < 1e-9):
            raise RootSolveFailure(f"root solve did not converge for degree {t.size - 1}")
    return np.concatenate([zeros, w]), n_inf


def cluster_roots(roots, tol, scale=1.0):
    """Group numerically coincident roots into (point, multiplicity) pairs.

    Clusters are merged greedily by increasing distance; a merged cluster of
    size m is kept only if its diameter stays below ``tol**(1/m)`` (times
    ``max(scale, |root|)``), the usual spread of an m-fold root under a
    perturbation of size ``tol``.
    """
    roots = list(np.asarray(roots, dtype=complex))
    n = len(roots)
    members = [[i] for i in range(n)]
    owner = list(range(n))
    pairs = sorted(
        (abs(roots[i] - roots[j]), i, j) for i in range(n) for j in range(i + 1, n)
    )
    for dist, i, j in pairs:
        a, b = owner[i], owner[j]
        if a == b:
            continue
        merged = members[a] + members[b]
        pts = [roots[k] for k in merged]
        diam = max(abs(p - q) for p in pts for q in pts)
        size = max(scale, max(abs(p) for p in pts))
        if diam < tol ** (1.0 / len(merged)) * size:
            members[a] = merged
            members[b] = []
            for k in merged:
                owner[k] = a
    out = []
    for group in members:
        if group:
            pts = np.array([roots[k] for k in group])
            out.append((complex(pts.mean()), len(group)))
    return out

"""Ruelle (push-forward) and Beltrami (pull-back) operators of a rational map.

The Ruelle operator acts on quadratic differentials phi(z) dz^2 by

    (R_* phi)(z) = sum over R(y) = z of phi(y) / R'(y)^2,

and its n-th iterate is a sum over the depth-n preimage tree of z, each leaf
weighted by 1 / ((R^n)'(y))^2 = prod 1/R'(y_k)^2 along its branch.  The tree
is built one level at a time and every level's sum is kept, so the Cesaro
averages of all orders up to n cost one tree.

The Beltrami operator acts on line fields by mu -> mu(R) conj(R') / R'.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import quadrature
from .errors import BudgetExceeded, CriticalFiber, CriticalPoint, PoleHit, RootSolveFailure
from .rational_map import INFINITY, RationalMap, critical_values, is_infinite
from .summation import kahan_rows, segment_sums

CRITICAL_EXCLUSION = 1e-6
DEFAULT_NODE_BUDGET = 2 ** 21
CHUNK_NODES = 2 ** 20


class QuadDifferential:
    """A quadratic differential phi(z) dz^2 given by a pointwise rule.

    ``rule`` is either a pair ``(num, den)`` of ascending coefficient lists
    or a vectorised callable.  ``poles`` records ``(location, order)`` pairs,
    with infinity allowed as a location.
    """

    def __init__(self, rule, poles=(), label: str = ""):
        if callable(rule):
            self._fn = rule
            self.num = self.den = None
        else:
            num, den = rule
            self.num = np.atleast_1d(np.asarray(num, dtype=complex))
            self.den = np.atleast_1d(np.asarray(den, dtype=complex))
            self._fn = None
        self.poles = tuple((complex(p), int(k)) for p, k in poles)
        self.label = label
        self._factors = None

    @classmethod
    def from_poles(cls, points, numerator=(1.0,), label: str = ""):
        """numerator(z) / prod (z - p) over the finite ``points`` (simple poles)."""
        pts = [complex(p) for p in points if not is_infinite(p)]
        den = np.array([1.0 + 0j])
        for p in pts:
            den = npoly.polymul(den, np.array([-p, 1.0]))
        num = np.atleast_1d(np.asarray(numerator, dtype=complex))
        poles = [(p, 1) for p in pts]
        k = (len(num) - 1) - len(pts) + 4
        if k > 0:
            poles.append((INFINITY, k))
        q = cls((num, den), poles, label)
        q._factors = (num, pts)
        return q

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self._fn is not None:
            return np.asarray(self._fn(z), dtype=complex)
        if self._factors is not None:
            num, pts = self._factors
            out = npoly.polyval(z, num)
            with np.errstate(divide="ignore", invalid="ignore"):
                for p in pts:
                    out = out / (z - p)
            return out
        with np.errstate(divide="ignore", invalid="ignore"):
            return npoly.polyval(z, self.num) / npoly.polyval(z, self.den)

    def unit(self, z):
        """phi / |phi| evaluated without overflow for product-form rules."""
        z = np.asarray(z, dtype=complex)
        if self._factors is not None:
            num, pts = self._factors
            n = npoly.polyval(z, num)
            out = n / np.abs(n)
            for p in pts:
                d = z - p
                out = out * (np.conj(d) / np.abs(d))
            return out
        v = self(z)
        return v / np.abs(v)

    @property
    def finite_poles(self):
        return [p for p, _ in self.poles if not is_infinite(p)]

    def pole_order_at_infinity(self) -> int:
        for p, k in self.poles:
            if is_infinite(p):
                return k
        return 0

    def scaled(self, c):
        c = complex(c)
        if self.num is not None:
            q = QuadDifferential((c * self.num, self.den), self.poles, self.label)
            if self._factors is not None:
                q._factors = (c * self._factors[0], self._factors[1])
            return q
        return QuadDifferential(lambda z: c * self._fn(z), self.poles, self.label)

    def in_Q(self, punctures, tol: float = 1e-9) -> bool:
        """Simple poles only, all at the given punctures (infinity included)."""
        for p, k in self.poles:
            if k > 1:
                return False
            if not any(
                (is_infinite(p) and is_infinite(q))
                or (not is_infinite(p) and not is_infinite(q) and abs(p - q) < tol)
                for q in punctures
            ):
                return False
        return True

    def __repr__(self):
        return f"QuadDifferential({self.label or 'unnamed'}, poles={len(self.poles)})"


def combine(coeffs, phis, label: str = "") -> QuadDifferential:
    """Linear combination sum c_k phi_k."""
    coeffs = [complex(c) for c in coeffs]
    phis = list(phis)
    poles = {}
    for q in phis:
        for p, k in q.poles:
            poles[p] = max(poles.get(p, 0), k)

    def rule(z):
        out = np.zeros(np.shape(z), dtype=complex)
        for c, q in zip(coeffs, phis):
            if c != 0:
                out = out + c * q(z)
        return out

    return QuadDifferential(rule, list(poles.items()), label)


class LineField:
    """A Beltrami coefficient mu with |mu| <= 1, given pointwise."""

    def __init__(self, rule, support=None, label: str = ""):
        self.rule = rule
        self.support = support
        self.label = label

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        v = np.asarray(self.rule(z), dtype=complex)
        v = np.broadcast_to(v, z.shape)
        if self.support is not None:
            v = np.where(self.support(z), v, 0)
        return v

    def audit(self, samples: int = 10_000, seed: int = 0) -> float:
        """Sampled essential sup of |mu| over the sphere (uniform spherical law)."""
        rng = np.random.default_rng(seed)
        h = rng.uniform(-1, 1, samples)
        rad = np.sqrt((1 + h) / (1 - h))
        z = rad * np.exp(2j * np.pi * rng.random(samples))
        vals = np.abs(self(z))
        vals = vals[np.isfinite(vals)]
        return float(vals.max()) if vals.size else 0.0

    @classmethod
    def constant(cls, k, label: str = ""):
        k = complex(k)
        return cls(lambda z: np.full(np.shape(z), k), label=label or f"const({k})")


@dataclass
class CesaroSeries:
    n_values: list
    values: list
    target: str = ""
    errors: list = field(default_factory=list)
    method: str = ""

    def __post_init__(self):
        if len(self.n_values) != len(self.values):
            raise ValueError("n_values and values differ in length")
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ValueError("n_values must be strictly increasing")

    def rows(self):
        for i, (n, v) in enumerate(zip(self.n_values, self.values)):
            v = complex(v)
            err = self.errors[i] if i < len(self.errors) else ""
            yield [n, repr(v.real), repr(v.imag), repr(abs(v)), repr(err) if err != "" else ""]

    def to_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "re", "im", "abs", "err"])
            w.writerows(self.rows())


# ---------------------------------------------------------------------------
# preimage tree


@dataclass
class TreeLevels:
    """Per-point level sums S_k = (R_*^k phi)(z), k = 0..depth."""

    levels: np.ndarray          # shape (npts, depth + 1)
    pruned_mass: np.ndarray     # shape (npts,)

    def cesaro(self, n):
        """Cesaro average of order n, (1/n) sum_{k<n} S_k, per point."""
        return kahan_rows(self.levels[:, :n]) / n


def _check_nodes(nodes, crit_vals, phi, tol, level):
    if crit_vals.size:
        dist = np.min(np.abs(nodes[:, None] - crit_vals[None, :]), axis=1)
        bad = dist < tol
        if np.any(bad):
            raise CriticalFiber(
                f"tree node {nodes[bad][0]} at level {level} lies within {tol} of a critical value"
            )
    poles = np.array(phi.finite_poles, dtype=complex)
    if poles.size:
        dist = np.min(np.abs(nodes[:, None] - poles[None, :]), axis=1)
        bad = dist < tol
        if np.any(bad):
            raise PoleHit(f"preimage {nodes[bad][0]} lies within {tol} of a pole of phi")


def _tree_chunk(R, phi, z, depth, prune_eps, check, crit_vals, tol):
    npts = z.size
    d = R.degree
    levels = np.zeros((npts, depth + 1), dtype=complex)
    pruned = np.zeros(npts)
    if check:
        _check_nodes(z, crit_vals, phi, tol, 0)
    levels[:, 0] = phi(z)
    y = z.copy()
    wgt = np.ones(npts, dtype=complex)
    seg = np.arange(npts)
    for k in range(1, depth + 1):
        if y.size == 0:
            break
        roots, ok = R.fiber_batch(y)
        if not np.all(ok):
            if check:
                raise RootSolveFailure(f"fiber solve failed at level {k}")
            roots[~ok] = np.nan
        dR = R.deriv_values(roots)
        w_new = wgt[:, None] / (dR * dR)
        y = roots.ravel()
        wgt = w_new.ravel()
        seg = np.repeat(seg, d)
        finite = np.isfinite(y) & np.isfinite(wgt)
        if check and not np.all(finite):
            raise CriticalFiber(f"non-finite preimage or R' = 0 at level {k}")
        if check:
            _check_nodes(y, crit_vals, phi, tol, k)
        contrib = phi(y) * wgt
        if prune_eps is not None:
            small = finite & (np.abs(wgt) < prune_eps)
            np.add.at(pruned, seg[small], np.abs(contrib[small]))
            finite &= ~small
        if not np.all(finite):
            contrib = np.where(finite, contrib, 0)
        levels[:, k] = segment_sums(contrib, seg, npts)
        if not np.all(finite):
            y, wgt, seg = y[finite], wgt[finite], seg[finite]
    return levels, pruned


def ruelle_tree(R: RationalMap, phi: QuadDifferential, z, depth: int, *, tol=CRITICAL_EXCLUSION,
                prune_eps=None, node_budget=DEFAULT_NODE_BUDGET, check=True,
                threads: int = 1) -> TreeLevels:
    """Level sums of the depth-``depth`` preimage tree at each point of ``z``.

    Points are processed in fixed-size chunks (independent of ``threads``), so
    the output is identical for any thread count.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    d = R.degree
    leaves = d ** depth
    if prune_eps is None and leaves > node_budget:
        raise BudgetExceeded(
            f"depth {depth} needs {leaves} leaves per point, node budget is {node_budget}"
        )
    crit_vals = np.array(
        [v for v in critical_values(R) if not is_infinite(v)], dtype=complex
    ) if check else np.zeros(0, complex)
    width = max(1, CHUNK_NODES // max(1, min(leaves, CHUNK_NODES)))
    chunks = [z[s:s + width] for s in range(0, z.size, width)]

    def run(chunk):
        return _tree_chunk(R, phi, chunk, depth, prune_eps, check, crit_vals, tol)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    if not parts:
        return TreeLevels(np.zeros((0, depth + 1), complex), np.zeros(0))
    return TreeLevels(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def _scalar_point(z):
    if is_infinite(z):
        raise ValueError("the Ruelle sum is evaluated at finite points; use the 1/z chart")
    return complex(z)


def ruelle_apply(R: RationalMap, phi: QuadDifferential, z, tol: float = CRITICAL_EXCLUSION) -> complex:
    """(R_* phi)(z) = sum over the fiber of phi(y) / R'(y)^2."""
    z = _scalar_point(z)
    return complex(ruelle_tree(R, phi, [z], 1, tol=tol).levels[0, 1])


def ruelle_power(R: RationalMap, phi: QuadDifferential, n: int, z, tol: float = CRITICAL_EXCLUSION,
                 prune_eps=None, node_budget=DEFAULT_NODE_BUDGET, return_pruned=False):
    """(R_*^n phi)(z) by preimage-tree summation.

    With ``prune_eps`` set, branches whose accumulated weight
    |prod 1/R'(y_k)^2| drops below it are cut; the summed modulus of their
    contributions at the cut is returned as well when ``return_pruned``.
    """
    z = _scalar_point(z)
    tree = ruelle_tree(R, phi, [z], n, tol=tol, prune_eps=prune_eps, node_budget=node_budget)
    val = complex(tree.levels[0, n])
    if return_pruned:
        return val, float(tree.pruned_mass[0])
    return val


def cesaro_average(R: RationalMap, phi: QuadDifferential, n: int, z, tol: float = CRITICAL_EXCLUSION,
                   node_budget=DEFAULT_NODE_BUDGET) -> complex:
    """Cesaro average (1/n) sum_{i<n} (R_*^i phi)(z), from a single shared tree."""
    if n < 1:
        raise ValueError("n must be >= 1")
    z = _scalar_point(z)
    tree = ruelle_tree(R, phi, [z], n - 1, tol=tol, node_budget=node_budget)
    return complex(tree.cesaro(n)[0])


def ruelle_values(R, phi, z, depth=1, threads=1):
    """Vectorised (R_*^depth phi)(z) without fiber checks, for quadrature."""
    z = np.asarray(z, dtype=complex)
    tree = ruelle_tree(R, phi, z.ravel(), depth, check=False, threads=threads)
    return tree.levels[:, depth].reshape(z.shape)


def pushforward(R: RationalMap, phi: QuadDifferential, depth: int = 1) -> QuadDifferential:
    """R_*^depth phi as a pointwise rule; poles are the postcritical candidates."""
    poles = {}
    cands = list(phi.poles)
    crit = [(v, 1) for v in critical_values(R)]
    for _ in range(depth):
        nxt = [(R(p), 1) for p, _ in cands] + crit
        cands = nxt
    for p, k in cands:
        key = p if is_infinite(p) else complex(np.round(p.real, 12), np.round(p.imag, 12))
        poles[key] = 1
    return QuadDifferential(lambda z: ruelle_values(R, phi, z, depth), list(poles.items()),
                            label=f"R_*^{depth}({phi.label})")


# ---------------------------------------------------------------------------
# Beltrami operator


def beltrami_values(R: RationalMap, mu: LineField, z):
    """mu(R(z)) conj(R'(z)) / R'(z), vectorised, no checks."""
    z = np.asarray(z, dtype=complex)
    dR = R.deriv_values(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.conj(dR) / dR
    return mu(R(z)) * u


def beltrami_pullback(R: RationalMap, mu: LineField, z, tol: float = 1e-12) -> complex:
    z = _scalar_point(z)
    dR = complex(R.deriv_values(np.array([z]))[0])
    if not abs(dR) >= tol:
        raise CriticalPoint(f"|R'({z})| = {abs(dR):.3e} below {tol}")
    return complex(mu(np.array([R(z)]))[0] * (dR.conjugate() / dR))


def cesaro_beltrami(R: RationalMap, mu: LineField, n: int, z, tol: float = 1e-12) -> complex:
    """(1/n) sum_{i<n} mu(R^i z) conj((R^i)'(z)) / (R^i)'(z) along the forward orbit."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = _scalar_point(z)
    phase = 1.0 + 0j
    terms = []
    for i in range(n):
        terms.append(complex(mu(np.array([x]))[0]) * phase)
        if i == n - 1:
            break
        dR = complex(R.deriv_values(np.array([x]))[0])
        if not abs(dR) >= tol:
            raise CriticalPoint(f"orbit point {x} (step {i}) is critical")
        phase *= (dR.conjugate() / dR)
        phase /= abs(phase)
        x = R(x)
        if is_infinite(x) or not math.isfinite(abs(x)):
            raise CriticalPoint(f"orbit of {z} left the finite chart at step {i + 1}")
    return complex(kahan_rows(np.array(terms)[None, :])[0]) / n


# ---------------------------------------------------------------------------
# duality


def duality_residual(R: RationalMap, mu: LineField, phi: QuadDifferential, quad_cfg=None) -> float:
    """|integral Bel(mu) phi dm - integral mu R_*(phi) dm| over the sphere."""
    cfg = {"tol": quadrature.DEFAULT_TOL, "budget": quadrature.DEFAULT_BUDGET}
    cfg.update(quad_cfg or {})
    region = cfg.pop("region", None) or quadrature.Region.sphere()
    lhs = quadrature.integrate(
        lambda z: beltrami_values(R, mu, z) * phi(z), region, singular=phi.finite_poles, **cfg
    )
    pushed = pushforward(R, phi)
    rhs = quadrature.integrate(
        lambda z: mu(z) * pushed(z), region, singular=pushed.finite_poles, **cfg
    )
    return float(abs(lhs.value - rhs.value))

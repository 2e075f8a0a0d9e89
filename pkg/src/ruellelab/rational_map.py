"""Rational maps R = P/Q on the Riemann sphere.

Points of the extended plane are Python complex numbers, with infinity
represented by :data:`INFINITY`.  A finite point with modulus above
:data:`NEAR_INFINITY` is evaluated through the chart ``u = 1/z``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import InvalidMap, RootSolveFailure
from .roots import aberth, backward_error, cluster_roots, poly_roots, trim

INFINITY = complex(math.inf, 0.0)
NEAR_INFINITY = 1e8


def is_infinite(z) -> bool:
    return not cmath.isfinite(complex(z))


def chordal(z, w) -> float:
    """Chordal distance on the Riemann sphere (diameter 2)."""
    zi, wi = is_infinite(z), is_infinite(w)
    if zi and wi:
        return 0.0
    if zi:
        z, w = w, z
    if zi or wi:
        return 2.0 / math.sqrt(1.0 + abs(z) ** 2)
    return 2.0 * abs(z - w) / math.sqrt((1.0 + abs(z) ** 2) * (1.0 + abs(w) ** 2))


def _deg(c) -> int:
    return len(c) - 1


def _pad(c, n):
    out = np.zeros(n, dtype=complex)
    out[: len(c)] = c
    return out


@dataclass(frozen=True)
class Fiber:
    """Preimage set of ``target`` with multiplicities."""

    roots: tuple
    target: complex
    residual: float
    critical: bool = False

    @property
    def size(self) -> int:
        return sum(m for _, m in self.roots)

    def points(self):
        return [p for p, _ in self.roots]


@dataclass(frozen=True)
class PostcriticalData:
    points: tuple
    resolved: bool
    depth_used: int

    @property
    def finite(self):
        return [p for p in self.points if not is_infinite(p)]

    @property
    def has_infinity(self) -> bool:
        return any(is_infinite(p) for p in self.points)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class RationalMap:
    """R(z) = num(z)/den(z), coefficients in ascending degree.

    Construction trims vanishing leading coefficients and rejects maps whose
    numerator and denominator share a root.
    """

    num: np.ndarray
    den: np.ndarray = field(default_factory=lambda: np.array([1.0 + 0j]))
    label: str = ""

    def __post_init__(self):
        num = trim(np.atleast_1d(np.asarray(self.num, dtype=complex)))
        den = trim(np.atleast_1d(np.asarray(self.den, dtype=complex)))
        if not np.any(den):
            raise InvalidMap("denominator is identically zero")
        if not np.any(num):
            raise InvalidMap("numerator is identically zero")
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        if _deg(den) >= 1 and _deg(num) >= 1:
            qroots, _ = poly_roots(den)
            if qroots.size:
                err = backward_error(num[None, :], qroots[None, :])
                if np.min(err) < 1e-10:
                    raise InvalidMap("numerator and denominator share a root")

    # -- basic data ---------------------------------------------------------

    @property
    def degree(self) -> int:
        return max(_deg(self.num), _deg(self.den))

    def __repr__(self):
        name = self.label or "RationalMap"
        return f"<{name} degree={self.degree}>"

    def padded(self):
        """(num, den) zero-padded to length degree + 1."""
        n = self.degree + 1
        return _pad(self.num, n), _pad(self.den, n)

    # -- evaluation ---------------------------------------------------------

    def value_at_infinity(self) -> complex:
        dp, dq = _deg(self.num), _deg(self.den)
        if dp > dq:
            return INFINITY
        if dp < dq:
            return 0j
        return complex(self.num[-1] / self.den[-1])

    def __call__(self, z):
        if np.ndim(z) == 0:
            return self._eval_scalar(complex(z))
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return npoly.polyval(z, self.num) / npoly.polyval(z, self.den)

    def _eval_scalar(self, z: complex) -> complex:
        if is_infinite(z):
            return self.value_at_infinity()
        if abs(z) > NEAR_INFINITY:
            u = 1.0 / z
            dp, dq = _deg(self.num), _deg(self.den)
            top = npoly.polyval(u, self.num[::-1])
            bot = npoly.polyval(u, self.den[::-1])
            # R(z) = u^(dq-dp) * top/bot
            if bot == 0:
                return INFINITY
            val = top / bot
            k = dq - dp
            if k < 0 and abs(val) * abs(z) ** (-k) > 1e300:
                return INFINITY
            return complex(val * u ** k)
        q = npoly.polyval(z, self.den)
        p = npoly.polyval(z, self.num)
        if q == 0:
            return INFINITY
        return complex(p / q)

    def deriv_values(self, z):
        """R'(z) at finite points, via (P'Q - PQ')/Q**2."""
        z = np.asarray(z, dtype=complex)
        p = npoly.polyval(z, self.num)
        q = npoly.polyval(z, self.den)
        dp = npoly.polyval(z, npoly.polyder(self.num)) if _deg(self.num) else 0 * z
        dq = npoly.polyval(z, npoly.polyder(self.den)) if _deg(self.den) else 0 * z
        with np.errstate(divide="ignore", invalid="ignore"):
            return (dp * q - p * dq) / (q * q)

    def derivative_numerator(self):
        """Coefficients of P'Q - PQ'."""
        dp = npoly.polyder(self.num) if _deg(self.num) else np.zeros(1)
        dq = npoly.polyder(self.den) if _deg(self.den) else np.zeros(1)
        return npoly.polysub(npoly.polymul(dp, self.den), npoly.polymul(self.num, dq))

    # -- fibers -------------------------------------------------------------

    def fiber_batch(self, targets):
        """Preimages of many finite targets at once.

        Returns ``(roots, ok)`` with ``roots`` of shape (len(targets), degree);
        roots at infinity appear as ``inf``.  Each row's root order depends
        only on its own target.
        """
        t = np.asarray(targets, dtype=complex).ravel()
        num, den = self.padded()
        d = self.degree
        coeffs = num[None, :] - t[:, None] * den[None, :]
        scale = np.max(np.abs(coeffs), axis=1)
        lead_small = np.abs(coeffs[:, -1]) < 1e-6 * scale
        roots = np.empty((t.size, d), dtype=complex)
        ok = np.ones(t.size, dtype=bool)
        reg = np.flatnonzero(~lead_small)
        if reg.size:
            roots[reg], ok[reg] = aberth(coeffs[reg])
        for i in np.flatnonzero(lead_small):
            try:
                roots[i] = self._chart_switched_roots(coeffs[i])
            except RootSolveFailure:
                roots[i] = np.nan
                ok[i] = False
        return roots, ok

    @staticmethod
    def _chart_switched_roots(c):
        # roots of v^d p(1/v); v = 0 <-> w = infinity
        rev = c[::-1]
        vr, n_inf_v = poly_roots(rev, rel=1e-15)
        w = np.empty(vr.size + n_inf_v, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(np.abs(vr) < 1.0 / NEAR_INFINITY, np.inf, 1.0 / np.where(vr == 0, 1, vr))
        w[: vr.size] = inv
        w[vr.size:] = 0.0
        return w

    def preimages(self, z, tol: float = 1e-9) -> Fiber:
        """Solve R(w) = z with multiplicities; see :func:`preimages`."""
        return preimages(self, z, tol)

    def to_dict(self):
        return {
            "num": [[float(c.real), float(c.imag)] for c in self.num],
            "den": [[float(c.real), float(c.imag)] for c in self.den],
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, data):
        def parse(key):
            if key not in data:
                raise InvalidMap(f"missing field '{key}'")
            try:
                return [complex(float(re), float(im)) for re, im in data[key]]
            except (TypeError, ValueError) as exc:
                raise InvalidMap(f"field '{key}' must be a list of [re, im] pairs") from exc

        return cls(parse("num"), parse("den"), label=str(data.get("label", "")))


# ---------------------------------------------------------------------------
# module-level operations


def evaluate(R: RationalMap, z) -> complex:
    return R(z)


def derivative(R: RationalMap) -> RationalMap:
    """R' as a rational map, with the factors shared at repeated poles removed."""
    num = R.derivative_numerator()
    den = npoly.polymul(R.den, R.den)
    if _deg(R.den) >= 2:
        qroots, _ = poly_roots(R.den)
        for q, m in cluster_roots(qroots, 1e-9):
            for _ in range(m - 1):
                num = npoly.polydiv(num, np.array([-q, 1.0]))[0]
                den = npoly.polydiv(den, np.array([-q, 1.0]))[0]
    if not np.any(trim(num)):
        raise InvalidMap("derivative of a constant map")
    return RationalMap(num, den, label=f"d({R.label})" if R.label else "")


def local_degree_at_infinity(R: RationalMap) -> int:
    dp, dq = _deg(R.num), _deg(R.den)
    if dp != dq:
        return abs(dp - dq)
    c = R.num[-1] / R.den[-1]
    rest = trim(npoly.polysub(R.num, c * R.den), rel=1e-12)
    return dp - _deg(rest)


def critical_points(R: RationalMap, tol: float = 1e-9):
    """Critical points with multiplicity; the total is checked against 2d - 2."""
    d = R.degree
    if d < 2:
        raise InvalidMap("critical points need degree >= 2")
    numer = trim(R.derivative_numerator(), rel=1e-12)
    out = []
    if _deg(numer) >= 1:
        w, _ = poly_roots(numer)
        out.extend(cluster_roots(w, tol))
    m_inf = local_degree_at_infinity(R) - 1
    if m_inf > 0:
        out.append((INFINITY, m_inf))
    total = sum(m for _, m in out)
    if total != 2 * d - 2:
        raise RootSolveFailure(
            f"Riemann-Hurwitz count failed: found {total} critical points, expected {2 * d - 2}"
        )
    return out


def critical_values(R: RationalMap, tol: float = 1e-9):
    return [R(c) for c, _ in critical_points(R, tol)]


def _snap(z):
    return INFINITY if is_infinite(z) or abs(z) > NEAR_INFINITY else complex(z)


def postcritical_set(R: RationalMap, max_depth: int = 64, tol: float = 1e-9) -> PostcriticalData:
    """Forward orbits of the critical values, merged to spherical tolerance.

    The result is resolved when every orbit ran into a point already known
    to lie on a cycle (its own earlier iterate, or a point of an orbit that
    was itself resolved).  Unresolved output is truncated at ``max_depth``.
    """
    points: list = []
    settled: list = []  # parallel to points: True once the point is on a resolved orbit

    def find(z):
        for k, p in enumerate(points):
            if chordal(p, z) < tol:
                return k
        return -1

    all_resolved = True
    depth_used = 0
    for v in critical_values(R, tol):
        x = _snap(v)
        orbit_idx = []
        resolved = False
        for step in range(max_depth + 1):
            k = find(x)
            if k >= 0 and (k in orbit_idx or settled[k]):
                resolved = True
                depth_used = max(depth_used, step)
                break
            if k < 0:
                points.append(x)
                settled.append(False)
                k = len(points) - 1
            orbit_idx.append(k)
            x = _snap(R(x))
        else:
            depth_used = max_depth
        if resolved:
            for k in orbit_idx:
                settled[k] = True
        all_resolved &= resolved
    return PostcriticalData(tuple(points), all_resolved, depth_used)


def preimages(R: RationalMap, z, tol: float = 1e-9) -> Fiber:
    """R^{-1}(z) with multiplicities.

    Multiplicity-greater-than-one clusters mark ``z`` as (numerically) a
    critical value; such fibers carry ``critical=True``.
    """
    d = R.degree
    num, den = R.padded()
    if is_infinite(z):
        w, n_inf = poly_roots(den)
        if n_inf:
            w = np.concatenate([w, np.full(n_inf, np.inf + 0j)])
    else:
        z = complex(z)
        c = num - z * den
        scale = np.max(np.abs(c))
        if abs(c[-1]) < 1e-6 * scale:
            w = R._chart_switched_roots(c)
        else:
            w, ok = aberth(c[None, :])
            if not ok[0]:
                raise RootSolveFailure(f"fiber over {z} did not converge")
            w = w[0]
    finite = w[np.isfinite(w)]
    n_inf = d - finite.size
    clusters = cluster_roots(finite, tol) if finite.size else []
    if n_inf:
        clusters.append((INFINITY, n_inf))
    residual = 0.0
    for p, _ in clusters:
        val = R(p)
        if is_infinite(z) or is_infinite(val) or abs(complex(z)) > NEAR_INFINITY:
            residual = max(residual, chordal(val, z))
        else:
            residual = max(residual, abs(val - z))
    bound = max(tol, 1e-10) * 1e3 * (1.0 + (0.0 if is_infinite(z) else abs(z)))
    if residual > bound:
        raise RootSolveFailure(f"fiber residual {residual:.3e} exceeds {bound:.3e}")
    critical = any(m > 1 for _, m in clusters)
    return Fiber(tuple(clusters), INFINITY if is_infinite(z) else complex(z), residual, critical)

"""Weighted Bergman kernel of the unit disk and the projection of L1 onto Q.

With the classical kernel K_D(z, s) = 1 / (pi (1 - z conj(s))^2) the kernel
used here is

    K(z, s) = (3/2) pi i K_D(z, s)^2 = (3i / (2 pi)) (1 - z conj(s))^-4,

which is antisymmetric: K(s, z) = -conj(K(z, s)).  Every integral in this
module is against planar Lebesgue measure dm.  Using ds ^ d(conj s) = -2i dm
and the curvature -4 density 1 / (1 - |s|^2), the projection reads

    P f(z) = (3 / pi) int_disk (1 - |s|^2)^2 (1 - z conj(s))^-4 f(s) dm(s),

which fixes 1, s, s^2, ... and kills conj(s).  Round disks and half-planes are
handled by a Moebius transport to the unit disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .errors import NotApplicable, NotIntegrable, OutsideDomain
from .quadrature import Region

KERNEL_CONST = 3j / (2 * math.pi)
W_MODULUS = 3 / (2 * math.pi)


@dataclass(frozen=True)
class Moebius:
    """z -> (a z + b) / (c z + d)."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return (self.a * z + self.b) / (self.c * z + self.d)

    def deriv(self, z):
        z = np.asarray(z, dtype=complex)
        return (self.a * self.d - self.b * self.c) / (self.c * z + self.d) ** 2

    def inverse(self) -> "Moebius":
        return Moebius(self.d, -self.b, -self.c, self.a)


@dataclass(frozen=True)
class KernelContext:
    """The unit disk, optionally seen through a transport T: D -> unit disk."""

    transport: Moebius | None = None
    label: str = "disk"

    @classmethod
    def disk(cls):
        return cls()

    @classmethod
    def round_disk(cls, center, radius):
        if radius <= 0:
            raise ValueError("radius must be positive")
        return cls(Moebius(1.0, -complex(center), 0.0, float(radius)), f"disk({center}, {radius})")

    @classmethod
    def upper_half_plane(cls):
        return cls(Moebius(1.0, -1j, 1.0, 1j), "upper half-plane")

    def to_model(self, z):
        """Model coordinates and |T'| (both arrays), raising if z is outside."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.transport is None:
            s, dt = z, np.ones(z.shape, dtype=complex)
        else:
            s, dt = self.transport(z), self.transport.deriv(z)
        if not np.all(np.abs(s) < 1):
            raise OutsideDomain(f"point(s) outside the {self.label}")
        return s, dt


def _scalar(out, z):
    return complex(out[0]) if np.ndim(z) == 0 else out


def _inv4(s, t):
    """(1 - s conj(t))^-4 in real arithmetic.

    numpy's complex products are not always exactly conjugate-symmetric
    (vectorised paths may fuse operations), so the antisymmetry law would
    only hold to rounding; written out with real operations it is exact.
    """
    a, b = s.real, s.imag
    c, d = t.real, t.imag
    x = 1 - (a * c + b * d)
    y = -(b * c - a * d)
    x2, y2 = x * x - y * y, 2 * x * y
    x4, y4 = x2 * x2 - y2 * y2, 2 * x2 * y2
    m = x4 * x4 + y4 * y4
    return (x4 / m) - 1j * (y4 / m)


def _sq(g):
    x, y = g.real, g.imag
    return (x * x - y * y) + 1j * (2 * x * y)


def kernel(ctx: KernelContext, z, zeta):
    """K(z, zeta), transported as a quadratic differential in z and conjugate one in zeta."""
    s, ds = ctx.to_model(z)
    t, dt = ctx.to_model(zeta)
    out = KERNEL_CONST * _inv4(s, t) * _sq(ds * np.conj(dt))
    return _scalar(out, z)


def density(ctx: KernelContext, z):
    """Curvature -4 density of the domain."""
    s, ds = ctx.to_model(z)
    out = np.abs(ds) / (1 - np.abs(s) ** 2)
    return float(out[0]) if np.ndim(z) == 0 else out


def omega(ctx: KernelContext, zeta, z):
    """lambda(zeta)^-2 K(z, zeta)."""
    return kernel(ctx, z, zeta) / density(ctx, zeta) ** 2


def w_function(ctx: KernelContext, z):
    """omega(z, z); its modulus is (3 / (2 pi)) lambda(z)^2."""
    return omega(ctx, z, z)


def _disk_projection(g, s, tol, budget, check):
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    if check:
        res = quadrature.integrate(lambda x: np.abs(g(x)), Region.disk(0, 1), 1e-4, budget)
        if res.diverged or not np.isfinite(res.value):
            raise NotIntegrable("f does not appear to be integrable on the disk")

    def integrand(x):
        wgt = (3 / math.pi) * (1 - np.abs(x) ** 2) ** 2 * g(x)
        return wgt[:, None] * (1 - s[None, :] * np.conj(x)[:, None]) ** -4

    res = quadrature.integrate(integrand, Region.disk(0, 1), tol, budget, ncomp=s.size)
    return np.asarray(res.value)


def project(ctx: KernelContext, f, z, tol: float = 1e-9, budget: int = quadrature.DEFAULT_BUDGET,
            check: bool = True):
    """P(f) at z (scalar or array of points); f is a vectorised rule on the domain."""
    s, ds = ctx.to_model(z)
    if ctx.transport is None:
        g = f
    else:
        inv = ctx.transport.inverse()

        def g(x):
            y = inv(x)
            return f(y) / ctx.transport.deriv(y) ** 2

    out = _disk_projection(g, s, tol, budget, check) * ds ** 2
    return _scalar(out, z)


# ---------------------------------------------------------------------------
# exhaustion operators


@dataclass
class Exhaustion:
    """Nested closed disks {|s| <= r_n} in model coordinates, n = 1..n_max."""

    radii: list = field(default_factory=list)
    n_max: int = 64

    def __post_init__(self):
        if not self.radii:
            self.radii = [1 - 1 / n for n in range(1, self.n_max + 1)]
        self.radii = [float(r) for r in self.radii]
        self.n_max = len(self.radii)
        if any(b < a for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError("exhaustion radii must be nested (non-decreasing)")
        if any(not 0 <= r < 1 for r in self.radii):
            raise ValueError("exhaustion radii must lie in [0, 1)")

    def radius(self, n: int) -> float:
        if not 1 <= n <= self.n_max:
            raise IndexError(f"n={n} outside 1..{self.n_max}")
        return self.radii[n - 1]

    def increments(self):
        """Lebesgue measure of each shell between consecutive disks."""
        r = np.array(self.radii)
        return math.pi * np.diff(r * r)

    def contains(self, n, s):
        return np.abs(s) <= self.radius(n)


def exhaustion_apply(ctx: KernelContext, exh: Exhaustion, n: int, f, z, tol: float = 1e-9,
                     budget: int = quadrature.DEFAULT_BUDGET):
    """P f(z) cut off to the n-th disk of the exhaustion."""
    s, _ = ctx.to_model(z)
    inside = exh.contains(n, s)
    out = np.zeros(s.shape, dtype=complex)
    if np.any(inside):
        zz = np.atleast_1d(np.asarray(z, dtype=complex))[inside]
        out[inside] = project(ctx, f, zz, tol, budget)
    return _scalar(out, z)


def _region_extent(A: Region):
    # (center, inner, outer) radii of a disk or annulus inside the model disk
    if A.kind == "disk":
        c, lo, hi = complex(A.center), 0.0, float(A.R)
    elif A.kind == "annulus":
        c, lo, hi = complex(A.center), float(A.r), float(A.R)
    else:
        raise NotApplicable(f"exhaustion_defect supports disk and annulus regions, not {A.kind}")
    if abs(c) + hi >= 1:
        raise OutsideDomain("A must lie inside the disk")
    return c, lo, hi


def defect_upper(a: float, s: float) -> float:
    """sup over |zeta| <= s of int_{|z| > a} |kernel of P|(z, zeta) dm(z).

    Uses int_{|z|<rho} |1 - z conj(w)|^-4 dm = pi rho^2 / (1 - rho^2 |w|^2)^2;
    the result is increasing in s and decreasing in a.
    """
    return 3 * (1 - a * a * (1 - s * s) ** 2 / (1 - a * a * s * s) ** 2)


def _tensor_rule(r0, r1, nr, nt):
    x, w = np.polynomial.legendre.leggauss(nr)
    r = 0.5 * (r1 - r0) * (x + 1) + r0
    wr = 0.5 * (r1 - r0) * w * r
    th = 2 * math.pi * (np.arange(nt) + 0.5) / nt
    pts = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
    wts = np.repeat(wr, nt) * (2 * math.pi / nt)
    return pts, wts


def _bump_mixture(rng, c, lo, hi, pts, wts, count=5):
    rad = np.sqrt(rng.uniform(lo * lo, hi * hi, count))
    ang = rng.uniform(0, 2 * math.pi, count)
    centers = c + rad * np.exp(1j * ang)
    widths = rng.uniform(0.05, 0.3, count) * max(hi, 1e-3)
    amps = rng.normal(size=count) + 1j * rng.normal(size=count)
    f = np.zeros(pts.shape, dtype=complex)
    for cen, wd, amp in zip(centers, widths, amps):
        f += amp * np.exp(-np.abs(pts - cen) ** 2 / (2 * wd * wd))
    norm = float(np.sum(np.abs(f) * wts))
    return f / norm


def exhaustion_defect(ctx: KernelContext, exh: Exhaustion, n: int, A: Region, probe_count: int = 8,
                      seed: int = 0, inner=(24, 48), outer=(48, 96)):
    """(lower, upper) bounds for the norm of (cut-off projection minus P) on L1 functions supported in A.

    A and the n-th disk are taken in model coordinates; the L1 norm of quadratic
    differentials is invariant under the transport, so nothing changes.
    ``upper`` is the exact column-norm supremum of the integral operator.
    ``lower`` is the largest observed L1 norm of the cut-off defect applied to f over seeded mixtures of
    five Gaussian bumps clipped to A and normalised to ||f||_1 = 1.
    """
    if A.kind == "empty":
        return 0.0, 0.0
    c, lo, hi = _region_extent(A)
    a = exh.radius(n)
    upper = defect_upper(a, abs(c) + hi)
    pts, wts = _tensor_rule(lo, hi, *inner)
    pts = pts + c
    zo, wo = _tensor_rule(a, 1.0, *outer)
    rng = np.random.default_rng(seed)
    weight = (3 / math.pi) * (1 - np.abs(pts) ** 2) ** 2 * wts
    lower = 0.0
    for _ in range(probe_count):
        f = _bump_mixture(rng, c, lo, hi, pts, wts)
        pf = ((1 - zo[:, None] * np.conj(pts)[None, :]) ** -4) @ (weight * f)
        lower = max(lower, float(np.sum(np.abs(pf) * wo)))
    # the upper bound is exact, so any excess is discretisation error
    return min(lower, upper), upper


def defect_curve(ctx: KernelContext, exh: Exhaustion, A: Region, n_values, probe_count=8, seed=0):
    """Rows (n, lower, upper)."""
    return [(n, *exhaustion_defect(ctx, exh, n, A, probe_count, seed)) for n in n_values]

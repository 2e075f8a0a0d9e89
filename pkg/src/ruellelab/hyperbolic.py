"""Hyperbolic densities on planar domains (curvature -4, so the disk has 1/(1-|z|^2)).

Exact models: disk, punctured disk, round annulus, and the thrice-punctured
sphere.  The last one is computed from the elliptic modular function: with
K the complete elliptic integral (parameter convention),

    lambda_{0,1}(z) = pi / (8 |z| |1 - z| Re(K(1 - z) conj(K(z)))).

A sphere with more punctures has no closed form here; its density is
bracketed by domain monotonicity (a smaller domain has a larger density).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import quadrature
from .errors import OutsideDomain, UnresolvedPostcritical
from .lattes import q_basis
from .quadrature import QuadratureResult, Region
from .rational_map import RationalMap, is_infinite, postcritical_set


def ellipk(m):
    """Complete elliptic integral K(m), principal branch, via the complex AGM."""
    m = np.asarray(m, dtype=complex)
    a = np.ones_like(m)
    b = np.sqrt(1.0 - m)
    for _ in range(64):
        a_next = 0.5 * (a + b)
        b_next = np.sqrt(a * b)
        # choose the root closer to the arithmetic mean
        flip = np.abs(a_next - b_next) > np.abs(a_next + b_next)
        b_next = np.where(flip, -b_next, b_next)
        a, b = a_next, b_next
        if np.all(np.abs(a - b) <= 1e-16 * np.abs(a)):
            break
    return np.pi / (2.0 * a)


def _lambda01_core(z):
    k1 = ellipk(z)
    k2 = ellipk(1.0 - z)
    return np.pi / (8.0 * np.abs(z) * np.abs(1.0 - z) * np.real(k2 * np.conj(k1)))


def lambda_thrice_punctured(z):
    """Density of the sphere minus {0, 1, infinity}."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape)
    real = np.abs(z.imag) <= 1e-14 * np.maximum(1.0, np.abs(z))
    x = z.real
    # real points off (0, 1) sit on a branch cut: move them into (0, 1) by a symmetry
    neg = real & (x < 0)
    big = real & (x > 1)
    plain = ~(neg | big)
    out[plain] = _lambda01_core(z[plain])
    if np.any(neg):
        w = z[neg]
        out[neg] = _lambda01_core(w / (w - 1.0)) / np.abs(w - 1.0) ** 2
    if np.any(big):
        w = z[big]
        out[big] = _lambda01_core(1.0 / w) / np.abs(w) ** 2
    return out


@dataclass(frozen=True)
class MetricModel:
    """Named hyperbolic domain.

    kinds: ``disk`` (unit disk), ``punctured_disk`` (0 < |z| < 1),
    ``annulus`` (r < |z| < R), ``punctured_sphere`` (sphere minus ``points``,
    bounds only).
    """

    kind: str
    r: float = 0.0
    R: float = 1.0
    points: tuple = ()

    def __post_init__(self):
        if self.kind not in ("disk", "punctured_disk", "annulus", "punctured_sphere"):
            raise ValueError(f"unknown metric model {self.kind!r}")
        if self.kind == "annulus" and not (0 < self.r < self.R):
            raise ValueError("annulus needs 0 < r < R")
        if self.kind == "punctured_sphere" and len(self.points) < 3:
            raise ValueError("a punctured sphere needs at least three punctures to be hyperbolic")

    @property
    def bounds_only(self) -> bool:
        return self.kind == "punctured_sphere"

    @classmethod
    def disk(cls):
        return cls("disk")

    @classmethod
    def punctured_disk(cls):
        return cls("punctured_disk")

    @classmethod
    def annulus(cls, r, R):
        return cls("annulus", r=float(r), R=float(R))

    @classmethod
    def punctured_sphere(cls, points):
        return cls("punctured_sphere", points=tuple(complex(p) for p in points))


def _check_inside(model, z):
    a = np.abs(z)
    if model.kind == "disk":
        ok = a < 1
    elif model.kind == "punctured_disk":
        ok = (a > 0) & (a < 1)
    elif model.kind == "annulus":
        ok = (a > model.r) & (a < model.R)
    else:
        fin = [p for p in model.points if not is_infinite(p)]
        ok = np.isfinite(z)
        for p in fin:
            ok &= z != p
    if not np.all(ok):
        raise OutsideDomain(f"point(s) {np.atleast_1d(z)[~np.atleast_1d(ok)][:3]} outside the {model.kind}")


def density_values(model: MetricModel, z):
    """Vectorised density; for punctured spheres returns (lower, upper) arrays."""
    z = np.asarray(z, dtype=complex)
    _check_inside(model, z)
    a = np.abs(z)
    if model.kind == "disk":
        return 1.0 / (1.0 - a * a)
    if model.kind == "punctured_disk":
        return 1.0 / (2.0 * a * np.log(1.0 / a))
    if model.kind == "annulus":
        L = math.log(model.R / model.r)
        return math.pi / (2.0 * L * a * np.sin(math.pi * np.log(a / model.r) / L))
    return _sphere_lower(model.points, z), _sphere_upper(model.points, z)


def density(model: MetricModel, z):
    """Density at one point: a float, or (lower, upper) for bounds-only models."""
    out = density_values(model, np.array([complex(z)]))
    if isinstance(out, tuple):
        return float(out[0][0]), float(out[1][0])
    return float(out[0])


def _triple_density(a, b, c, z):
    # density of the sphere minus {a, b, c} by a Moebius move to {0, 1, inf}
    if is_infinite(c):
        t = (z - a) / (b - a)
        dt = np.full(z.shape, 1.0 / abs(b - a))
    else:
        k = (b - c) / (b - a)
        t = k * (z - a) / (z - c)
        dt = np.abs(k * (a - c) / (z - c) ** 2)
    return lambda_thrice_punctured(t) * dt


def _sphere_lower(points, z):
    """Largest density among the thrice-punctured spheres containing the domain."""
    pts = list(points)
    fin = [p for p in pts if not is_infinite(p)]
    inf = [p for p in pts if is_infinite(p)]
    triples = []
    for trip in combinations(fin, 3):
        triples.append(trip)
    if inf:
        for pair in combinations(fin, 2):
            triples.append(pair + (inf[0],))
    if len(triples) > 60:
        triples = triples[:60]
    best = np.zeros(z.shape)
    for a, b, c in triples:
        best = np.maximum(best, _triple_density(a, b, c, z))
    return best


def _sphere_upper(points, z):
    """Smallest density among explicit subdomains containing z."""
    fin = np.array([p for p in points if not is_infinite(p)], dtype=complex)
    has_inf = any(is_infinite(p) for p in points)
    dist = np.abs(z[:, None] - fin[None, :]) if z.ndim == 1 else np.abs(z[..., None] - fin)
    nearest = dist.min(axis=-1)
    best = 1.0 / nearest  # disk centred at z
    for j, p in enumerate(fin):
        others = np.abs(np.delete(fin, j) - p)
        rho = others.min() if others.size else np.inf
        d = dist[..., j]
        inside = d < rho
        with np.errstate(divide="ignore", invalid="ignore"):
            val = 1.0 / (2.0 * d * np.log(rho / d))
        best = np.where(inside & np.isfinite(val), np.minimum(best, val), best)
    M = np.abs(fin).max() if fin.size else 0.0
    a = np.abs(z)
    outside = a > M
    with np.errstate(divide="ignore", invalid="ignore"):
        if has_inf:
            val = 1.0 / (2.0 * a * np.log(a / M)) if M > 0 else np.full(z.shape, np.inf)
        else:
            val = 1.0 / (a * a - M * M)
    best = np.where(outside & np.isfinite(val) & (val > 0), np.minimum(best, val), best)
    return best


def hyperbolic_area(model: MetricModel, region: Region, tol: float = 1e-8,
                    budget: int = quadrature.DEFAULT_BUDGET):
    """Integral of density^2 dm over ``region``.

    Bounds-only models give a pair of results (lower, upper).  An infinite
    area shows up as ``converged=False, diverged=True``.
    """
    if model.bounds_only:
        lo = quadrature.integrate(lambda z: density_values(model, z)[0] ** 2, region, tol, budget,
                                  singular=model.points)
        hi = quadrature.integrate(lambda z: density_values(model, z)[1] ** 2, region, tol, budget,
                                  singular=model.points)
        return _real(lo), _real(hi)

    def f(z):
        return density_values(model, z) ** 2

    return _real(quadrature.integrate(f, region, tol, budget))


def _real(res: QuadratureResult) -> QuadratureResult:
    res.value = float(np.real(res.value))
    res.partial_sums = tuple(float(np.real(h)) for h in res.partial_sums)
    return res


def bcond_grid(points, resolution: int = 1, levels: int = 12):
    """Sample points: a bulk square grid plus dyadic rings around each puncture."""
    fin = np.array([p for p in points if not is_infinite(p)], dtype=complex)
    M = max(1.0, float(np.abs(fin).max()) if fin.size else 1.0)
    L = 2.0 * M
    n = 40 * resolution
    xs = np.linspace(-L, L, n)
    X, Y = np.meshgrid(xs, xs)
    pts = [(X + 1j * Y).ravel()]
    ang = np.exp(2j * np.pi * (np.arange(16 * resolution) + 0.5) / (16 * resolution))
    k = np.arange(1, levels * resolution + 1)
    for j, p in enumerate(fin):
        others = np.abs(np.delete(fin, j) - p)
        rho = others.min() if others.size else 1.0
        radii = 0.5 * rho * 2.0 ** (-k / resolution)
        pts.append((p + radii[:, None] * ang[None, :]).ravel())
    radii = L * 2.0 ** (k / resolution)
    pts.append((radii[:, None] * ang[None, :]).ravel())
    z = np.concatenate(pts)
    if fin.size:
        z = z[np.min(np.abs(z[:, None] - fin[None, :]), axis=1) > 1e-12]
    return z


def bcond_ratio(R: RationalMap, basis=None, model: MetricModel = None, resolution: int = 1,
                tol: float = 1e-6) -> float:
    """Upper estimate of sup |phi| / lambda^2 divided by ||phi||_1, maximised over the basis.

    The density lower bound is used for lambda, which can only enlarge the
    ratio.
    """
    if model is None or basis is None:
        pc = postcritical_set(R)
        if not pc.resolved:
            raise UnresolvedPostcritical("B-condition ratio needs a resolved postcritical set")
        model = model or MetricModel.punctured_sphere(pc.points)
        basis = q_basis(pc) if basis is None else basis
    z = bcond_grid(model.points, resolution)
    lower, _ = density_values(model, z)
    best = 0.0
    for phi in basis:
        sup = float(np.max(np.abs(phi(z)) / lower ** 2))
        norm = quadrature.integrate_l1(phi, Region.sphere(), tol).value
        best = max(best, sup / norm)
    return best

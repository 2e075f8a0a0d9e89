"""Adaptive integration over regions of the Riemann sphere.

Integrals are taken against planar Lebesgue measure dm = dx dy.  Regions are
covered by polar patches: a disk or annulus is one patch about its centre;
the whole sphere is the disk |z| <= Rs plus the chart w = 1/z over
|w| <= 1/Rs, whose Jacobian is |w|**-4.  Each patch is split into
(r, theta) cells integrated by a tensor Gauss-Legendre rule, and the cells
with the largest (coarse - fine) discrepancy are bisected until the summed
estimate falls below ``tol``.

Declared singular points p (simple poles of quadratic differentials) get a
smooth cut-off bump of radius rho: the bump part f * chi_p is integrated in
polar coordinates centred at p, where r * |f| stays bounded, and the rest
f * (1 - chi_p) is integrated on the regular patches, where it is smooth.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import BudgetExceeded, NotIntegrable
from .rational_map import is_infinite

DEFAULT_TOL = 1e-6
DEFAULT_BUDGET = 2 ** 22
GAUSS_ORDER = 6
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Region:
    """Integration domain.

    ``exclusions`` lists punctures ``(point, radius)``: the point itself is
    removed (a null set), and its radius-neighbourhood is integrated in
    polar coordinates centred at the puncture.
    """

    kind: str
    center: complex = 0j
    r: float = 0.0
    R: float = 0.0
    disks: tuple = ()
    mask: object = None
    bbox: tuple = ()
    exclusions: tuple = ()

    def __post_init__(self):
        kinds = {"sphere", "disk", "annulus", "complement", "mask", "empty"}
        if self.kind not in kinds:
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind == "disk" and not self.R > 0:
            raise ValueError("disk radius must be positive")
        if self.kind == "annulus" and not (0 <= self.r < self.R):
            raise ValueError("annulus needs 0 <= r < R")
        for _, rad in self.exclusions:
            if not rad > 0:
                raise ValueError("exclusion radii must be positive")

    @classmethod
    def sphere(cls, exclusions=()):
        return cls("sphere", exclusions=tuple(exclusions))

    @classmethod
    def disk(cls, center, radius, exclusions=()):
        return cls("disk", center=complex(center), R=float(radius), exclusions=tuple(exclusions))

    @classmethod
    def annulus(cls, center, r, R, exclusions=()):
        return cls("annulus", center=complex(center), r=float(r), R=float(R),
                   exclusions=tuple(exclusions))

    @classmethod
    def complement_of_disks(cls, disks, exclusions=()):
        return cls("complement", disks=tuple((complex(c), float(rad)) for c, rad in disks),
                   exclusions=tuple(exclusions))

    @classmethod
    def grid_mask(cls, mask, bbox, exclusions=()):
        """Boolean ``mask[iy, ix]`` over ``bbox = (x0, x1, y0, y1)``."""
        return cls("mask", mask=np.asarray(mask, dtype=bool), bbox=tuple(map(float, bbox)),
                   exclusions=tuple(exclusions))

    @classmethod
    def empty(cls):
        return cls("empty")

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "sphere":
            return np.ones(z.shape, bool)
        if self.kind == "empty":
            return np.zeros(z.shape, bool)
        if self.kind == "disk":
            return np.abs(z - self.center) <= self.R
        if self.kind == "annulus":
            a = np.abs(z - self.center)
            return (a >= self.r) & (a <= self.R)
        if self.kind == "complement":
            inside = np.zeros(z.shape, bool)
            for c, rad in self.disks:
                inside |= np.abs(z - c) < rad
            return ~inside
        x0, x1, y0, y1 = self.bbox
        ny, nx = self.mask.shape
        ix = np.floor((z.real - x0) / (x1 - x0) * nx).astype(int)
        iy = np.floor((z.imag - y0) / (y1 - y0) * ny).astype(int)
        ok = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
        out = np.zeros(z.shape, bool)
        out[ok] = self.mask[iy[ok], ix[ok]]
        return out


@dataclass
class QuadratureResult:
    value: complex
    abs_error_estimate: float
    cells_used: int
    converged: bool
    diverged: bool = False
    partial_sums: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.abs_error_estimate < 0:
            raise ValueError("error estimate must be nonnegative")


# ---------------------------------------------------------------------------
# patches


def _bump(t):
    """Smooth cut-off: 1 for t <= 1/2, 0 for t >= 1."""
    t = np.asarray(t, dtype=float)
    s = np.clip(2.0 * t - 1.0, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        g1 = np.where(s < 1, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
        g0 = np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
    return g1 / (g1 + g0)


@dataclass
class _Patch:
    centre: complex
    r0: float
    r1: float
    inverted: bool = False      # chart w = 1/z, polar in w
    bump: tuple = None          # (point, radius) for local puncture patches


class _Integrand:
    """Maps (patch, r, theta) to weighted integrand values."""

    def __init__(self, f, region, bumps, patches, ncomp):
        self.f = f
        self.region = region
        self.bumps = bumps
        self.patches = patches
        self.ncomp = ncomp
        self.needs_indicator = region.kind in ("complement", "mask")

    def __call__(self, pid, r, th):
        p = self.patches[pid]
        e = np.exp(1j * th)
        if p.inverted:
            w = r * e
            with np.errstate(divide="ignore", invalid="ignore"):
                z = 1.0 / w
            jac = r ** -3.0
        else:
            z = p.centre + r * e
            jac = r
        weight = np.ones(r.shape)
        if p.bump is not None:
            weight = weight * _bump(r / p.bump[1])
        else:
            for (q, rho) in self.bumps:
                weight = weight * (1.0 - _bump(np.abs(z - q) / rho))
        if self.needs_indicator:
            weight = weight * self.region.contains(z)
        out = np.zeros(r.shape + ((self.ncomp,) if self.ncomp else ()), dtype=complex)
        live = weight != 0
        if np.any(live):
            fz = np.asarray(self.f(z[live]))
            if fz.ndim == 1 and self.ncomp:
                fz = fz[:, None]
            scale = (weight * jac)[live]
            vals = fz * (scale[:, None] if self.ncomp else scale)
            if not np.all(np.isfinite(vals)):
                bad = z[live][~np.isfinite(vals if vals.ndim == 1 else vals.sum(axis=1))]
                raise NotIntegrable(f"integrand not finite near {bad[:3]}")
            out[live] = vals
        return out


def _layout(region, singular, default_radius):
    """Regular patches plus puncture bumps for a region."""
    pts = [(complex(p), None) for p in singular if not is_infinite(p)]
    pts += [(complex(p), float(rad)) for p, rad in region.exclusions if not is_infinite(p)]
    finite = [p for p, _ in pts]
    if region.kind in ("sphere", "complement", "mask"):
        big = max([abs(p) for p in finite], default=0.0)
        Rs = max(2.0, 2.0 * big)
        patches = [_Patch(0j, 0.0, Rs), _Patch(0j, 0.0, 1.0 / Rs, inverted=True)]
        centres = [0j]
        if region.kind == "mask":
            x0, x1, y0, y1 = region.bbox
            c = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
            rad = 0.5 * math.hypot(x1 - x0, y1 - y0) * (1 + 1e-12)
            patches = [_Patch(c, 0.0, rad)]
            centres = [c]
            Rs = None
    elif region.kind == "disk":
        patches = [_Patch(region.center, 0.0, region.R)]
        centres = [region.center]
    elif region.kind == "annulus":
        patches = [_Patch(region.center, region.r, region.R)]
        centres = [region.center] if region.r == 0 else []
    else:
        return [], []

    def room(p):
        if region.kind == "disk":
            return region.R - abs(p - region.center)
        if region.kind == "annulus":
            a = abs(p - region.center)
            return min(a - region.r, region.R - a)
        if region.kind == "mask":
            x0, x1, y0, y1 = region.bbox
            return min(p.real - x0, x1 - p.real, p.imag - y0, y1 - p.imag)
        return Rs - abs(p)

    bumps = []
    for i, (p, rad) in enumerate(pts):
        if any(abs(p - c) < 1e-12 for c in centres):
            continue  # a polar centre already resolves a simple pole
        if any(abs(p - q) < 1e-12 for q, _ in bumps):
            continue
        others = [abs(p - q) for j, (q, _) in enumerate(pts) if j != i and abs(p - q) > 1e-12]
        others += [abs(p - c) for c in centres]
        rho = default_radius if rad is None else rad
        if others:
            rho = min(rho, 0.45 * min(others))
        rho = min(rho, 0.9 * room(p))
        if rho > 1e-9:
            bumps.append((p, rho))
    patches = patches + [_Patch(p, 0.0, rho, bump=(p, rho)) for p, rho in bumps]
    return patches, bumps


# ---------------------------------------------------------------------------
# adaptive driver


class _Rule:
    def __init__(self, order):
        x, w = leggauss(order)
        X, Y = np.meshgrid(x, x, indexing="ij")
        W = np.outer(w, w)
        self.u = X.ravel()
        self.v = Y.ravel()
        self.w = W.ravel()
        # children: 4 sub-squares of [-1,1]^2
        cu, cv, cw = [], [], []
        for sx in (-0.5, 0.5):
            for sy in (-0.5, 0.5):
                cu.append(sx + 0.5 * self.u)
                cv.append(sy + 0.5 * self.v)
                cw.append(0.25 * self.w)
        self.cu = np.stack(cu)
        self.cv = np.stack(cv)
        self.cw = np.stack(cw)


def _child_boxes(boxes):
    a0, a1, b0, b1 = boxes.T
    am = 0.5 * (a0 + a1)
    bm = 0.5 * (b0 + b1)
    out = np.empty((boxes.shape[0], 4, 4))
    k = 0
    for lo_a, hi_a in ((a0, am), (am, a1)):
        for lo_b, hi_b in ((b0, bm), (bm, b1)):
            out[:, k] = np.stack([lo_a, hi_a, lo_b, hi_b], axis=1)
            k += 1
    return out


def _eval_children(integrand, rule, pids, boxes, ncomp, threads):
    """Integrals of each cell's four children, shape (ncell, 4[, ncomp])."""
    n = boxes.shape[0]
    shape = (n, 4) + ((ncomp,) if ncomp else ())
    out = np.zeros(shape, dtype=complex)
    if n == 0:
        return out
    a0, a1, b0, b1 = boxes.T
    ha = 0.5 * (a1 - a0)
    hb = 0.5 * (b1 - b0)
    ma = 0.5 * (a0 + a1)
    mb = 0.5 * (b0 + b1)
    jobs = []
    for pid in np.unique(pids):
        idx = np.flatnonzero(pids == pid)
        # chunk so each evaluation call sees a bounded number of nodes
        step = max(1, 4096 // rule.cu.size)
        for s in range(0, idx.size, step):
            jobs.append((int(pid), idx[s:s + step]))

    def run(job):
        pid, idx = job
        r = ma[idx, None, None] + ha[idx, None, None] * rule.cu[None]
        th = mb[idx, None, None] + hb[idx, None, None] * rule.cv[None]
        vals = integrand(pid, r.ravel(), th.ravel())
        vals = vals.reshape(r.shape + vals.shape[1:])
        wts = (rule.cw[None] * (ha * hb)[idx, None, None])
        if ncomp:
            return idx, np.einsum("ckq,ckqm->ckm", wts, vals)
        return idx, np.einsum("ckq,ckq->ck", wts, vals)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    for idx, vals in results:
        out[idx] = vals
    return out


def _initial_cells(patches, initial=None):
    boxes, pids = [], []
    for pid, p in enumerate(patches):
        if initial is not None and p.bump is None:
            nr, nt = initial
        else:
            nr = 2 if p.bump is not None else 4
            nt = 8
        redges = np.linspace(p.r0, p.r1, nr + 1)
        tedges = np.linspace(0.0, TWO_PI, nt + 1)
        for i in range(nr):
            for j in range(nt):
                boxes.append((redges[i], redges[i + 1], tedges[j], tedges[j + 1]))
                pids.append(pid)
    return np.array(boxes, dtype=float).reshape(-1, 4), np.array(pids, dtype=int)


def _looks_divergent(history, tol):
    if len(history) < 7:
        return False
    mags = [abs(h) for h in history[-6:]]
    inc = np.diff(mags)
    if np.any(inc <= 10 * tol):
        return False
    return bool(np.all(inc[1:] >= 0.9 * inc[:-1]))


def integrate(f, region: Region, tol: float = DEFAULT_TOL, budget: int = DEFAULT_BUDGET,
              singular=(), ncomp: int = 0, bump_radius: float = 0.25, threads: int = 1,
              max_rounds: int = 200, initial=None) -> QuadratureResult:
    """Adaptive integral of a vectorised complex integrand ``f`` over ``region``.

    ``f`` takes a 1-D complex array of points and returns values of the same
    length (or shape (n, ncomp) when ``ncomp`` > 0, with the error measured by
    the largest component).  Budget exhaustion raises :class:`BudgetExceeded`
    unless the partial sums grow without settling, which is reported as
    ``converged=False, diverged=True``.  ``initial = (nr, nt)`` overrides the
    starting grid of the regular patches, useful when each node is costly.
    """
    patches, bumps = _layout(region, singular, bump_radius)
    zero = np.zeros(ncomp, complex) if ncomp else 0j
    if not patches:
        return QuadratureResult(zero, 0.0, 0, True)
    integrand = _Integrand(f, region, bumps, patches, ncomp)
    rule = _Rule(GAUSS_ORDER)

    boxes, pids = _initial_cells(patches, initial)
    if boxes.shape[0] > budget:
        raise BudgetExceeded(f"quadrature budget of {budget} cells is below the {boxes.shape[0]} starting cells")
    # coarse value for each initial cell: its own rule
    a0, a1, b0, b1 = boxes.T
    coarse = np.zeros((boxes.shape[0],) + ((ncomp,) if ncomp else ()), dtype=complex)
    for pid in np.unique(pids):
        idx = np.flatnonzero(pids == pid)
        r = 0.5 * (a0 + a1)[idx, None] + 0.5 * (a1 - a0)[idx, None] * rule.u[None]
        th = 0.5 * (b0 + b1)[idx, None] + 0.5 * (b1 - b0)[idx, None] * rule.v[None]
        vals = integrand(pid, r.ravel(), th.ravel()).reshape(r.shape + ((ncomp,) if ncomp else ()))
        wts = rule.w[None] * (0.25 * (a1 - a0) * (b1 - b0))[idx, None]
        coarse[idx] = np.einsum("cq,cq...->c...", wts, vals)
    children = _eval_children(integrand, rule, pids, boxes, ncomp, threads)
    used = boxes.shape[0]

    done_val = zero.copy() if ncomp else 0j
    done_err = 0.0
    history = []
    for _ in range(max_rounds):
        fine = children.sum(axis=1)
        diff = np.abs(fine - coarse)
        err = diff.max(axis=1) if ncomp else diff
        total = done_val + fine.sum(axis=0)
        total_err = done_err + float(err.sum())
        history.append(total if not ncomp else total[0])
        if total_err <= tol:
            return QuadratureResult(total, total_err, used, True, False, tuple(history))
        if _looks_divergent(history, tol):
            return QuadratureResult(total, total_err, used, False, True, tuple(history))
        order = np.argsort(-err, kind="stable")
        csum = np.cumsum(err[order])
        keep_err = total_err - csum
        nsplit = int(np.searchsorted(-keep_err, -0.25 * tol)) + 1
        nsplit = min(max(nsplit, 1), order.size)
        if used + 4 * nsplit > budget:
            raise BudgetExceeded(
                f"quadrature budget of {budget} cells exhausted (estimate {total}, error {total_err:.3e})"
            )
        split = order[:nsplit]
        rest = order[nsplit:]
        # retire cells whose error is negligible to keep the working set small
        tiny = err[rest] < 1e-3 * tol / max(order.size, 1)
        retired = rest[tiny]
        done_val = done_val + fine[retired].sum(axis=0)
        done_err += float(err[retired].sum())
        keep = rest[~tiny]
        new_boxes = _child_boxes(boxes[split]).reshape(-1, 4)
        new_pids = np.repeat(pids[split], 4)
        new_coarse = children[split].reshape((-1,) + children.shape[2:])
        new_children = _eval_children(integrand, rule, new_pids, new_boxes, ncomp, threads)
        used += new_boxes.shape[0]
        boxes = np.concatenate([boxes[keep], new_boxes])
        pids = np.concatenate([pids[keep], new_pids])
        coarse = np.concatenate([coarse[keep], new_coarse])
        children = np.concatenate([children[keep], new_children])
    raise BudgetExceeded(f"quadrature did not converge in {max_rounds} refinement rounds")


# ---------------------------------------------------------------------------
# public operations


def _poles_of(obj):
    poles = getattr(obj, "poles", ())
    return [p for p, _ in poles]


def integrate_l1(f, region: Region, tol: float = DEFAULT_TOL, budget: int = DEFAULT_BUDGET,
                 singular=(), **kw) -> QuadratureResult:
    """Integral of |f| over ``region``.  Poles listed on ``f.poles`` are declared automatically."""
    sing = list(singular) + _poles_of(f)
    res = integrate(lambda z: np.abs(f(z)), region, tol, budget, singular=sing, **kw)
    res.value = float(np.real(res.value))
    res.partial_sums = tuple(float(np.real(h)) for h in res.partial_sums)
    return res


def pairing(mu, phi, region: Region = None, tol: float = DEFAULT_TOL,
            budget: int = DEFAULT_BUDGET, **kw) -> QuadratureResult:
    """Complex integral of mu * phi dm."""
    region = region or Region.sphere()
    return integrate(lambda z: mu(z) * phi(z), region, tol, budget, singular=_poles_of(phi), **kw)


def teich_lower_bound(mu, basis, region: Region = None, tol: float = DEFAULT_TOL,
                      budget: int = DEFAULT_BUDGET) -> float:
    """max over the basis of |<mu, phi>| / ||phi||_1, a lower bound for the Teichmueller norm."""
    region = region or Region.sphere()
    best = 0.0
    for phi in basis:
        norm = integrate_l1(phi, region, tol, budget).value
        if norm == 0:
            continue
        best = max(best, abs(pairing(mu, phi, region, tol, budget).value) / norm)
    return best


def monte_carlo_l1(f, samples: int, seed: int = 0, batch: int = 1 << 20):
    """Stratified Monte Carlo estimate of the L1 norm of f over the sphere.

    Points are drawn uniformly on the unit sphere (stratified in the height
    coordinate) and pushed to the plane by stereographic projection; the
    planar density of that law is 1 / (pi (1 + |z|^2)^2).  Returns
    (estimate, standard error).
    """
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        strata = (np.arange(n) + rng.random(n)) / n
        h = 2.0 * strata - 1.0  # height, uniform by Archimedes
        ang = rng.random(n) * TWO_PI
        rad = np.sqrt((1 + h) / np.maximum(1 - h, 1e-300))
        z = rad * np.exp(1j * ang)
        dens = 1.0 / (math.pi * (1.0 + rad ** 2) ** 2)
        vals = np.abs(f(z)) / dens
        vals = vals[np.isfinite(vals)]
        total += vals.sum()
        total_sq += (vals ** 2).sum()
        done += n
    mean = total / samples
    var = max(total_sq / samples - mean ** 2, 0.0)
    return mean, math.sqrt(var / samples)

"""Experiment drivers: Cesaro decay, Hamilton-Krushkal degeneration, geodesic rays."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import quadrature
from .errors import IndexOutOfRange, NotApplicable, UnresolvedPostcritical
from .lattes import _default_probes, q_basis
from .quadrature import Region
from .rational_map import RationalMap, postcritical_set
from .transfer import DEFAULT_NODE_BUDGET, CesaroSeries, QuadDifferential, ruelle_tree

EXPERIMENTS = (
    "cesaro-decay", "lattes-check", "duality", "bcond", "area",
    "kernel-projection", "exhaustion-defect", "rays",
)


@dataclass
class Experiment:
    """One job read from an experiment file; ``params`` holds experiment-specific fields."""

    name: str
    map_ref: str | None = None
    functions: list = field(default_factory=list)
    region: Region | None = None
    n_schedule: list = field(default_factory=list)
    tol: float = 1e-6
    seed: int = 0
    output: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.name!r}; expected one of {', '.join(EXPERIMENTS)}")
        sched = [int(n) for n in self.n_schedule]
        if any(n < 1 for n in sched):
            raise ValueError("n_schedule entries must be positive")
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("n_schedule must be strictly increasing")
        self.n_schedule = sched


# ---------------------------------------------------------------------------
# Cesaro decay


@dataclass
class TransferMatrix:
    """R_* restricted to span(basis): R_* b_j = sum_i M[i, j] b_i."""

    basis: list
    matrix: np.ndarray
    residual: float

    def coefficients(self, phi: QuadDifferential, probes):
        A = np.stack([b(probes) for b in self.basis], axis=1)
        y = phi(probes)
        c, *_ = np.linalg.lstsq(A, y, rcond=None)
        res = float(np.max(np.abs(A @ c - y)) / np.max(np.abs(y)))
        return c, res


def transfer_matrix(R: RationalMap, basis=None, probes=None) -> TransferMatrix:
    """Least-squares matrix of R_* on a quadratic-differential basis, with its relative fit residual."""
    if basis is None:
        pc = postcritical_set(R)
        if not pc.resolved:
            raise UnresolvedPostcritical("transfer matrix needs a resolved postcritical set")
        basis = q_basis(pc)
    if not basis:
        raise NotApplicable("no quadratic differentials")
    probes = _default_probes(R, count=max(20, 4 * len(basis))) if probes is None else probes
    A = np.stack([b(probes) for b in basis], axis=1)
    B = np.stack([ruelle_tree(R, b, probes, 1).levels[:, 1] for b in basis], axis=1)
    M, *_ = np.linalg.lstsq(A, B, rcond=None)
    res = float(np.max(np.abs(A @ M - B)) / np.max(np.abs(B)))
    return TransferMatrix(list(basis), M, res)


def _cesaro_coeffs(M, c, schedule):
    # coefficient vectors of the Cesaro averages of phi for n in schedule
    out = []
    acc = np.zeros_like(c)
    cur = c.copy()
    k = 0
    for n in schedule:
        while k < n:
            acc = acc + cur
            cur = M @ cur
            k += 1
        out.append(acc / n)
    return np.array(out)


def choose_method(R: RationalMap, n_max: int, node_budget: int = DEFAULT_NODE_BUDGET) -> str:
    return "tree" if R.degree ** (n_max - 1) <= node_budget else "basis"


def cesaro_decay(R: RationalMap, phi: QuadDifferential, n_schedule, region: Region,
                 tol: float = 1e-6, method: str = "auto", node_budget: int = DEFAULT_NODE_BUDGET,
                 basis=None, threads: int = 1, budget: int = quadrature.DEFAULT_BUDGET) -> CesaroSeries:
    """L1(region) norm of the order-n Cesaro average of phi for n in the schedule.

    ``tree`` sums the depth n_max - 1 preimage tree at every quadrature node
    (one tree serves all n).  ``basis`` iterates the transfer matrix of R_*
    on the quadratic-differential basis, which is exact up to the fit residual
    and is the only option when d^(n-1) leaves do not fit the node budget.
    ``auto`` picks ``tree`` when it fits.
    """
    sched = [int(n) for n in n_schedule]
    Experiment("cesaro-decay", n_schedule=sched)  # validates the schedule
    n_max = sched[-1]
    if method == "auto":
        method = choose_method(R, n_max, node_budget)
    if method == "tree":
        def f(z):
            lv = ruelle_tree(R, phi, z, n_max - 1, node_budget=node_budget, threads=threads)
            return np.stack([np.abs(lv.cesaro(n)) for n in sched], axis=1)

        extra = 0.0
    elif method == "basis":
        tm = transfer_matrix(R, basis)
        probes = _default_probes(R, count=max(20, 4 * len(tm.basis)), seed=11)
        c, fit = tm.coefficients(phi, probes)
        if fit > 1e-8:
            raise NotApplicable(f"phi is not in the span of the basis (fit residual {fit:.2e})")
        coeffs = _cesaro_coeffs(tm.matrix, c, sched)

        def f(z):
            vals = np.stack([b(z) for b in tm.basis], axis=1)
            return np.abs(vals @ coeffs.T)

        extra = tm.residual + fit
    else:
        raise ValueError(f"unknown method {method!r}")
    # every node costs a whole tree, so start from a coarse grid and let refinement work
    res = quadrature.integrate(f, region, tol, budget, singular=[p for p, _ in phi.poles],
                               ncomp=len(sched), initial=(1, 4))
    values = [float(np.real(v)) for v in np.atleast_1d(res.value)]
    errors = [res.abs_error_estimate + extra * abs(v) for v in values]
    return CesaroSeries(sched, values, target=phi.label, errors=errors, method=method)


# ---------------------------------------------------------------------------
# Hamilton-Krushkal family on the disk


def hk_constant(k: int) -> float:
    """c_k with int_disk |c_k z^k| dm = 1, from one radial Gauss-Legendre integral."""
    if k < 0:
        raise ValueError("k must be non-negative")
    x, w = np.polynomial.legendre.leggauss(k // 2 + 2)
    r = 0.5 * (x + 1)
    radial = 0.5 * float(np.sum(w * r ** (k + 1)))
    return 1.0 / (2 * math.pi * radial)


def hk_family(k: int) -> QuadDifferential:
    """phi_k(z) = c_k z^k, unit L1 norm on the unit disk."""
    c = hk_constant(k)
    num = np.zeros(k + 1, dtype=complex)
    num[k] = c
    return QuadDifferential((num, np.array([1.0 + 0j])), label=f"hk{k}")


def hk_line_field(k: int):
    """The unimodular field conj(z)^k / |z|^k aligned with phi_k."""
    def mu(z):
        z = np.asarray(z, dtype=complex)
        return np.exp(-1j * k * np.angle(z))

    return mu


def hk_sup(k: int, radius: float) -> float:
    """sup over |z| <= radius of |phi_k|."""
    return hk_constant(k) * radius ** k


# ---------------------------------------------------------------------------
# geodesic rays in a truncated sup-norm sequence space


@dataclass
class RayPoint:
    vector: np.ndarray
    t: float
    r: float | None = None
    i: int | None = None
    mu_norm: float | None = None

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("ray parameter must be non-negative")


def sup_norm(v) -> float:
    return float(np.max(np.abs(v))) if len(v) else 0.0


def ray_point(N: int, mu_norm: float, r: float, i: int, t: float) -> RayPoint:
    """Ray with radius r and index i at time t: t m for t <= r, else r m + (t - r) mu_norm e_i, m = mu_norm (1, ..., 1)."""
    if not 1 <= i <= N:
        raise IndexOutOfRange(f"index {i} outside 1..{N}")
    if mu_norm < 0 or r < mu_norm:
        raise ValueError("need r >= mu_norm >= 0")
    if t < 0:
        raise ValueError("ray parameter must be non-negative")
    v = np.full(N, min(t, r) * mu_norm, dtype=complex)
    if t > r:
        v[i - 1] += (t - r) * mu_norm
    return RayPoint(v, float(t), float(r), int(i), float(mu_norm))


def ray_distance_curves(N: int, mu_norm: float, pairs, t_schedule) -> np.ndarray:
    """Sup-norm distance between two rays along t; ``pairs`` holds ((r1, i1), (r2, i2))."""
    out = np.zeros((len(pairs), len(t_schedule)))
    for a, ((r1, i1), (r2, i2)) in enumerate(pairs):
        for b, t in enumerate(t_schedule):
            p = ray_point(N, mu_norm, r1, i1, t).vector
            q = ray_point(N, mu_norm, r2, i2, t).vector
            out[a, b] = sup_norm(p - q)
    return out


def isometry_ray_audit(points, mu_norm: float | None = None) -> dict:
    """Check ||psi(t1) - psi(t2)|| = mu_norm |t1 - t2| over all pairs of ``points``."""
    pts = list(points)
    if mu_norm is None:
        known = {p.mu_norm for p in pts if p.mu_norm is not None}
        if len(known) != 1:
            raise ValueError("mu_norm not given and not recorded on the points")
        mu_norm = known.pop()
    dev = 0.0
    for p, q in combinations(pts, 2):
        dev = max(dev, abs(sup_norm(p.vector - q.vector) - mu_norm * abs(p.t - q.t)))
    return {"pairs": len(pts) * (len(pts) - 1) // 2, "speed": mu_norm, "max_deviation": dev}


def ray_statement_deviations(N: int = 8, mu_norm: float = 1.0, t_schedule=None) -> dict:
    """Deviations from the three quantified ray statements.

    bounded: same index, radii 2 and 3: distance <= |r1 - r2| mu_norm, with
    equality once t >= 3.  divergent: indices 1 and N, radii 2 and 3:
    distance = (t - 2) mu_norm for t >= 3.  isometry: each ray has speed mu_norm.
    """
    ts = np.linspace(0, 20, 81) if t_schedule is None else np.asarray(t_schedule, float)
    r1, r2 = 2.0 * max(mu_norm, 1), 3.0 * max(mu_norm, 1)
    same = ray_distance_curves(N, mu_norm, [((r1, 1), (r2, 1))], ts)[0]
    gap = abs(r1 - r2) * mu_norm
    bounded = float(np.max(np.maximum(same - gap, 0)))
    late = ts >= max(r1, r2)
    bounded = max(bounded, float(np.max(np.abs(same[late] - gap))))
    diff = ray_distance_curves(N, mu_norm, [((r1, 1), (r2, N))], ts)[0]
    divergent = float(np.max(np.abs(diff[late] - (ts[late] - min(r1, r2)) * mu_norm)))
    iso = 0.0
    for i in (1, N):
        iso = max(iso, isometry_ray_audit([ray_point(N, mu_norm, r1, i, t) for t in ts])["max_deviation"])
    return {"bounded": bounded, "divergent": divergent, "isometry": iso}

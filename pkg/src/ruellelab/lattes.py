"""Flexible Lattes maps from the Weierstrass duplication formula.

For the lattice with invariants (g2, g3), the Weierstrass function satisfies
p(2u) = R(p(u)) with

    R(z) = (z^4 + g2/2 z^2 + 2 g3 z + g2^2/16) / (4 z^3 - g2 z - g3).

The quadratic differential du^2 = dz^2 / (4z^3 - g2 z - g3) pulls back to
4 du^2 under u -> 2u, which makes 1 / prod(z - e_i) a fixed point of the
Ruelle operator and conj(phi)/|phi| an invariant line field.  Both facts are
re-checked numerically every time a map is built.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadPointCount,
    DegenerateInvariants,
    NotApplicable,
    UnresolvedPostcritical,
)
from .rational_map import (
    INFINITY,
    PostcriticalData,
    RationalMap,
    chordal,
    critical_values,
    is_infinite,
    postcritical_set,
)
from .roots import poly_roots
from .transfer import LineField, QuadDifferential, beltrami_values, ruelle_tree

PROBES = (2 + 1j, -0.7 + 1.3j, 0.4 - 2.2j, -3.1 - 0.6j, 0.15 + 0.35j)


@dataclass
class LattesData:
    g2: complex
    g3: complex
    map: RationalMap
    branch_points: tuple
    canonical_phi: QuadDifferential
    report: dict = field(default_factory=dict)


def discriminant(g2, g3) -> complex:
    return complex(g2) ** 3 - 27 * complex(g3) ** 2


def _probe_points(R, count=None):
    crit = [v for v in critical_values(R) if not is_infinite(v)]
    pts = [p for p in PROBES if all(abs(p - v) > 1e-3 for v in crit)]
    return pts[:count] if count else pts


def flexible_lattes(g2, g3, check: bool = True, rel_tol: float = 1e-8) -> LattesData:
    """Build the degree-4 Lattes map for (g2, g3) and verify its invariants."""
    g2, g3 = complex(g2), complex(g3)
    disc = discriminant(g2, g3)
    scale = max(abs(g2) ** 3, 27 * abs(g3) ** 2, 1e-300)
    if abs(disc) <= 1e-10 * scale:
        raise DegenerateInvariants(f"g2^3 - 27 g3^2 = {disc} vanishes; the lattice degenerates")
    num = [g2 * g2 / 16, 2 * g3, g2 / 2, 0, 1]
    den = [-g3, -g2, 0, 4]
    R = RationalMap(num, den, label=f"lattes(g2={g2:g}, g3={g3:g})")
    e, _ = poly_roots(den)
    branch = tuple(complex(x) for x in e) + (INFINITY,)
    phi = canonical_quad_diff(branch)
    data = LattesData(g2, g3, R, branch, phi)
    if check:
        data.report = verify_lattes(data, rel_tol)
    return data


def verify_lattes(data: LattesData, rel_tol: float = 1e-8) -> dict:
    """Check degree, postcritical set and the Ruelle fixed point; raise on failure."""
    R = data.map
    if R.degree != 4:
        raise AssertionError(f"Lattes map has degree {R.degree}, expected 4")
    pc = postcritical_set(R)
    same = pc.resolved and len(pc.points) == 4 and all(
        min(chordal(p, q) for q in data.branch_points) < 1e-7 for p in pc.points
    )
    if not same:
        raise AssertionError(f"postcritical set {pc.points} differs from branch points")
    probes = np.array(_probe_points(R), dtype=complex)
    tree = ruelle_tree(R, data.canonical_phi, probes, 1)
    direct = data.canonical_phi(probes)
    fixed = float(np.max(np.abs(tree.levels[:, 1] - direct) / np.abs(direct)))
    if fixed > rel_tol:
        raise AssertionError(f"canonical differential is not Ruelle-fixed (residual {fixed:.2e})")
    return {"postcritical": [str(p) for p in pc.points], "fixed_point_residual": fixed}


def canonical_quad_diff(branch_points) -> QuadDifferential:
    """1 / prod(z - e_i) over the finite branch points."""
    pts = list(branch_points)
    if len(pts) != 4:
        raise BadPointCount(f"expected 4 branch points, got {len(pts)}")
    if sum(is_infinite(p) for p in pts) > 1:
        raise BadPointCount("at most one branch point may be infinite")
    return QuadDifferential.from_poles(pts, label="lattes_canonical")


def invariant_line_field(phi: QuadDifferential) -> LineField:
    """mu = conj(phi) / |phi|, unimodular off the zero set of phi."""
    return LineField(lambda z: np.conj(phi.unit(z)), label=f"conj({phi.label})/|{phi.label}|")


# ---------------------------------------------------------------------------
# integrable quadratic differentials on a finitely punctured sphere


def q_dimension(pc: PostcriticalData) -> int:
    return max(0, len(pc.points) - 3)


def q_basis(pc: PostcriticalData):
    """A basis of the integrable quadratic differentials on a finitely punctured sphere.

    With finite punctures p_1..p_f, the elements are z^j / prod(z - p_i):
    j = 0..f-3 when infinity is a puncture (decay |z|^-3, a simple pole there),
    j = 0..f-4 otherwise (decay |z|^-4, regular at infinity).
    """
    finite = pc.finite
    top = len(finite) - (3 if pc.has_infinity else 4)
    out = []
    for j in range(top + 1):
        num = np.zeros(j + 1, dtype=complex)
        num[j] = 1.0
        out.append(QuadDifferential.from_poles(finite, numerator=num, label=f"q{j}"))
    return out


def _resolved_basis(R, basis):
    if basis is not None:
        return list(basis)
    pc = postcritical_set(R)
    if not pc.resolved:
        raise UnresolvedPostcritical("postcritical orbits did not close up within the depth budget")
    return q_basis(pc)


def _default_probes(R, count=20, seed=7):
    rng = np.random.default_rng(seed)
    crit = np.array([v for v in critical_values(R) if not is_infinite(v)], dtype=complex)
    pts = []
    while len(pts) < count:
        z = complex(rng.normal(scale=1.5), rng.normal(scale=1.5))
        if crit.size == 0 or np.min(np.abs(crit - z)) > 0.05:
            pts.append(z)
    return np.array(pts)


def lattes_residual(R: RationalMap, basis=None, probes=None, search: int = 512, seed: int = 0) -> float:
    """Smallest relative Ruelle-fixed-point defect over the span of ``basis``.

    For each unit coefficient vector c, the defect is
    max_probe |R_* phi_c - phi_c| / max_probe |phi_c|; the minimum over a
    coarse search (basis vectors, least-singular-vector candidate and random
    unit vectors) is returned.  Values near zero flag a Lattes candidate.
    """
    basis = _resolved_basis(R, basis)
    if not basis:
        raise NotApplicable("no quadratic differentials (fewer than four punctures)")
    probes = _default_probes(R) if probes is None else np.asarray(probes, dtype=complex)
    A = np.stack([b(probes) for b in basis], axis=1)
    B = np.stack([ruelle_tree(R, b, probes, 1).levels[:, 1] for b in basis], axis=1)
    D = B - A
    k = len(basis)
    cands = [np.eye(k, dtype=complex)[j] for j in range(k)]
    if k > 1:
        _, _, vh = np.linalg.svd(D)
        cands.append(vh[-1].conj())
        rng = np.random.default_rng(seed)
        for _ in range(search):
            v = rng.normal(size=k) + 1j * rng.normal(size=k)
            cands.append(v / np.linalg.norm(v))
    best = np.inf
    for c in cands:
        top = np.max(np.abs(D @ c))
        bot = np.max(np.abs(A @ c))
        if bot > 0:
            best = min(best, top / bot)
    return float(best)


def beltrami_invariance_residual(R: RationalMap, mu: LineField, points) -> float:
    """max |Bel(mu) - mu| over ``points``."""
    z = np.asarray(points, dtype=complex)
    return float(np.max(np.abs(beltrami_values(R, mu, z) - mu(z))))


def random_invariants(count: int, seed: int = 0, min_disc: float = 0.1):
    """Random (g2, g3) pairs with |g2^3 - 27 g3^2| above ``min_disc``."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        g2 = complex(rng.normal(scale=2), rng.normal(scale=2))
        g3 = complex(rng.normal(scale=2), rng.normal(scale=2))
        if abs(discriminant(g2, g3)) > min_disc:
            out.append((g2, g3))
    return out


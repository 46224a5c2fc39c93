"""Numeric harness: evaluation, finite-difference closedness, quadrature.

Closed manifolds are handled through single charts of full measure: the flat
4-torus is a genuine periodic box; S^2 and CP^2 use an affine chart (the
complement of a null set) whose coordinates are compactified axis by axis
with x = scale * tan(t).
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .chernweil import (
    ConnectionSection,
    MetricSpec,
    chern_weil_form,
    levi_civita,
    symmetrize,
)
from .forms import Form
from .symkernel import (
    ONE,
    ZERO,
    Expr,
    FuncSym,
    I,
    VarId,
    base,
    compile_numeric,
    const,
    expr_sum,
    func,
    x,
)

FuncImpls = Dict[str, Callable]


def thread_count() -> int:
    raw = os.environ.get("THETAHAT_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def pairwise_sum(values: Sequence[complex]) -> complex:
    """Fixed-shape pairwise reduction (independent of how values were produced)."""
    vals = list(values)
    if not vals:
        return 0j
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class IntegrationDomain:
    """Tensor-product quadrature domain.

    ``kind="periodic"``: box [0, L_i) with the uniform (trapezoidal) rule.
    ``kind="transformed"``: all of R^n, each axis mapped by x = s_i tan(t),
    t in (-pi/2, pi/2), with Gauss-Legendre nodes in t.
    """

    kind: str
    n: int
    resolution: int = 32
    periods: Tuple[float, ...] = ()
    scales: Tuple[float, ...] = ()
    orientation: int = 1

    def __post_init__(self):
        if self.kind not in ("periodic", "transformed"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.resolution < 8:
            raise ValueError("resolution must be >= 8")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        if self.kind == "periodic" and len(self.periods) != self.n:
            raise ValueError("periodic box needs one period per axis")
        if self.kind == "transformed" and len(self.scales) != self.n:
            raise ValueError("transformed chart needs one scale per axis")

    @staticmethod
    def periodic_box(n: int, period: float = 1.0, resolution: int = 32, orientation: int = 1):
        return IntegrationDomain("periodic", n, resolution, periods=(period,) * n,
                                 orientation=orientation)

    @staticmethod
    def tan_chart(n: int, scale: float = 1.0, resolution: int = 32, orientation: int = 1):
        return IntegrationDomain("transformed", n, resolution, scales=(scale,) * n,
                                 orientation=orientation)

    def with_resolution(self, m: int) -> "IntegrationDomain":
        return IntegrationDomain(self.kind, self.n, m, self.periods, self.scales, self.orientation)

    def flipped(self) -> "IntegrationDomain":
        return IntegrationDomain(self.kind, self.n, self.resolution, self.periods, self.scales,
                                 -self.orientation)

    def axis_rule(self, axis: int) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes (in x) and weights (including the substitution Jacobian)."""
        m = self.resolution
        if self.kind == "periodic":
            L = self.periods[axis]
            return np.arange(m) * (L / m), np.full(m, L / m)
        t, w = np.polynomial.legendre.leggauss(m)
        t = t * (math.pi / 2)
        w = w * (math.pi / 2)
        s = self.scales[axis]
        return s * np.tan(t), w * s / np.cos(t) ** 2


def _coords_for_slab(domain: IntegrationDomain, i0: int, rules):
    """Coordinates (and weights) of the grid slab with first index i0."""
    n = domain.n
    nodes = [r[0] for r in rules]
    weights = [r[1] for r in rules]
    rest = np.meshgrid(*nodes[1:], indexing="ij") if n > 1 else []
    wrest = np.ones(()) if n == 1 else np.prod(np.meshgrid(*weights[1:], indexing="ij"), axis=0)
    coords = {base(1): np.full(np.shape(wrest) if n > 1 else (1,), nodes[0][i0])}
    for a in range(1, n):
        coords[base(a + 1)] = rest[a - 1]
    w = weights[0][i0] * (wrest if n > 1 else np.ones(1))
    return coords, w


# ---------------------------------------------------------------------------
# densities


class DensityField:
    """Top-degree coefficient of an n-form on an n-chart, evaluated numerically."""

    def __init__(self, f: Form, n: int, funcs: Optional[FuncImpls] = None):
        degs = f.degrees()
        if degs and degs != {n}:
            raise ValueError(f"expected a homogeneous {n}-form, got degrees {sorted(degs)}")
        top = tuple(base(i) for i in range(1, n + 1))
        for g in f.terms:
            if g != top:
                raise ValueError("form is not top-degree on the base chart")
        self.n = n
        self.coefficient = f.terms.get(top, ZERO)
        self.funcs = dict(funcs or {})
        self._eval = compile_numeric(self.coefficient, self.funcs)
        self._cache: Dict[IntegrationDomain, List[Tuple[np.ndarray, np.ndarray]]] = {}

    def __call__(self, coords: Dict[VarId, np.ndarray]) -> np.ndarray:
        return self._eval(coords)

    def samples(self, domain: IntegrationDomain, threads: Optional[int] = None):
        """Per-slab (values, weights), cached per domain."""
        if domain.n != self.n:
            raise ValueError("domain dimension mismatch")
        hit = self._cache.get(domain)
        if hit is not None:
            return hit
        rules = [domain.axis_rule(a) for a in range(self.n)]

        def slab(i0):
            coords, w = _coords_for_slab(domain, i0, rules)
            if self.coefficient.is_zero():
                vals = np.zeros(np.shape(w), dtype=complex)
            else:
                vals = np.asarray(self._eval(coords), dtype=complex)
            if not np.all(np.isfinite(vals)):
                raise FloatingPointError("non-finite density sample")
            return vals, w

        threads = threads or thread_count()
        idx = range(domain.resolution)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                out = list(ex.map(slab, idx))
        else:
            out = [slab(i) for i in idx]
        self._cache[domain] = out
        return out

    def integral(self, domain: IntegrationDomain, threads: Optional[int] = None) -> complex:
        parts = [complex(np.sum(v * w)) for v, w in self.samples(domain, threads)]
        return domain.orientation * pairwise_sum(parts)

    def l1_norm(self, domain: IntegrationDomain, threads: Optional[int] = None) -> float:
        parts = [float(np.sum(np.abs(v) * w)) for v, w in self.samples(domain, threads)]
        return float(pairwise_sum(parts).real)

    def max_abs(self, domain: IntegrationDomain, threads: Optional[int] = None) -> float:
        return max(float(np.max(np.abs(v))) for v, _ in self.samples(domain, threads))


def integrate_top(f: Form, domain: IntegrationDomain, funcs: Optional[FuncImpls] = None,
                  threads: Optional[int] = None) -> complex:
    """Integral of a top-degree form over the domain (orientation applied)."""
    return DensityField(f, domain.n, funcs).integral(domain, threads)


# ---------------------------------------------------------------------------
# finite-difference closedness


def fd_exterior_derivative(f: Form, n: int, points: np.ndarray, h: float,
                           funcs: Optional[FuncImpls] = None) -> Dict[tuple, np.ndarray]:
    """Central-difference estimate of the components of df at ``points``.

    ``points`` has shape (N, n).  Returns {sorted index tuple: values}.
    """
    from itertools import combinations

    points = np.atleast_2d(np.asarray(points, dtype=float))
    p = f.degree()
    xs = [base(i) for i in range(1, n + 1)]
    for g in f.terms:
        if any(not v.is_base for v in g):
            raise ValueError("form must live on the base chart")
    evals = {g: compile_numeric(c, funcs) for g, c in f.terms.items()}

    def at(g, pts):
        ev = evals.get(g)
        if ev is None:
            return np.zeros(len(pts), dtype=complex)
        coords = {xs[a]: pts[:, a] for a in range(n)}
        vals = np.asarray(ev(coords), dtype=complex)
        if not np.all(np.isfinite(vals)):
            raise ZeroDivisionError("pole at sample point")
        return np.broadcast_to(vals, (len(pts),))

    partial_cache = {}

    def dpart(g, a):
        key = (g, a)
        if key not in partial_cache:
            step = np.zeros(n)
            step[a] = h
            partial_cache[key] = (at(g, points + step) - at(g, points - step)) / (2 * h)
        return partial_cache[key]

    out = {}
    for J in combinations(range(n), p + 1):
        acc = np.zeros(len(points), dtype=complex)
        for r, a in enumerate(J):
            g = tuple(xs[b] for b in J if b != a)
            if g in evals:
                term = dpart(g, a)
                acc = acc + term if r % 2 == 0 else acc - term
        out[tuple(xs[b] for b in J)] = acc
    return out


def fd_closedness_residual(f: Form, points: np.ndarray, h: float, n: Optional[int] = None,
                           funcs: Optional[FuncImpls] = None) -> float:
    """max |df| over points and components, by central differences."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = n or points.shape[1]
    comps = fd_exterior_derivative(f, n, points, h, funcs)
    if not comps:
        return 0.0
    return max(float(np.max(np.abs(v))) for v in comps.values())


# ---------------------------------------------------------------------------
# smooth periodic function symbols


@dataclass(frozen=True)
class Wave:
    """sin(2 pi k.x + phase) as an opaque function of the coordinates it uses."""

    k: Tuple[int, ...]
    phase: float

    def args(self) -> Tuple[VarId, ...]:
        return tuple(base(i + 1) for i, kk in enumerate(self.k) if kk)

    def impl(self, fs: FuncSym, coords) -> np.ndarray:
        arg = self.phase + sum(2 * math.pi * kk * np.asarray(coords[base(i + 1)])
                               for i, kk in enumerate(self.k) if kk)
        factor = 1.0
        for v in fs.partials:
            factor *= 2 * math.pi * self.k[v.a - 1]
        return factor * np.sin(arg + len(fs.partials) * math.pi / 2)


# ---------------------------------------------------------------------------
# fixtures


@dataclass(frozen=True, eq=False)
class Fixture:
    """A connection (or metric) on a full-measure chart plus its domain.

    ``orientation_note`` documents the coordinate orientation convention.
    """

    name: str
    source: object  # ConnectionSection or MetricSpec
    domain: IntegrationDomain
    funcs: FuncImpls = field(default_factory=dict)
    orientation_note: str = ""

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def section(self) -> ConnectionSection:
        if isinstance(self.source, MetricSpec):
            return _lc_cached(self.name, self.source)
        return self.source

    def __iter__(self):
        return iter((self.source, self.domain))


_LC: Dict[str, ConnectionSection] = {}


def _lc_cached(name: str, m: MetricSpec) -> ConnectionSection:
    if name not in _LC:
        _LC[name] = levi_civita(m)
    return _LC[name]


def flat_t4(resolution: int = 32) -> Fixture:
    return Fixture("flat_t4", ConnectionSection(4, {}, "explicit"),
                   IntegrationDomain.periodic_box(4, 1.0, resolution),
                   orientation_note="dx1^dx2^dx3^dx4 on the unit 4-torus")


def perturbed_t4(seed: int = 0, eps=Fraction(3, 10), resolution: int = 32,
                 extra_terms: int = 6) -> Fixture:
    """Flat torus connection plus eps times smooth periodic terms.

    Always contains eps*sin(2 pi x3) in Gamma^1_22 and eps*cos(2 pi x4) in
    Gamma^2_11; ``seed`` adds further random waves in random slots.  Entries
    are assigned without regard to lower-index order and then symmetrized.
    """
    if not isinstance(eps, Expr):
        eps = const(Fraction(eps).limit_denominator(10 ** 6))
    rng = np.random.default_rng(seed)
    waves: List[Wave] = [Wave((0, 0, 1, 0), 0.0), Wave((0, 0, 0, 1), math.pi / 2)]
    slots = [(1, 2, 2), (2, 1, 1)]
    amps = [ONE, ONE]
    for _ in range(extra_terms):
        k = tuple(int(v) for v in rng.integers(-1, 2, size=4))
        if not any(k):
            k = (1, 0, 0, 0)
        waves.append(Wave(k, float(rng.uniform(0, 2 * math.pi))))
        slots.append(tuple(int(v) for v in rng.integers(1, 5, size=3)))
        amps.append(const(Fraction(int(rng.integers(-8, 9)), 8)))
    raw: Dict[tuple, Expr] = {}
    funcs: FuncImpls = {}
    for idx, (w, slot, a) in enumerate(zip(waves, slots, amps)):
        name = f"w{idx + 1}"
        funcs[name] = w.impl
        raw[slot] = raw.get(slot, ZERO) + eps * a * func(name, w.args())
    sec = symmetrize(raw, 4)
    sec = ConnectionSection(4, sec.gamma, "perturbation")
    return Fixture(f"perturbed_t4(seed={seed})", sec,
                   IntegrationDomain.periodic_box(4, 1.0, resolution), funcs,
                   orientation_note="dx1^dx2^dx3^dx4 on the unit 4-torus")


def polynomial_section(seed: int = 0, n: int = 4, terms: int = 2, max_deg: int = 3) -> ConnectionSection:
    """Random polynomial torsion-free connection on R^n plus one planted term.

    The planted Gamma^1_12 = x1^4 x3^4 / 4 feeds the trace tr(theta), so
    the first Chern-Weil form has cubic coefficients in two variables and
    central differences of it carry a visible h^2 error.
    """
    import random

    rng = random.Random(seed)
    ent: Dict[tuple, Expr] = {}
    for k in range(1, n + 1):
        for i in range(1, n + 1):
            for j in range(i, n + 1):
                e = ZERO
                for _ in range(terms):
                    m = const(Fraction(rng.randint(-4, 4), 8))
                    for _ in range(rng.randint(0, max_deg)):
                        m = m * x(rng.randint(1, n))
                    e = e + m
                if not e.is_zero():
                    ent[(k, i, j)] = e
    if n >= 3:
        ent[(1, 1, 2)] = ent.get((1, 1, 2), ZERO) + const(Fraction(1, 4)) * x(1) ** 4 * x(3) ** 4
    return ConnectionSection(n, ent, "explicit")


def round_s2_metric() -> MetricSpec:
    """Unit round sphere in stereographic coordinates, 4/(1+|x|^2)^2 |dx|^2."""
    rho = 1 + x(1) ** 2 + x(2) ** 2
    c = const(4) / rho ** 2
    return MetricSpec.make([[c, ZERO], [ZERO, c]], [[ONE / c, ZERO], [ZERO, ONE / c]])


def round_s2(resolution: int = 32) -> Fixture:
    return Fixture("round_s2", round_s2_metric(), IntegrationDomain.tan_chart(2, 1.0, resolution),
                   orientation_note="dx1^dx2, stereographic chart missing one point")


def fubini_study_metric() -> MetricSpec:
    """Realified Fubini-Study metric on the affine chart of CP^2.

    Complex coordinates z1 = x1 + I x2, z2 = x3 + I x4; Hermitian metric
    h_jk = d_j d_kbar log(1 + |z|^2) = ((1+|z|^2) delta_jk - zbar_j z_k) / (1+|z|^2)^2
    and g(u, v) = Re h(u, v).
    """
    xs = [x(i) for i in range(1, 5)]
    z = [xs[0] + I * xs[1], xs[2] + I * xs[3]]
    zb = [e.conjugate() for e in z]
    rho = ONE + expr_sum(v * v for v in xs)
    h = [[((rho if j == k else ZERO) - zb[j] * z[k]) / rho ** 2 for k in range(2)]
         for j in range(2)]

    def dz(a, j):
        # component of d/dx_{a+1} along z_j
        if a // 2 != j:
            return ZERO
        return ONE if a % 2 == 0 else I

    g = [[expr_sum(h[j][k] * dz(a, j) * dz(b, k).conjugate()
                   for j in range(2) for k in range(2)).real_part()
          for b in range(4)] for a in range(4)]
    return MetricSpec.make(g)


def fubini_study_metric_numeric(p: np.ndarray) -> np.ndarray:
    """Closed-form real metric matrix at a point of R^4 (independent of the symbolic path)."""
    z = np.array([p[0] + 1j * p[1], p[2] + 1j * p[3]])
    rho = 1 + np.vdot(z, z).real
    h = (rho * np.eye(2) - np.outer(z.conj(), z)) / rho ** 2
    E = np.zeros((4, 2), dtype=complex)
    E[0, 0], E[1, 0], E[2, 1], E[3, 1] = 1, 1j, 1, 1j
    return np.real(E @ h @ E.conj().T)


_JMAT = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)


def fubini_study_curvature_numeric(p: np.ndarray) -> np.ndarray:
    """R^a_{bij} at ``p`` from the constant-holomorphic-curvature formula.

    R(X,Y)Z = g(Y,Z)X - g(X,Z)Y + g(JY,Z)JX - g(JX,Z)JY + 2 g(X,JY)JZ,
    the c = 4 space form, with J dx1 = dx2 on z1 = x1 + I x2 (columns of
    ``_JMAT`` are J applied to the coordinate fields).  Uses no Christoffel
    symbols, so it checks the symbolic pipeline independently.
    """
    g = fubini_study_metric_numeric(p)
    J = _JMAT
    E = np.eye(4)
    R = np.zeros((4, 4, 4, 4))
    for i in range(4):
        for j in range(4):
            X, Y = E[:, i], E[:, j]
            for b in range(4):
                Z = E[:, b]
                v = ((Y @ g @ Z) * X - (X @ g @ Z) * Y + ((J @ Y) @ g @ Z) * (J @ X)
                     - ((J @ X) @ g @ Z) * (J @ Y) + 2 * (X @ g @ (J @ Y)) * (J @ Z))
                R[:, b, i, j] = v
    return R


def fubini_study_density_oracle(p: np.ndarray) -> float:
    """dx1^dx2^dx3^dx4 coefficient of omega_2 = -(1/4 pi^2) sigma_2(Omega)."""
    R = fubini_study_curvature_numeric(p)
    # Omega^a_b = sum_{i<j} R^a_{bij} dx^i ^ dx^j; top part of alpha ^ beta
    pairs = ((0, 1, 2, 3, 1), (0, 2, 1, 3, -1), (0, 3, 1, 2, 1),
             (1, 2, 0, 3, 1), (1, 3, 0, 2, -1), (2, 3, 0, 1, 1))

    def top(al, be):
        return sum(sg * al[i, j] * be[k, l] for i, j, k, l, sg in pairs)

    sig2 = 0.0
    for a in range(4):
        for b in range(a + 1, 4):
            sig2 += top(R[a, a], R[b, b]) - top(R[a, b], R[b, a])
    return -sig2 / (4 * math.pi ** 2)


def fubini_study_cp2(resolution: int = 48) -> Fixture:
    return Fixture("fubini_study_cp2", _fs_metric_cached(),
                   IntegrationDomain.tan_chart(4, 1.0, resolution),
                   orientation_note=("dx1^dx2^dx3^dx4 with z1 = x1 + I x2, z2 = x3 + I x4 "
                                     "(the complex orientation); the integral of omega_2 is "
                                     "then -3 = -p1[CP^2]"))


@lru_cache(maxsize=1)
def _fs_metric_cached() -> MetricSpec:
    return fubini_study_metric()


FIXTURES = ("flat_t4", "perturbed_t4", "round_s2", "fubini_study_cp2")


def fixture(name: str, resolution: Optional[int] = None, **params) -> Fixture:
    """Look up a built-in fixture; ``perturbed_t4`` takes ``seed`` and ``eps``."""
    builders = {
        "flat_t4": flat_t4,
        "perturbed_t4": perturbed_t4,
        "round_s2": round_s2,
        "fubini_study_cp2": fubini_study_cp2,
    }
    if name not in builders:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}")
    if resolution is not None:
        params["resolution"] = resolution
    return builders[name](**params)


def characteristic_density(fx: Fixture, k: int) -> DensityField:
    if 2 * k != fx.n:
        raise ValueError(f"characteristic number needs 2k = n (k={k}, n={fx.n})")
    return DensityField(chern_weil_form(fx.section, k), fx.n, fx.funcs)


def characteristic_number(fx: Fixture, k: int, resolution: Optional[int] = None,
                          threads: Optional[int] = None) -> complex:
    """Integral of the pulled-back omega_k over the fixture's manifold."""
    dom = fx.domain if resolution is None else fx.domain.with_resolution(resolution)
    return characteristic_density(fx, k).integral(dom, threads)

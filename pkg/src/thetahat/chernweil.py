"""Connection sections of the connection bundle and their Chern-Weil forms.

A section is a torsion-free connection on one chart, given by Christoffel
symbols Gamma^k_ij(x) with i <= j.  Pulling the universal forms back along
it yields forms on the base.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Mapping, Sequence, Tuple

from .charforms import omega_form
from .connspace import ConnChart, build_Theta
from .forms import (
    Form,
    FormMatrix,
    d,
    mat_add,
    mat_d,
    mat_pullback,
    mat_trace,
    mat_wedge,
    principal_minor_sum,
    pullback,
)
from .symkernel import (
    I_OVER_2PI,
    ZERO,
    Expr,
    VarId,
    base,
    const,
    expr_sum,
    mat_identity,
    mat_inverse,
    mat_mul,
)

Index = Tuple[int, int, int]
HALF = const(Fraction(1, 2))


@dataclass(frozen=True, eq=False)
class ConnectionSection:
    """Torsion-free connection on a chart; ``gamma[(k, i, j)]`` with i <= j."""

    n: int
    gamma: Dict[Index, Expr]
    provenance: str = "explicit"

    def __post_init__(self):
        clean = {}
        for (k, i, j), e in self.gamma.items():
            if not all(1 <= t <= self.n for t in (k, i, j)):
                raise ValueError(f"index {(k, i, j)} out of range 1..{self.n}")
            if i > j:
                raise ValueError(f"store Gamma[{k}][{i}][{j}] as Gamma[{k}][{j}][{i}]")
            if any(not v.is_base for v in e.free_vars()):
                raise ValueError("section entries may depend on base coordinates only")
            if not e.is_zero():
                clean[(k, i, j)] = e
        object.__setattr__(self, "gamma", clean)

    def __eq__(self, other):
        return isinstance(other, ConnectionSection) and self.n == other.n and self.gamma == other.gamma

    def __call__(self, k: int, i: int, j: int) -> Expr:
        if i > j:
            i, j = j, i
        return self.gamma.get((k, i, j), ZERO)

    def substitution(self) -> Dict[VarId, Expr]:
        """Fiber coordinate -> value; base coordinates are left unchanged."""
        return {v: self(v.a, v.b, v.c) for v in ConnChart(self.n).fiber_vars}

    def raw(self) -> Dict[Index, Expr]:
        """All (k, i, j) entries, both lower orders, for feeding ``symmetrize``."""
        out = {}
        n = self.n
        for k in range(1, n + 1):
            for i in range(1, n + 1):
                for j in range(1, n + 1):
                    out[(k, i, j)] = self(k, i, j)
        return out


def section(n: int, entries: Mapping[Index, Expr], provenance: str = "explicit") -> ConnectionSection:
    """Build a section from entries given for i <= j (reordered if needed)."""
    gamma: Dict[Index, Expr] = {}
    for (k, i, j), e in entries.items():
        key = (k, min(i, j), max(i, j))
        if key in gamma:
            raise ValueError(f"duplicate entry for symmetric slot Gamma[{k}][{key[1]}][{key[2]}]")
        gamma[key] = e
    return ConnectionSection(n, gamma, provenance)


def symmetrize(raw: Mapping[Index, Expr], n: int | None = None) -> ConnectionSection:
    """Torsion-free part: (raw[k,i,j] + raw[k,j,i]) / 2."""
    if n is None:
        n = max((max(key) for key in raw), default=1)
    out = {}
    for k in range(1, n + 1):
        for i in range(1, n + 1):
            for j in range(i, n + 1):
                a = raw.get((k, i, j), ZERO)
                b = raw.get((k, j, i), ZERO)
                s = (a + b) * HALF
                if not s.is_zero():
                    out[(k, i, j)] = s
    return ConnectionSection(n, out, "symmetrized")


@dataclass(frozen=True, eq=False)
class MetricSpec:
    n: int
    g: Sequence[Sequence[Expr]] = field(repr=False)
    g_inv: Sequence[Sequence[Expr]] = field(repr=False)

    @staticmethod
    def make(g: Sequence[Sequence[Expr]], g_inv: Sequence[Sequence[Expr]] | None = None) -> "MetricSpec":
        n = len(g)
        g = [list(row) for row in g]
        for i in range(n):
            for j in range(i + 1, n):
                if g[i][j] != g[j][i]:
                    raise ValueError("metric is not symmetric")
        if g_inv is None:
            try:
                g_inv = mat_inverse(g)
            except ZeroDivisionError:
                raise ValueError("non-invertible metric") from None
        else:
            g_inv = [list(row) for row in g_inv]
            if mat_mul(g, g_inv) != mat_identity(n):
                raise ValueError("g_inv is not the inverse of g")
        return MetricSpec(n, g, g_inv)


def levi_civita(m: MetricSpec) -> ConnectionSection:
    """Christoffel symbols 1/2 g^kl (d_i g_lj + d_j g_li - d_l g_ij)."""
    n = m.n
    xs = [base(i) for i in range(1, n + 1)]
    dg = [[[m.g[a][b].partial(xs[c]) for c in range(n)] for b in range(n)] for a in range(n)]
    out = {}
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                parts = []
                for l in range(n):
                    if m.g_inv[k][l].is_zero():
                        continue
                    inner = dg[l][j][i] + dg[l][i][j] - dg[i][j][l]
                    if not inner.is_zero():
                        parts.append(m.g_inv[k][l] * inner)
                e = expr_sum(parts) * HALF
                if not e.is_zero():
                    out[(k + 1, i + 1, j + 1)] = e
    return ConnectionSection(n, out, "levi_civita")


def pullback_section(f: Form, s: ConnectionSection) -> Form:
    """Pull a form on the connection chart back to the base along ``s``."""
    return pullback(f, s.substitution())


def pullback_section_matrix(a: FormMatrix, s: ConnectionSection) -> FormMatrix:
    return mat_pullback(a, s.substitution())


def connection_form(s: ConnectionSection) -> FormMatrix:
    """theta_s^a_b = Gamma^a_ib(x) dx^i."""
    n = s.n
    return FormMatrix([[Form({(base(i),): s(a, i, b) for i in range(1, n + 1)})
                        for b in range(1, n + 1)] for a in range(1, n + 1)])


def classical_curvature(s: ConnectionSection) -> FormMatrix:
    """R = d theta_s + theta_s ^ theta_s on the base chart."""
    th = connection_form(s)
    return mat_add(mat_d(th), mat_wedge(th, th))


def chern_weil_form(s: ConnectionSection, k: int, method: str = "curvature") -> Form:
    """Pullback of omega_k along the section.

    ``method="direct"`` pulls the universal omega_k back term by term.  The
    default pulls back Theta first and takes principal minors on the base;
    pullback is an algebra map, so both give the same form, and the second is
    far cheaper when the section has rational coefficients.
    """
    if k < 1 or k > s.n:
        raise ValueError(f"order k must satisfy 1 <= k <= n, got k={k}, n={s.n}")
    if method == "direct":
        return pullback_section(omega_form(s.n, k), s)
    if method != "curvature":
        raise ValueError(f"unknown method {method!r}")
    if 2 * k > s.n:
        return Form()
    R = pullback_section_matrix(build_Theta(ConnChart(s.n)), s)
    return principal_minor_sum(R, k).scale(I_OVER_2PI ** k)


def first_form_exact(s: ConnectionSection) -> Form:
    """(I/2pi) d tr(theta_s)."""
    return d(mat_trace(connection_form(s))).scale(I_OVER_2PI)

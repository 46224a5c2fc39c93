"""Chart model of the bundle of torsion-free connections.

Coordinates on a chart are the base coordinates x^i together with the fiber
coordinates Gamma^a_ib (i <= b).  This module builds the tautological
connection matrix theta, its curvature Theta = d theta + theta ^ theta, the
induced change of fiber coordinates under a change of base chart, and the
residual checks for the transformation laws of theta and Theta.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

from .forms import (
    Form,
    FormMatrix,
    mat_add,
    mat_d,
    mat_pullback,
    mat_wedge,
    substitute_coefficients,
    wedge,
)
from .symkernel import (
    ZERO,
    Expr,
    VarId,
    base,
    expr_sum,
    fiber,
    mat_identity,
    mat_inverse,
    mat_mul,
    substitute,
    var,
)


@dataclass(frozen=True)
class ConnChart:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def base_vars(self) -> List[VarId]:
        return [base(i) for i in range(1, self.n + 1)]

    @property
    def fiber_vars(self) -> List[VarId]:
        n = self.n
        return [fiber(a, i, b) for a in range(1, n + 1)
                for i in range(1, n + 1) for b in range(i, n + 1)]

    def x(self, i: int) -> Expr:
        return var(base(i))

    def gamma(self, a: int, i: int, b: int) -> Expr:
        return var(fiber(a, i, b))


@lru_cache(maxsize=None)
def build_theta(c: ConnChart) -> FormMatrix:
    """theta^a_b = sum_i Gamma^a_ib dx^i."""
    n = c.n
    rows = []
    for a in range(1, n + 1):
        row = []
        for b in range(1, n + 1):
            row.append(Form({(base(i),): c.gamma(a, i, b) for i in range(1, n + 1)}))
        rows.append(row)
    return FormMatrix(rows)


@lru_cache(maxsize=None)
def build_Theta(c: ConnChart) -> FormMatrix:
    """Curvature matrix d theta + theta ^ theta of the tautological connection."""
    th = build_theta(c)
    return mat_add(mat_d(th), mat_wedge(th, th))


def Theta_explicit(c: ConnChart) -> FormMatrix:
    """Index-sum expansion dGamma^a_ib ^ dx^i + Gamma^a_ik Gamma^k_jb dx^i ^ dx^j."""
    n = c.n
    rng = range(1, n + 1)
    rows = []
    for a in rng:
        row = []
        for b in rng:
            acc = Form()
            for i in rng:
                acc = acc + wedge(Form.gen(fiber(a, i, b)), Form.gen(base(i)))
                for j in rng:
                    coeff = expr_sum(c.gamma(a, i, k) * c.gamma(k, j, b) for k in rng)
                    acc = acc + wedge(Form.gen(base(i)), Form.gen(base(j))).scale(coeff)
            row.append(acc)
        rows.append(row)
    return FormMatrix(rows)


def zero_section_dTheta(c: ConnChart) -> FormMatrix:
    """d Theta with every fiber coordinate (not its differential) set to 0."""
    zero = {v: ZERO for v in c.fiber_vars}
    return mat_d(build_Theta(c)).map(lambda f: substitute_coefficients(f, zero))


# ---------------------------------------------------------------------------
# chart transitions


@dataclass(frozen=True, eq=False)
class ChartTransition:
    """Change of base coordinates x -> x'(x) with an explicit inverse.

    ``inverse`` is written in the same coordinate symbols x1..xn, read as the
    primed coordinates.  ``jacobian`` is dx'/dx as a function of x and
    ``jacobian_inverse`` its exact inverse (equal to dx/dx' at x'(x)).
    """

    n: int
    forward: Tuple[Expr, ...]
    inverse: Tuple[Expr, ...]
    jacobian: List[List[Expr]] = field(repr=False)
    jacobian_inverse: List[List[Expr]] = field(repr=False)

    @staticmethod
    def make(forward: Sequence[Expr], inverse: Sequence[Expr], check: bool = True) -> "ChartTransition":
        forward = tuple(forward)
        inverse = tuple(inverse)
        n = len(forward)
        if len(inverse) != n:
            raise ValueError("forward and inverse must have the same length")
        xs = [base(i) for i in range(1, n + 1)]
        for e in forward + inverse:
            extra = {v for v in e.free_vars() if v not in xs}
            if extra:
                raise ValueError(f"transition depends on non-base symbols {sorted(extra)}")
        jac = [[forward[i].partial(xs[j]) for j in range(n)] for i in range(n)]
        try:
            jinv = mat_inverse(jac)
        except ZeroDivisionError:
            raise ValueError("non-invertible Jacobian") from None
        t = ChartTransition(n, forward, inverse, jac, jinv)
        if check:
            t.check()
        return t

    @staticmethod
    def identity(n: int) -> "ChartTransition":
        xs = tuple(var(base(i)) for i in range(1, n + 1))
        return ChartTransition.make(xs, xs)

    def forward_map(self) -> Dict[VarId, Expr]:
        return {base(i + 1): self.forward[i] for i in range(self.n)}

    def inverse_map(self) -> Dict[VarId, Expr]:
        return {base(i + 1): self.inverse[i] for i in range(self.n)}

    def check(self):
        fw, inv = self.forward_map(), self.inverse_map()
        for i in range(self.n):
            xi = var(base(i + 1))
            if substitute(self.forward[i], inv) != xi or substitute(self.inverse[i], fw) != xi:
                raise ValueError("inverse does not invert forward")
        if mat_mul(self.jacobian, self.jacobian_inverse) != mat_identity(self.n):
            raise ValueError("Jacobian inverse check failed")

    def then(self, other: "ChartTransition") -> "ChartTransition":
        """Composite chart change: first ``self``, then ``other``."""
        fw = tuple(substitute(e, self.forward_map()) for e in other.forward)
        inv = tuple(substitute(e, other.inverse_map()) for e in self.inverse)
        return ChartTransition.make(fw, inv)


def transition_gamma(t: ChartTransition) -> Dict[VarId, Expr]:
    """Primed fiber coordinates as functions of (x, Gamma).

    Uses the coordinate law
        Gamma'^c_mn = J^c_a (P^i_m P^b_n Gamma^a_ib + d^2 x^a / dx'^m dx'^n)
    with J = dx'/dx and P = dx/dx', both evaluated at x.  Both lower-index
    orders are computed and compared, so a non-symmetric result raises.
    """
    n = t.n
    rng = range(n)
    J = t.jacobian
    P = t.jacobian_inverse
    xs = [base(i + 1) for i in rng]
    fw = t.forward_map()
    second = [[[substitute(t.inverse[a].partial(xs[m]).partial(xs[nn]), fw)
                for nn in rng] for m in rng] for a in rng]
    g = [[[var(fiber(a + 1, i + 1, b + 1)) for b in rng] for i in rng] for a in rng]

    def component(c, m, nn):
        inner = []
        for a in rng:
            if J[c][a].is_zero():
                continue
            terms = [P[i][m] * P[b][nn] * g[a][i][b]
                     for i in rng for b in rng
                     if not P[i][m].is_zero() and not P[b][nn].is_zero()]
            terms.append(second[a][m][nn])
            inner.append(J[c][a] * expr_sum(terms))
        return expr_sum(inner)

    out: Dict[VarId, Expr] = {}
    for c in rng:
        for m in rng:
            for nn in range(m, n):
                e = component(c, m, nn)
                if m != nn and e != component(c, nn, m):
                    raise ArithmeticError("transformed connection is not symmetric")
                out[fiber(c + 1, m + 1, nn + 1)] = e
    return out


def transition_substitution(t: ChartTransition) -> Dict[VarId, Expr]:
    """Full coordinate change on the connection chart: x' and Gamma'."""
    sigma = dict(t.forward_map())
    sigma.update(transition_gamma(t))
    return sigma


def _frame_matrices(t: ChartTransition):
    # frame change dx/dx' and its inverse dx'/dx, as matrices of 0-forms
    frame = FormMatrix.from_exprs(t.jacobian_inverse)
    frame_inv = FormMatrix.from_exprs(t.jacobian)
    return frame, frame_inv


def check_theta_transition(t: ChartTransition) -> FormMatrix:
    """Residual of theta' = F^-1 dF + F^-1 theta F with F = dx/dx'."""
    c = ConnChart(t.n)
    sigma = transition_substitution(t)
    pulled = mat_pullback(build_theta(c), sigma)
    frame, frame_inv = _frame_matrices(t)
    expected = mat_add(mat_wedge(frame_inv, mat_d(frame)),
                       mat_wedge(mat_wedge(frame_inv, build_theta(c)), frame))
    return pulled - expected


def check_Theta_transition(t: ChartTransition) -> FormMatrix:
    """Residual of Theta' = F^-1 Theta F with F = dx/dx'."""
    c = ConnChart(t.n)
    sigma = transition_substitution(t)
    pulled = mat_pullback(build_Theta(c), sigma)
    frame, frame_inv = _frame_matrices(t)
    expected = mat_wedge(mat_wedge(frame_inv, build_Theta(c)), frame)
    return pulled - expected

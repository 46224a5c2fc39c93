"""Hypothesis strategies for expressions, forms and substitutions."""
from fractions import Fraction
from itertools import combinations

from hypothesis import strategies as st

from thetahat.forms import Form, FormMatrix
from thetahat.symkernel import GQ, ONE, PI, base, const, expr_sum, fiber, var

small_int = st.integers(-4, 4)
small_frac = st.builds(Fraction, st.integers(-6, 6), st.integers(1, 4))


@st.composite
def coefficient(draw, complex_ok=True, pi_ok=True):
    re = draw(small_frac)
    im = draw(small_frac) if complex_ok and draw(st.booleans()) else 0
    c = const(GQ(re, im))
    if pi_ok and draw(st.integers(0, 4)) == 0:
        c = c * PI ** draw(st.integers(-2, 2))
    return c


def variables(n, fibers=False):
    vs = [base(i) for i in range(1, n + 1)]
    if fibers:
        vs += [fiber(a, i, b) for a in range(1, n + 1) for i in range(1, n + 1)
               for b in range(i, n + 1)]
    return vs


@st.composite
def poly_expr(draw, n=3, fibers=False, max_terms=4, max_deg=3, complex_ok=True, pi_ok=True):
    vs = variables(n, fibers)
    terms = []
    for _ in range(draw(st.integers(0, max_terms))):
        c = draw(coefficient(complex_ok, pi_ok))
        m = ONE
        for _ in range(draw(st.integers(0, max_deg))):
            m = m * var(draw(st.sampled_from(vs)))
        terms.append(c * m)
    return expr_sum(terms)


@st.composite
def rational_expr(draw, n=3, fibers=False):
    num = draw(poly_expr(n, fibers))
    den = draw(poly_expr(n, fibers, max_terms=3, max_deg=2).filter(lambda e: not e.is_zero()))
    return num / den


@st.composite
def form(draw, n=3, degree=None, fibers=False, max_terms=3, rational=False):
    vs = variables(n, fibers)
    coef = rational_expr(n, fibers) if rational else poly_expr(n, fibers, max_terms=3, max_deg=2)
    p = draw(st.integers(0, min(3, len(vs)))) if degree is None else degree
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        gens = tuple(sorted(draw(st.sampled_from(list(combinations(vs, p)))))) if p else ()
        terms[gens] = draw(coef)
    f = Form()
    for g, c in terms.items():
        f = f + Form({g: c})
    return f


@st.composite
def base_substitution(draw, n=3, max_deg=2):
    """Polynomial map x_i -> p_i(x) on an n-chart."""
    return {base(i): draw(poly_expr(n, max_terms=3, max_deg=max_deg, complex_ok=False,
                                    pi_ok=False))
            for i in range(1, n + 1)}


@st.composite
def polynomial_section(draw, n, max_terms=3, max_deg=2):
    """Entries (k, i, j) with i <= j for a random polynomial torsion-free connection."""
    out = {}
    for k in range(1, n + 1):
        for i in range(1, n + 1):
            for j in range(i, n + 1):
                e = draw(poly_expr(n, max_terms=max_terms, max_deg=max_deg, complex_ok=False,
                                   pi_ok=False))
                if not e.is_zero():
                    out[(k, i, j)] = e
    return out


@st.composite
def even_form_matrix(draw, size, n=4, fibers=False):
    """Square matrix of 2-forms on an n-chart (entries commute under wedge)."""
    return FormMatrix([[draw(form(n, degree=2, fibers=fibers, max_terms=2)) for _ in range(size)]
                       for _ in range(size)])

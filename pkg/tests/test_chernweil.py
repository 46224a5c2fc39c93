import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strategies import form, polynomial_section
from thetahat.chernweil import (
    ConnectionSection,
    MetricSpec,
    chern_weil_form,
    classical_curvature,
    connection_form,
    first_form_exact,
    levi_civita,
    pullback_section,
    pullback_section_matrix,
    section,
    symmetrize,
)
from thetahat.connspace import ConnChart, build_Theta, build_theta
from thetahat.forms import Form, d, wedge
from thetahat.numeric import round_s2_metric
from thetahat.symkernel import ONE, ZERO, base, const, eval_numeric, fiber, func, var, x

x1, x2 = x(1), x(2)


def test_symmetrize_examples():
    s = symmetrize({(1, 1, 2): x1, (1, 2, 1): -x1}, 2)
    assert s(1, 1, 2).is_zero()
    s = symmetrize({(1, 1, 2): x1, (1, 2, 1): 3 * x1}, 2)
    assert s(1, 1, 2) == 2 * x1
    t = section(2, {(1, 1, 2): x1, (2, 2, 2): x2})
    assert symmetrize(t.raw(), 2) == t


@given(polynomial_section(2))
@settings(max_examples=30)
def test_symmetrize_idempotent(ent):
    s = section(2, ent)
    once = symmetrize(s.raw(), 2)
    assert once == s
    assert symmetrize(once.raw(), 2) == once


def test_section_validation():
    with pytest.raises(ValueError, match="duplicate"):
        section(2, {(1, 1, 2): x1, (1, 2, 1): x2})
    with pytest.raises(ValueError, match="base coordinates"):
        ConnectionSection(2, {(1, 1, 1): var(fiber(1, 1, 1))})
    with pytest.raises(ValueError, match="out of range"):
        ConnectionSection(2, {(3, 1, 1): x1})


def test_flat_section():
    s = ConnectionSection(3, {})
    assert pullback_section_matrix(build_Theta(ConnChart(3)), s).is_zero()
    assert classical_curvature(s).is_zero()
    for k in (1, 2, 3):
        assert chern_weil_form(s, k).is_zero()


def test_pullback_of_theta_is_connection_form():
    s = section(2, {(1, 1, 2): x1 * x2, (2, 2, 2): x1})
    assert pullback_section_matrix(build_theta(ConnChart(2)), s) == connection_form(s)


def test_degree_above_base_dimension_vanishes():
    s = section(2, {(1, 2, 2): x1})
    assert chern_weil_form(s, 2, method="direct").is_zero()


def test_curvature_index_sums():
    # R^a_b = sum_{i<j} (d_i G^a_jb - d_j G^a_ib + G^a_ik G^k_jb - G^a_jk G^k_ib) dx^i^dx^j
    s = section(2, {(1, 2, 2): x1})
    R = classical_curvature(s)
    n = 2
    for a in range(1, n + 1):
        for b in range(1, n + 1):
            c = (s(a, 2, b).partial(base(1)) - s(a, 1, b).partial(base(2))
                 + sum((s(a, 1, k) * s(k, 2, b) - s(a, 2, k) * s(k, 1, b)
                        for k in range(1, n + 1)), ZERO))
            assert R[a - 1, b - 1] == Form({(base(1), base(2)): c})
    # R^1_2 = dx1^dx2 plus quadratic terms (here none survive)
    assert R[0, 1] == wedge(Form.gen(base(1)), Form.gen(base(2)))


@given(st.integers(2, 3).flatmap(lambda n: polynomial_section(n).map(lambda e: (n, e))))
@settings(max_examples=10)
def test_classical_curvature_is_pullback(ne):
    n, ent = ne
    s = section(n, ent)
    assert pullback_section_matrix(build_Theta(ConnChart(n)), s) == classical_curvature(s)


@given(form(n=2, fibers=True), polynomial_section(2))
@settings(max_examples=40)
def test_pullback_commutes_with_d(f, ent):
    s = section(2, ent)
    assert pullback_section(d(f), s) == d(pullback_section(f, s))


@given(polynomial_section(3, max_terms=2))
@settings(max_examples=15)
def test_first_form_exact(ent):
    s = section(3, ent)
    assert chern_weil_form(s, 1) == first_form_exact(s)


@given(polynomial_section(4, max_terms=1))
@settings(max_examples=8)
def test_methods_agree_and_closed(ent):
    s = section(4, ent)
    for k in (1, 2):
        w = chern_weil_form(s, k)
        assert w == chern_weil_form(s, k, method="direct")
        assert d(w).is_zero()


def test_generic_section_n4_nonzero_closed():
    from thetahat.numeric import polynomial_section as poly_fixture

    w = chern_weil_form(poly_fixture(0), 1)
    assert not w.is_zero()
    assert d(w).is_zero()


def test_euclidean_metric_is_flat():
    m = MetricSpec.make([[ONE, ZERO], [ZERO, ONE]])
    assert levi_civita(m).gamma == {}


def test_metric_validation():
    with pytest.raises(ValueError, match="symmetric"):
        MetricSpec.make([[ONE, x1], [ZERO, ONE]])
    with pytest.raises(ValueError, match="non-invertible"):
        MetricSpec.make([[x1, x1], [x1, x1]])
    with pytest.raises(ValueError, match="inverse"):
        MetricSpec.make([[ONE, ZERO], [ZERO, ONE]], [[ONE, ZERO], [ZERO, 2 * ONE]])


@pytest.mark.parametrize("metric", [
    [[ONE + x1 ** 2, ZERO], [ZERO, ONE + x2 ** 2 + x1 ** 2]],
    [[const(4) / (1 + x1 ** 2 + x2 ** 2) ** 2, ZERO], [ZERO, const(4) / (1 + x1 ** 2 + x2 ** 2) ** 2]],
    [[ONE + x1 * x2, ZERO], [ZERO, 2 + x1 ** 2]],
])
def test_levi_civita_first_form_vanishes(metric):
    s = levi_civita(MetricSpec.make(metric))
    assert chern_weil_form(s, 1).is_zero()
    assert chern_weil_form(s, 1, method="direct").is_zero()


def test_levi_civita_opaque_diagonal():
    f = func("f", [base(1), base(2)])
    # diagonal metric with entries 1 + f^2 stays symbolic
    g = [[ONE + f * f, ZERO], [ZERO, ONE + f * f]]
    s = levi_civita(MetricSpec.make(g))
    assert s(1, 1, 2) == s(1, 2, 1)
    assert any(fs for e in s.gamma.values() for fs in e.atoms() if getattr(fs, "partials", ()))


def test_round_sphere_christoffel_against_differences():
    m = round_s2_metric()
    s = levi_civita(m)
    rng = np.random.default_rng(5)
    h = 1e-3

    def g_num(p):
        rho = 1 + p[0] ** 2 + p[1] ** 2
        return 4 / rho ** 2 * np.eye(2)

    def dg(p, c):
        # fourth-order central difference
        e = np.zeros(2)
        e[c] = h
        return (-g_num(p + 2 * e) + 8 * g_num(p + e) - 8 * g_num(p - e) + g_num(p - 2 * e)) / (12 * h)

    for _ in range(10):
        p = rng.uniform(-2, 2, size=2)
        gi = np.linalg.inv(g_num(p))
        D = [dg(p, c) for c in range(2)]
        for k in range(2):
            for i in range(2):
                for j in range(2):
                    ref = 0.5 * sum(gi[k, l] * (D[i][l, j] + D[j][l, i] - D[l][i, j])
                                    for l in range(2))
                    val = eval_numeric(s(k + 1, i + 1, j + 1), {base(1): p[0], base(2): p[1]})
                    assert abs(val - ref) < 1e-8

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thetahat.chernweil import chern_weil_form
from thetahat.forms import Form, wedge
from thetahat.numeric import (
    FIXTURES,
    DensityField,
    IntegrationDomain,
    characteristic_density,
    characteristic_number,
    fd_closedness_residual,
    fixture,
    flat_t4,
    fubini_study_density_oracle,
    fubini_study_metric_numeric,
    integrate_top,
    pairwise_sum,
    perturbed_t4,
    polynomial_section,
    thread_count,
)
from thetahat.symkernel import ONE, PI, base, const, func, x

TOP4 = (base(1), base(2), base(3), base(4))


def top(c, n=4):
    return Form({tuple(base(i) for i in range(1, n + 1)): c})


def test_integrate_simple_densities():
    box = IntegrationDomain.periodic_box(4, 1.0, 8)
    assert integrate_top(Form(), box) == 0
    assert integrate_top(top(const(3)), box) == pytest.approx(3, abs=1e-14)
    sine = top(func("s", [base(1)]))
    impl = {"s": lambda fs, c: np.sin(2 * np.pi * c[base(1)])}
    assert abs(integrate_top(sine, box, impl)) < 1e-12


def test_transformed_chart_normalization():
    # integral over R^2 of 1/(1+|x|^2)^2 is pi
    dom = IntegrationDomain.tan_chart(2, 1.0, 64)
    f = top(ONE / (1 + x(1) ** 2 + x(2) ** 2) ** 2, 2)
    assert integrate_top(f, dom).real == pytest.approx(math.pi, rel=1e-6)


def test_orientation_flip_negates():
    fx = perturbed_t4(1, resolution=16)
    dens = characteristic_density(fx, 2)
    a = dens.integral(fx.domain)
    b = dens.integral(fx.domain.flipped())
    assert a == -b
    f = top(ONE / (1 + x(1) ** 2 + x(2) ** 2) ** 2, 2)
    dom = IntegrationDomain.tan_chart(2, 1.0, 16)
    assert integrate_top(f, dom) == -integrate_top(f, dom.flipped())


def test_degree_mismatch():
    with pytest.raises(ValueError):
        DensityField(Form.gen(base(1)), 4)
    with pytest.raises(ValueError):
        IntegrationDomain.periodic_box(4, 1.0, 4)


def test_threads_do_not_change_result(monkeypatch):
    fx = perturbed_t4(2, resolution=16)
    vals = []
    for t in (1, 3):
        dens = characteristic_density(fx, 2)
        vals.append(dens.integral(fx.domain, threads=t))
    assert vals[0] == vals[1]
    monkeypatch.setenv("THETAHAT_THREADS", "5")
    assert thread_count() == 5
    monkeypatch.setenv("THETAHAT_THREADS", "junk")
    assert thread_count() == 1


def test_pairwise_sum_fixed_shape():
    assert pairwise_sum([]) == 0
    assert pairwise_sum([1, 2, 3, 4, 5]) == 15


def test_fixture_lookup():
    assert set(FIXTURES) == {"flat_t4", "perturbed_t4", "round_s2", "fubini_study_cp2"}
    with pytest.raises(KeyError):
        fixture("klein_bottle")
    assert flat_t4().section.gamma == {}
    assert perturbed_t4(0, eps=0).section.gamma == {}


def test_perturbed_entries_are_symmetrized():
    s = perturbed_t4(0).section
    assert all(i <= j for (_, i, j) in s.gamma)
    assert s(1, 2, 2) != 0 and s(2, 1, 1) != 0


def test_flat_characteristic_number():
    assert characteristic_number(flat_t4(16), 2) == 0


def test_quadrature_converged_beyond_32():
    fx = perturbed_t4(1, resolution=32)
    a = characteristic_number(fx, 2)
    b = characteristic_number(fx, 2, resolution=64)
    assert abs(a - b) < 1e-6


def test_round_sphere_first_form_integrates_to_zero():
    fx = fixture("round_s2", 32)
    assert chern_weil_form(fx.section, 1).is_zero()
    assert characteristic_number(fx, 1) == 0


def test_fubini_study_metric_positive_definite():
    rng = np.random.default_rng(11)
    for p in rng.normal(scale=2.0, size=(100, 4)):
        g = fubini_study_metric_numeric(p)
        assert np.allclose(g, g.T)
        assert np.linalg.eigvalsh(g).min() > 0


def test_fubini_study_symbolic_metric_matches_closed_form():
    from thetahat.numeric import fubini_study_metric
    from thetahat.symkernel import eval_numeric

    m = fubini_study_metric()
    rng = np.random.default_rng(2)
    for p in rng.normal(size=(5, 4)):
        pt = {base(i + 1): p[i] for i in range(4)}
        num = np.array([[eval_numeric(m.g[a][b], pt).real for b in range(4)] for a in range(4)])
        assert np.allclose(num, fubini_study_metric_numeric(p), atol=1e-13)


def test_fubini_study_density_closed_form():
    # the oracle agrees with -6/(pi^2 (1+|x|^2)^3)
    rng = np.random.default_rng(4)
    for p in rng.normal(size=(10, 4)):
        rho = 1 + p @ p
        assert fubini_study_density_oracle(p) == pytest.approx(-6 / (math.pi ** 2 * rho ** 3),
                                                               rel=1e-10)


def test_fd_flat_is_exactly_zero():
    w = chern_weil_form(flat_t4().section, 1)
    pts = np.random.default_rng(0).uniform(size=(5, 4))
    assert fd_closedness_residual(w, pts, 1e-3, 4) == 0.0


def test_fd_detects_non_closed_form():
    planted = wedge(Form.gen(base(1)), Form.gen(base(3))).scale(x(2))
    pts = np.random.default_rng(0).uniform(-1, 1, size=(10, 4))
    r1 = fd_closedness_residual(planted, pts, 1e-3, 4)
    r2 = fd_closedness_residual(planted, pts, 5e-4, 4)
    assert r1 == pytest.approx(1.0) and r2 == pytest.approx(1.0)


@given(st.integers(0, 50))
@settings(max_examples=5)
def test_fd_second_order(seed):
    w = chern_weil_form(polynomial_section(seed), 1)
    pts = np.random.default_rng(seed).uniform(-1, 1, size=(30, 4))
    r1 = fd_closedness_residual(w, pts, 1e-3, 4)
    r2 = fd_closedness_residual(w, pts, 5e-4, 4)
    assert r1 < 1e-6
    assert 3.5 < r1 / r2 < 4.5


def test_pi_factor_numeric():
    f = top(ONE / PI, 2)
    dom = IntegrationDomain.periodic_box(2, 1.0, 8)
    assert integrate_top(f, dom).real == pytest.approx(1 / math.pi)

"""The characteristic forms omega_k on the connection space.

omega_k is the degree-2k part of det(E + (I/2pi) Theta).  Since Theta has
2-form entries, which commute, the degree-2k part is (I/2pi)^k times the sum
of the k x k principal minors of Theta.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

from .connspace import ConnChart, build_Theta, build_theta
from .forms import Form, d, mat_trace, mat_wedge, principal_minor_sum, wedge
from .symkernel import I_OVER_2PI


@dataclass(frozen=True)
class OmegaResult:
    n: int
    k: int
    omega: Form
    term_count: int
    closed_residual: Form

    @property
    def closed(self) -> bool:
        return self.closed_residual.is_zero()


@lru_cache(maxsize=None)
def sigma(n: int, k: int) -> Form:
    """Sum of the k x k principal minors of Theta (omega_k without its prefactor)."""
    if k == 0:
        return Form.scalar(1)
    return principal_minor_sum(build_Theta(ConnChart(n)), k)


def _check_order(n: int, k: int):
    if k < 1 or k > n:
        raise ValueError(f"order k must satisfy 1 <= k <= n, got k={k}, n={n}")
    if 2 * k > n:
        warnings.warn(f"k={k} exceeds floor(n/2)={n // 2}; computed anyway", stacklevel=3)


@lru_cache(maxsize=None)
def omega_form(n: int, k: int) -> Form:
    _check_order(n, k)
    return sigma(n, k).scale(I_OVER_2PI ** k)


def omega(n: int, k: int) -> OmegaResult:
    w = omega_form(n, k)
    return OmegaResult(n, k, w, len(w), d(w))


def verify_closed(n: int, k: int) -> Form:
    """d(omega_k), expanded with every Gamma left free."""
    return d(omega_form(n, k))


@lru_cache(maxsize=None)
def power_sum(n: int, j: int) -> Form:
    """tr(Theta^j) with the wedge as matrix product."""
    if j < 1:
        raise ValueError("power index must be >= 1")
    T = build_Theta(ConnChart(n))
    P = T
    for _ in range(j - 1):
        P = mat_wedge(P, T)
    return mat_trace(P)


def newton_check(n: int, k: int) -> Form:
    """Residual of k*sigma_k - sum_{j=1..k} (-1)^(j-1) sigma_{k-j} p_j."""
    if k < 1 or k > n:
        raise ValueError(f"order k must satisfy 1 <= k <= n, got k={k}, n={n}")
    acc = sigma(n, k).scale(k)
    for j in range(1, k + 1):
        t = wedge(sigma(n, k - j), power_sum(n, j))
        acc = acc - t if j % 2 == 1 else acc + t
    return acc


def exact_first_form(n: int) -> Form:
    """(I/2pi) d tr(theta), which equals omega_1."""
    return d(mat_trace(build_theta(ConnChart(n)))).scale(I_OVER_2PI)

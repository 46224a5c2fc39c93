"""Graded exterior algebra on a chart of the connection space.

A ``Form`` is a map from strictly increasing generator tuples to ``Expr``
coefficients.  A generator is the differential ``dv`` of a coordinate
``v``; it is represented by the ``VarId`` itself, so the generator order is
the coordinate order (every dx before every dGamma).
"""
from __future__ import annotations

from itertools import combinations, permutations
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

from .symkernel import (
    ONE,
    ZERO,
    Expr,
    Scalar,
    VarId,
    const,
    expr_sum,
    substitute,
)

Gens = Tuple[VarId, ...]


def _merge_sign(a: Gens, b: Gens):
    """Sign of sorting ``a + b`` (both sorted), or 0 on a repeated generator."""
    if not a:
        return 1, b
    if not b:
        return 1, a
    inversions = 0
    for g in b:
        for h in a:
            if h > g:
                inversions += 1
            elif h == g:
                return 0, ()
    return (-1 if inversions & 1 else 1), tuple(sorted(a + b))


class Form:
    """Possibly inhomogeneous differential form with exact coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Gens, Expr] | None = None):
        self.terms: Dict[Gens, Expr] = {}
        if terms:
            for k, v in terms.items():
                if not v.is_zero():
                    self.terms[k] = v

    @staticmethod
    def scalar(e) -> "Form":
        e = e if isinstance(e, Expr) else const(e)
        return Form({(): e})

    @staticmethod
    def gen(v: VarId) -> "Form":
        return Form({(v,): ONE})

    @staticmethod
    def _from_lists(acc: Dict[Gens, list]) -> "Form":
        out = Form()
        for k, parts in acc.items():
            c = parts[0] if len(parts) == 1 else expr_sum(parts)
            if not c.is_zero():
                out.terms[k] = c
        return out

    def __eq__(self, other):
        if isinstance(other, Form):
            return self.terms == other.terms
        if isinstance(other, (int, Expr)) and not isinstance(other, bool):
            return self == Form.scalar(other)
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        from .dsl import render_form

        return f"Form({render_form(self)!r})"

    def __str__(self):
        from .dsl import render_form

        return render_form(self)

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def degrees(self) -> set:
        return {len(k) for k in self.terms}

    def degree(self) -> int:
        """Degree of a homogeneous form (0 for the zero form)."""
        ds = self.degrees()
        if len(ds) > 1:
            raise ValueError(f"form is not homogeneous (degrees {sorted(ds)})")
        return ds.pop() if ds else 0

    def degree_part(self, k: int) -> "Form":
        return Form({g: c for g, c in self.terms.items() if len(g) == k})

    def coefficient(self, gens: Iterable[VarId]) -> Expr:
        gens = tuple(gens)
        key = tuple(sorted(gens))
        if len(set(key)) != len(key):
            return ZERO
        # sign of the permutation sorting ``gens``
        sign = 1
        g = list(gens)
        for i in range(len(g)):
            for j in range(i + 1, len(g)):
                if g[i] > g[j]:
                    sign = -sign
        c = self.terms.get(key, ZERO)
        return c if sign > 0 else -c

    def free_vars(self) -> set:
        out = set()
        for g, c in self.terms.items():
            out.update(g)
            out |= c.free_vars()
        return out

    def __add__(self, other) -> "Form":
        other = _as_form(other)
        t = dict(self.terms)
        for g, c in other.terms.items():
            old = t.get(g)
            s = c if old is None else old + c
            if s.is_zero():
                t.pop(g, None)
            else:
                t[g] = s
        out = Form()
        out.terms = t
        return out

    __radd__ = __add__

    def __neg__(self) -> "Form":
        out = Form()
        out.terms = {g: -c for g, c in self.terms.items()}
        return out

    def __sub__(self, other) -> "Form":
        return self + (-_as_form(other))

    def __rsub__(self, other) -> "Form":
        return _as_form(other) - self

    def scale(self, e) -> "Form":
        if isinstance(e, Scalar):
            e = e.to_expr()
        elif not isinstance(e, Expr):
            e = const(e)
        if e.is_zero():
            return Form()
        out = Form()
        out.terms = {g: c * e for g, c in self.terms.items()}
        return out

    def __mul__(self, other) -> "Form":
        if isinstance(other, Form):
            return wedge(self, other)
        return self.scale(other)

    def __rmul__(self, other) -> "Form":
        return self.scale(other)

    def __and__(self, other) -> "Form":
        return wedge(self, _as_form(other))

    def map_coefficients(self, fn) -> "Form":
        return Form({g: fn(c) for g, c in self.terms.items()})


def _as_form(x) -> Form:
    if isinstance(x, Form):
        return x
    return Form.scalar(x)


def wedge(a: Form, b: Form) -> Form:
    """Exterior product; bilinear with the merge-permutation sign."""
    if not a.terms or not b.terms:
        return Form()
    acc: Dict[Gens, list] = {}
    sign_cache: Dict[tuple, tuple] = {}
    for ga, ca in a.terms.items():
        for gb, cb in b.terms.items():
            key = (ga, gb)
            hit = sign_cache.get(key)
            if hit is None:
                hit = sign_cache[key] = _merge_sign(ga, gb)
            sign, g = hit
            if not sign:
                continue
            c = ca * cb
            if sign < 0:
                c = -c
            acc.setdefault(g, []).append(c)
    return Form._from_lists(acc)


def d(a: Form) -> Form:
    """Exterior derivative: d(f dG_I) = sum_v (df/dv) dv ^ dG_I."""
    acc: Dict[Gens, list] = {}
    for g, c in a.terms.items():
        for v in sorted(c.free_vars()):
            if v in g:
                continue
            dc = c.partial(v)
            if dc.is_zero():
                continue
            sign, ng = _merge_sign((v,), g)
            acc.setdefault(ng, []).append(dc if sign > 0 else -dc)
    return Form._from_lists(acc)


def pullback(a: Form, sigma: Mapping[VarId, Expr]) -> Form:
    """Substitute coordinates and their differentials.

    Coordinates missing from ``sigma`` map to themselves.
    """
    if not sigma:
        return a
    dcache: Dict[VarId, Form] = {}

    def dgen(v: VarId) -> Form:
        hit = dcache.get(v)
        if hit is None:
            if v in sigma:
                hit = d(Form.scalar(sigma[v]))
            else:
                hit = Form.gen(v)
            dcache[v] = hit
        return hit

    acc: Dict[Gens, list] = {}
    for g, c in a.terms.items():
        cs = substitute(c, sigma)
        if cs.is_zero():
            continue
        piece = Form({(): cs})
        for v in g:
            piece = wedge(piece, dgen(v))
            if not piece.terms:
                break
        for k, v in piece.terms.items():
            acc.setdefault(k, []).append(v)
    return Form._from_lists(acc)


def substitute_coefficients(a: Form, sigma: Mapping[VarId, Expr]) -> Form:
    """Substitute in coefficients only, leaving the generators alone."""
    return Form({g: substitute(c, sigma) for g, c in a.terms.items()})


# ---------------------------------------------------------------------------
# Matrices of forms


class FormMatrix:
    """Square matrix of forms; entries share one degree unless all zero."""

    __slots__ = ("n", "entries")

    def __init__(self, entries: Sequence[Sequence[Form]]):
        n = len(entries)
        if any(len(row) != n for row in entries):
            raise ValueError("form matrix must be square")
        self.n = n
        self.entries: List[List[Form]] = [list(row) for row in entries]
        degs = set()
        for row in self.entries:
            for e in row:
                degs |= e.degrees()
        if len(degs) > 1:
            raise ValueError(f"form matrix entries have mixed degrees {sorted(degs)}")

    @staticmethod
    def zeros(n: int) -> "FormMatrix":
        return FormMatrix([[Form() for _ in range(n)] for _ in range(n)])

    @staticmethod
    def identity(n: int) -> "FormMatrix":
        return FormMatrix([[Form.scalar(1) if i == j else Form() for j in range(n)]
                           for i in range(n)])

    @staticmethod
    def from_exprs(rows: Sequence[Sequence[Expr]]) -> "FormMatrix":
        return FormMatrix([[Form.scalar(e) for e in row] for row in rows])

    def __getitem__(self, ij) -> Form:
        i, j = ij
        return self.entries[i][j]

    def __eq__(self, other):
        return isinstance(other, FormMatrix) and self.entries == other.entries

    def __repr__(self):
        return f"FormMatrix(n={self.n}, degree={self.degree()})"

    def degree(self) -> int:
        for row in self.entries:
            for e in row:
                if e.terms:
                    return e.degree()
        return 0

    def is_zero(self) -> bool:
        return all(e.is_zero() for row in self.entries for e in row)

    def map(self, fn) -> "FormMatrix":
        return FormMatrix([[fn(e) for e in row] for row in self.entries])

    def __add__(self, other: "FormMatrix") -> "FormMatrix":
        return mat_add(self, other)

    def __sub__(self, other: "FormMatrix") -> "FormMatrix":
        return mat_add(self, other.map(lambda e: -e))

    def __mul__(self, other: "FormMatrix") -> "FormMatrix":
        return mat_wedge(self, other)


def _check_sizes(a: FormMatrix, b: FormMatrix):
    if a.n != b.n:
        raise ValueError(f"size mismatch: {a.n} vs {b.n}")


def mat_add(a: FormMatrix, b: FormMatrix) -> FormMatrix:
    _check_sizes(a, b)
    return FormMatrix([[a.entries[i][j] + b.entries[i][j] for j in range(a.n)]
                       for i in range(a.n)])


def mat_wedge(a: FormMatrix, b: FormMatrix) -> FormMatrix:
    """Matrix product with wedge as the entry product (order matters)."""
    _check_sizes(a, b)
    n = a.n
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = Form()
            for k in range(n):
                acc = acc + wedge(a.entries[i][k], b.entries[k][j])
            row.append(acc)
        out.append(row)
    return FormMatrix(out)


def mat_trace(a: FormMatrix) -> Form:
    acc = Form()
    for i in range(a.n):
        acc = acc + a.entries[i][i]
    return acc


def mat_d(a: FormMatrix) -> FormMatrix:
    return a.map(d)


def mat_pullback(a: FormMatrix, sigma: Mapping[VarId, Expr]) -> FormMatrix:
    return a.map(lambda e: pullback(e, sigma))


def _perm_sign(p: Sequence[int]) -> int:
    sign = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def _require_even(a: FormMatrix):
    for row in a.entries:
        for e in row:
            for k in e.degrees():
                if k % 2:
                    raise ValueError("det_expand needs even-degree entries")


def principal_minor_sum(a: FormMatrix, k: int) -> Form:
    """Sum of all k x k principal minors (elementary symmetric function).

    Entries must be of even degree, so they commute and the Leibniz sum is
    unambiguous.
    """
    _require_even(a)
    if k == 0:
        return Form.scalar(1)
    memo: Dict[tuple, Form] = {}

    def minor(rows: tuple, cols: tuple) -> Form:
        # Laplace expansion along the first row, memoized on (rows, cols)
        if len(rows) == 1:
            return a.entries[rows[0]][cols[0]]
        key = (rows, cols)
        hit = memo.get(key)
        if hit is not None:
            return hit
        r0, rest = rows[0], rows[1:]
        acc = Form()
        for pos, c in enumerate(cols):
            entry = a.entries[r0][c]
            if not entry.terms:
                continue
            sub = minor(rest, cols[:pos] + cols[pos + 1:])
            if not sub.terms:
                continue
            t = wedge(entry, sub)
            acc = acc + (t if pos % 2 == 0 else -t)
        memo[key] = acc
        return acc

    total = Form()
    for s in combinations(range(a.n), k):
        total = total + minor(s, s)
    return total


def leibniz_det(a: FormMatrix) -> Form:
    """Full determinant by the permutation sum (reference implementation)."""
    _require_even(a)
    n = a.n
    acc = Form()
    for p in permutations(range(n)):
        t = Form.scalar(1)
        for i in range(n):
            t = wedge(t, a.entries[i][p[i]])
            if not t.terms:
                break
        if t.terms:
            acc = acc + (t if _perm_sign(p) > 0 else -t)
    return acc


def det_expand(a: FormMatrix, s) -> Form:
    """det(E + s*A) = sum_k s^k * (sum of k x k principal minors of A)."""
    _require_even(a)
    if not isinstance(s, Scalar):
        s_expr = s if isinstance(s, Expr) else const(s)
        powers = [s_expr ** k for k in range(a.n + 1)]
    else:
        powers = [(s ** k).to_expr() for k in range(a.n + 1)]
    out = Form.scalar(1)
    for k in range(1, a.n + 1):
        out = out + principal_minor_sum(a, k).scale(powers[k])
    return out

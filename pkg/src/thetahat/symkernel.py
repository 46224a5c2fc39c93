"""Exact scalar arithmetic for the connection-space engine.

Scalars are rational functions whose coefficients are Gaussian rationals.
The constant pi is carried as an atom that may appear with negative
exponent, so ``I/(2*pi)`` and its powers stay exact.  Every ``Expr`` is kept
in a canonical form: sparse numerator and denominator with no common factor
and a denominator whose leading coefficient is 1.  Two expressions are equal
iff their canonical forms are equal, which is what all the "structural zero"
checks downstream rely on.

Atoms (the things monomials are made of) are small named tuples whose first
field is a rank, so atoms of different kinds compare without ever reaching
their payloads:

    rank 0  base coordinate x^i
    rank 1  fiber coordinate Gamma^a_ib  (stored with i <= b)
    rank 2  opaque smooth function symbol with formal partials
    rank 3  pi
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Dict, Iterable, Mapping, NamedTuple, Tuple


class VarId(NamedTuple):
    rank: int
    a: int
    b: int = 0
    c: int = 0

    @property
    def is_base(self) -> bool:
        return self.rank == 0

    @property
    def is_fiber(self) -> bool:
        return self.rank == 1

    def __repr__(self):
        if self.rank == 0:
            return f"x{self.a}"
        return f"G[{self.a}][{self.b}][{self.c}]"


def base(i: int) -> VarId:
    if i < 1:
        raise ValueError(f"coordinate index must be >= 1, got {i}")
    return VarId(0, i)


def fiber(alpha: int, i: int, beta: int) -> VarId:
    """Fiber coordinate Gamma^alpha_{i beta}; lower indices are symmetric."""
    if min(alpha, i, beta) < 1:
        raise ValueError("fiber indices must be >= 1")
    if i > beta:
        i, beta = beta, i
    return VarId(1, alpha, i, beta)


class FuncSym(NamedTuple):
    """Opaque smooth function of some base coordinates.

    ``partials`` is the sorted multiset of coordinates it has been formally
    differentiated by, so mixed partials commute by construction.
    """

    rank: int
    name: str
    args: Tuple[VarId, ...]
    partials: Tuple[VarId, ...] = ()

    def diff(self, v: VarId) -> "FuncSym":
        return self._replace(partials=tuple(sorted(self.partials + (v,))))

    def __repr__(self):
        return _render_funcsym(self)


def funcsym(name: str, args: Iterable[VarId], partials: Iterable[VarId] = ()) -> FuncSym:
    args = tuple(args)
    partials = tuple(sorted(partials))
    for v in partials:
        if v not in args:
            raise ValueError(f"partial {v!r} is not an argument of {name}")
    return FuncSym(2, name, args, partials)


class _PiAtom(NamedTuple):
    rank: int = 3

    def __repr__(self):
        return "pi"


PI_ATOM = _PiAtom()


def _render_funcsym(f: FuncSym) -> str:
    args = ",".join(repr(v) for v in f.args)
    if f.partials:
        ps = ",".join(repr(v) for v in f.partials)
        return f"D[{ps}]{f.name}({args})"
    return f"{f.name}({args})"


# ---------------------------------------------------------------------------
# Gaussian rationals


def _q(x):
    if type(x) is Fraction and x.denominator == 1:
        return x.numerator
    return x


class GQ:
    """Gaussian rational ``re + im*I``; components are ints or Fractions."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re
        self.im = im

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        if isinstance(other, GQ):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return self.im == 0 and self.re == other
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im))

    def __repr__(self):
        return f"GQ({self.re}, {self.im})"

    def __add__(self, o):
        return GQ(self.re + o.re, self.im + o.im)

    def __sub__(self, o):
        return GQ(self.re - o.re, self.im - o.im)

    def __neg__(self):
        return GQ(-self.re, -self.im)

    def __mul__(self, o):
        if not self.im and not o.im:
            return GQ(self.re * o.re, 0)
        return GQ(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    def conjugate(self):
        return GQ(self.re, -self.im)

    def inverse(self):
        if not self:
            raise ZeroDivisionError("zero denominator")
        if not self.im:
            return GQ(_q(Fraction(1) / self.re), 0)
        n = self.re * self.re + self.im * self.im
        return GQ(_q(Fraction(self.re) / n), _q(Fraction(-self.im) / n))

    def __truediv__(self, o):
        return self * o.inverse()

    def is_one(self):
        return self.re == 1 and not self.im

    def to_complex(self) -> complex:
        return complex(float(self.re), float(self.im))


GQ_ZERO = GQ(0, 0)
GQ_ONE = GQ(1, 0)


def as_gq(c) -> GQ:
    if isinstance(c, GQ):
        return c
    if isinstance(c, bool):
        c = int(c)
    if isinstance(c, int):
        return GQ(c, 0)
    if isinstance(c, Fraction):
        return GQ(_q(c), 0)
    if isinstance(c, complex):
        return GQ(_q(Fraction(c.real)), _q(Fraction(c.imag)))
    if isinstance(c, float):
        return GQ(_q(Fraction(c)), 0)
    raise TypeError(f"cannot coerce {type(c).__name__} to a Gaussian rational")


# ---------------------------------------------------------------------------
# Sparse polynomials (Laurent in pi only)

Monomial = Tuple[tuple, ...]  # sorted ((atom, exponent), ...)


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for atom, e in b:
        e2 = d.get(atom, 0) + e
        if e2:
            d[atom] = e2
        else:
            del d[atom]
    return tuple(sorted(d.items()))


def _mono_degree(m: Monomial) -> int:
    return sum(e for atom, e in m if atom.rank != 3)


class Poly:
    """Sparse polynomial ``{monomial: GQ}``; treated as immutable."""

    __slots__ = ("terms",)

    def __init__(self, terms: Dict[Monomial, GQ] | None = None):
        self.terms = terms if terms is not None else {}

    @staticmethod
    def const(c) -> "Poly":
        c = as_gq(c)
        return Poly({(): c}) if c else Poly()

    @staticmethod
    def atom(a, exp: int = 1) -> "Poly":
        return Poly({((a, exp),): GQ_ONE})

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        return f"Poly({self.terms!r})"

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and () in self.terms)

    def is_one(self) -> bool:
        if len(self.terms) != 1:
            return False
        c = self.terms.get(())
        return c is not None and c.is_one()

    def const_value(self) -> GQ:
        return self.terms.get((), GQ_ZERO)

    def atoms(self) -> set:
        out = set()
        for m in self.terms:
            for atom, _ in m:
                out.add(atom)
        return out

    def __add__(self, other: "Poly") -> "Poly":
        if not other.terms:
            return self
        if not self.terms:
            return other
        if len(other.terms) > len(self.terms):
            self, other = other, self
        t = dict(self.terms)
        for m, c in other.terms.items():
            old = t.get(m)
            if old is None:
                t[m] = c
            else:
                s = old + c
                if s:
                    t[m] = s
                else:
                    del t[m]
        return Poly(t)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        if not self.terms or not other.terms:
            return Poly()
        if len(other.terms) == 1 and () in other.terms:
            return self.scale(other.terms[()])
        if len(self.terms) == 1 and () in self.terms:
            return other.scale(self.terms[()])
        t: Dict[Monomial, GQ] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                c = c1 * c2
                old = t.get(m)
                if old is None:
                    t[m] = c
                else:
                    s = old + c
                    if s:
                        t[m] = s
                    else:
                        del t[m]
        return Poly(t)

    def scale(self, c: GQ) -> "Poly":
        if not c:
            return Poly()
        if c.is_one():
            return self
        return Poly({m: v * c for m, v in self.terms.items()})

    def mul_mono(self, mono: Monomial, c: GQ = GQ_ONE) -> "Poly":
        return Poly({_mono_mul(m, mono): v * c for m, v in self.terms.items()})

    def __pow__(self, k: int) -> "Poly":
        if k < 0:
            raise ValueError("negative power of a polynomial")
        result = Poly.const(1)
        b = self
        while k:
            if k & 1:
                result = result * b
            k >>= 1
            if k:
                b = b * b
        return result

    def conjugate(self) -> "Poly":
        return Poly({m: c.conjugate() for m, c in self.terms.items()})

    # -- degree bookkeeping in one atom ------------------------------------

    def degree_in(self, v) -> int:
        d = 0
        for m in self.terms:
            for atom, e in m:
                if atom == v and e > d:
                    d = e
        return d

    def coeffs_in(self, v) -> Dict[int, "Poly"]:
        """Split into ``{exponent of v: coefficient poly free of v}``."""
        out: Dict[int, Dict[Monomial, GQ]] = {}
        for m, c in self.terms.items():
            e = 0
            rest = m
            for j, (atom, ee) in enumerate(m):
                if atom == v:
                    e = ee
                    rest = m[:j] + m[j + 1:]
                    break
            out.setdefault(e, {})[rest] = c
        return {e: Poly(t) for e, t in out.items()}

    @staticmethod
    def from_coeffs(v, coeffs: Mapping[int, "Poly"]) -> "Poly":
        acc = Poly()
        for e, p in coeffs.items():
            acc = acc + (p.mul_mono(((v, e),)) if e else p)
        return acc

    def leading(self) -> Tuple[Monomial, GQ]:
        """Leading term under graded order on (degree, monomial)."""
        m = max(self.terms, key=lambda mm: (_mono_degree(mm), mm))
        return m, self.terms[m]

    # -- calculus / substitution --------------------------------------------

    def partial(self, v: VarId) -> "Poly":
        t: Dict[Monomial, GQ] = {}

        def put(m, c):
            old = t.get(m)
            if old is None:
                t[m] = c
            else:
                s = old + c
                if s:
                    t[m] = s
                else:
                    del t[m]

        for m, c in self.terms.items():
            for j, (atom, e) in enumerate(m):
                if atom == v:
                    if e == 1:
                        nm = m[:j] + m[j + 1:]
                    else:
                        nm = m[:j] + ((atom, e - 1),) + m[j + 1:]
                    put(nm, c * GQ(e, 0))
                elif atom.rank == 2 and v in atom.args:
                    rest = m[:j] + m[j + 1:]
                    if e != 1:
                        rest = _mono_mul(rest, ((atom, e - 1),))
                    nm = _mono_mul(rest, ((atom.diff(v), 1),))
                    put(nm, c * GQ(e, 0))
        return Poly(t)

    def free_vars(self) -> set:
        """Coordinates this polynomial depends on (including through FuncSyms)."""
        out = set()
        for m in self.terms:
            for atom, _ in m:
                if atom.rank < 2:
                    out.add(atom)
                elif atom.rank == 2:
                    out.update(atom.args)
        return out


# ---------------------------------------------------------------------------
# Exact division and gcd


def divexact(a: Poly, b: Poly) -> Poly | None:
    """Return ``a / b`` if ``b`` divides ``a`` exactly, else ``None``."""
    if b.is_zero():
        raise ZeroDivisionError("zero denominator")
    if a.is_zero():
        return Poly()
    if b.is_const():
        return a.scale(b.const_value().inverse())
    if len(b.terms) == 1:
        (mb, cb), = b.terms.items()
        inv = cb.inverse()
        out = {}
        db = dict(mb)
        for m, c in a.terms.items():
            dm = dict(m)
            for atom, e in db.items():
                if dm.get(atom, 0) < e:
                    return None
            out[_mono_mul(m, tuple((at, -e) for at, e in mb))] = c * inv
        return Poly(out)
    v = min(b.atoms())
    bc = b.coeffs_in(v)
    m = max(bc)
    lcb = bc[m]
    q = Poly()
    r = a
    guard = 0
    while not r.is_zero():
        guard += 1
        rc = r.coeffs_in(v)
        dr = max(rc)
        if dr < m:
            return None
        t = divexact(rc[dr], lcb)
        if t is None:
            return None
        shift = dr - m
        tm = t.mul_mono(((v, shift),)) if shift else t
        q = q + tm
        r = r - tm * b
        if guard > 10000:
            raise RuntimeError("divexact did not terminate")
    return q


def _monic(p: Poly) -> Poly:
    if p.is_zero():
        return p
    _, c = p.leading()
    return p.scale(c.inverse())


def _num_primitive(p: Poly) -> Poly:
    """Scale to coprime integer real/imaginary parts (rational content removed)."""
    if p.is_zero():
        return p
    den = 1
    for c in p.terms.values():
        for q in (c.re, c.im):
            if type(q) is Fraction:
                den = den * q.denominator // math.gcd(den, q.denominator)
    g = (0, 0)
    for c in p.terms.values():
        g = _gauss_gcd(g, (int(c.re * den), int(c.im * den)))
        if g[0] * g[0] + g[1] * g[1] == 1 and den == 1:
            return p
    # multiply by den / g = den * conj(g) / |g|^2
    nrm = g[0] * g[0] + g[1] * g[1]
    if nrm == 1 and den == 1:
        return p
    f = GQ(_q(Fraction(den * g[0], nrm)), _q(Fraction(-den * g[1], nrm)))
    return p.scale(f)


def _gauss_gcd(a: Tuple[int, int], b: Tuple[int, int]) -> Tuple[int, int]:
    """Euclid over the Gaussian integers; the result is defined up to a unit."""
    while b != (0, 0):
        nb = b[0] * b[0] + b[1] * b[1]
        # a * conj(b), then divide by |b|^2 rounding to nearest
        xr = a[0] * b[0] + a[1] * b[1]
        xi = a[1] * b[0] - a[0] * b[1]
        qr = (2 * xr + nb) // (2 * nb)
        qi = (2 * xi + nb) // (2 * nb)
        r = (a[0] - (qr * b[0] - qi * b[1]), a[1] - (qr * b[1] + qi * b[0]))
        a, b = b, r
    return a


def _content_in(p: Poly, v) -> Poly:
    g = Poly()
    for c in p.coeffs_in(v).values():
        g = poly_gcd(g, c)
        if g.is_const():
            return Poly.const(1)
    return g


def _prem(a: Poly, b: Poly, v) -> Poly:
    ac = a.coeffs_in(v)
    bc = b.coeffs_in(v)
    da, db = max(ac), max(bc)
    lcb = bc[db]
    r = a
    k = da - db + 1
    while not r.is_zero():
        rc = r.coeffs_in(v)
        dr = max(rc)
        if dr < db:
            break
        lcr = rc[dr]
        shift = dr - db
        r = r * lcb - (b * lcr).mul_mono(((v, shift),) if shift else ())
        k -= 1
    if k > 0:
        r = r * (lcb ** k)
    return r


def _mono_content(p: Poly) -> Monomial:
    """Largest monomial dividing every term."""
    it = iter(p.terms)
    common = dict(next(it))
    for m in it:
        if not common:
            break
        dm = dict(m)
        for atom in list(common):
            e = dm.get(atom, 0)
            if e < common[atom]:
                if e <= 0:
                    del common[atom]
                else:
                    common[atom] = e
    return tuple(sorted(common.items()))


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """Monic gcd of two polynomials over the Gaussian rationals.

    Recursive content / primitive-part Euclid (primitive PRS) on a main
    variable, with cheap exits for constants, monomials and exact divisors.
    pi is treated as an ordinary variable here; callers strip its Laurent
    part first.
    """
    if a.is_zero():
        return _monic(b)
    if b.is_zero():
        return _monic(a)
    if a.is_const() or b.is_const():
        return Poly.const(1)
    if a == b:
        return _monic(a)

    # monomial content
    ma, mb = _mono_content(a), _mono_content(b)
    mono_g = ()
    if ma or mb:
        da, db = dict(ma), dict(mb)
        mono_g = tuple(sorted((k, min(e, db[k])) for k, e in da.items() if k in db))
        if ma:
            a = a.mul_mono(tuple((k, -e) for k, e in ma))
        if mb:
            b = b.mul_mono(tuple((k, -e) for k, e in mb))
    g = _poly_gcd_nomono(a, b)
    if mono_g:
        g = g.mul_mono(mono_g)
    return _monic(g)


def _is_real(p: Poly) -> bool:
    return all(not c.im for c in p.terms.values())


def _to_intdict(p: Poly, atoms: list) -> Dict[tuple, int]:
    """Clear denominators; coefficients become ints, or GaussInts if any is complex."""
    den = 1
    for c in p.terms.values():
        for q in (c.re, c.im):
            if type(q) is Fraction:
                den = den * q.denominator // math.gcd(den, q.denominator)
    real = _is_real(p)
    idx = {a: i for i, a in enumerate(atoms)}
    k = len(atoms)
    out = {}
    for m, c in p.terms.items():
        e = [0] * k
        for atom, ee in m:
            e[idx[atom]] = ee
        re = int(c.re * den)
        out[tuple(e)] = re if real else GaussInt(re, int(c.im * den))
    return out


class GaussInt:
    """Gaussian integer, just enough arithmetic for the heuristic gcd."""

    __slots__ = ("re", "im")

    def __init__(self, re: int, im: int = 0):
        self.re = re
        self.im = im

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, o):
        o = _gi(o)
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __add__(self, o):
        o = _gi(o)
        return GaussInt(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        o = _gi(o)
        return GaussInt(self.re - o.re, self.im - o.im)

    def __rsub__(self, o):
        return _gi(o) - self

    def __neg__(self):
        return GaussInt(-self.re, -self.im)

    def __mul__(self, o):
        if type(o) is int:
            return GaussInt(self.re * o, self.im * o)
        return GaussInt(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__


def _gi(v) -> GaussInt:
    return v if type(v) is GaussInt else GaussInt(v, 0)


def _c_exact(a, b):
    """a / b if the division is exact in Z or Z[i], else None."""
    if type(a) is int and type(b) is int:
        q, r = divmod(a, b)
        return None if r else q
    a, b = _gi(a), _gi(b)
    nb = b.re * b.re + b.im * b.im
    xr = a.re * b.re + a.im * b.im
    xi = a.im * b.re - a.re * b.im
    if xr % nb or xi % nb:
        return None
    return GaussInt(xr // nb, xi // nb)


def _c_gcd(a, b):
    if type(a) is int and type(b) is int:
        return math.gcd(a, b)
    g = _gauss_gcd((_gi(a).re, _gi(a).im), (_gi(b).re, _gi(b).im))
    return GaussInt(*g)


def _c_mag(a) -> int:
    if type(a) is int:
        return abs(a)
    return max(abs(a.re), abs(a.im))


def _from_intdict(d: Dict[tuple, int], atoms: list) -> Poly:
    t = {}
    for e, c in d.items():
        t[tuple((atoms[i], ee) for i, ee in enumerate(e) if ee)] = (
            GQ(c, 0) if type(c) is int else GQ(c.re, c.im))
    return Poly(t)


def _int_divexact(a: Dict[tuple, int], b: Dict[tuple, int]):
    """Exact division of integer polynomials in lex order, or None."""
    if not a:
        return {}
    lm_b = max(b)
    lc_b = b[lm_b]
    r = dict(a)
    q = {}
    while r:
        lm = max(r)
        if any(x < y for x, y in zip(lm, lm_b)):
            return None
        c = _c_exact(r[lm], lc_b)
        if c is None:
            return None
        shift = tuple(x - y for x, y in zip(lm, lm_b))
        q[shift] = c
        for mb, cb in b.items():
            m = tuple(x + y for x, y in zip(mb, shift))
            v = r.get(m, 0) - c * cb
            if v:
                r[m] = v
            else:
                r.pop(m, None)
    return q


def _int_content(d: Dict[tuple, int]) -> int:
    g = 0
    for c in d.values():
        g = _c_gcd(g, c)
        if g == 1:
            break
    return g


def _heu_eval(d: Dict[tuple, int], x: int) -> Dict[tuple, int]:
    out: Dict[tuple, int] = {}
    for e, c in d.items():
        k = e[:-1]
        out[k] = out.get(k, 0) + c * x ** e[-1]
    return {k: v for k, v in out.items() if v}


def _heu_interp(h: Dict[tuple, int], x: int) -> Dict[tuple, int]:
    out = {}
    i = 0
    half = x // 2
    def digit(c):
        r = c % x
        return r - x if r > half else r

    while h:
        nxt = {}
        for m, c in h.items():
            if type(c) is int:
                r = digit(c)
                q = (c - r) // x
            else:
                r = GaussInt(digit(c.re), digit(c.im))
                q = GaussInt((c.re - r.re) // x, (c.im - r.im) // x)
            if r:
                out[m + (i,)] = r
            if q:
                nxt[m] = q
        h = nxt
        i += 1
    if out and type(out[max(out)]) is int and out[max(out)] < 0:
        out = {m: -c for m, c in out.items()}
    return out


_HEU_MAX_BITS = 6000


def _heu_gcd(f: Dict[tuple, int], g: Dict[tuple, int], k: int):
    """Heuristic gcd of integer polynomials (evaluation at a large integer,
    interpolation, trial division).  Returns the gcd or None on failure."""
    if k == 0:
        return {(): _c_gcd(f[()], g[()])}
    cf, cg = _int_content(f), _int_content(g)
    c = _c_gcd(cf, cg)
    f = {m: _c_exact(v, cf) for m, v in f.items()}
    g = {m: _c_exact(v, cg) for m, v in g.items()}
    f_norm = max(_c_mag(v) for v in f.values())
    g_norm = max(_c_mag(v) for v in g.values())
    B = 2 * min(f_norm, g_norm) + 29
    x = max(min(B, 99 * math.isqrt(B)),
            2 * min(f_norm // max(1, _c_mag(f[max(f)])), g_norm // max(1, _c_mag(g[max(g)]))) + 2)
    for _ in range(6):
        if x.bit_length() > _HEU_MAX_BITS:
            return None
        ff = _heu_eval(f, x)
        gg = _heu_eval(g, x)
        if ff and gg:
            h = _heu_gcd(ff, gg, k - 1)
            # an inner failure is final; retrying here only multiplies the work
            if h is None:
                return None
            if h:
                hh = _heu_interp(h, x)
                if hh:
                    ch = _int_content(hh)
                    hh = {m: _c_exact(v, ch) for m, v in hh.items()}
                    if _int_divexact(f, hh) is not None and _int_divexact(g, hh) is not None:
                        return {m: v * c for m, v in hh.items()}
                    # try via the cofactor of f
                    cff = _int_divexact(ff, h)
                    if cff is not None:
                        cf_int = _heu_interp(cff, x)
                        if cf_int:
                            h2 = _int_divexact(f, cf_int)
                            if h2 and _int_divexact(g, h2) is not None:
                                ch = _int_content(h2)
                                return {m: _c_exact(v, ch) * c for m, v in h2.items()}
        x = 73794 * x * math.isqrt(math.isqrt(x)) // 27011
    return None


def _poly_gcd_nomono(a: Poly, b: Poly) -> Poly:
    if a.is_const() or b.is_const():
        return Poly.const(1)
    if len(b.terms) > len(a.terms):
        a, b = b, a
    q = divexact(a, b)
    if q is not None:
        return b
    if len(b.terms) == 1:
        return Poly.const(1)
    atoms_a, atoms_b = a.atoms(), b.atoms()
    # an atom in only one argument: gcd divides that argument's content in it
    only_a = atoms_a - atoms_b
    if only_a:
        v = min(only_a)
        g = b
        for c in a.coeffs_in(v).values():
            g = poly_gcd(g, c)
            if g.is_const():
                return g
        return g
    only_b = atoms_b - atoms_a
    if only_b:
        v = min(only_b)
        g = a
        for c in b.coeffs_in(v).values():
            g = poly_gcd(g, c)
            if g.is_const():
                return g
        return g
    common = atoms_a & atoms_b
    atoms = sorted(atoms_a | atoms_b)
    fa, fb = _to_intdict(a, atoms), _to_intdict(b, atoms)
    if _is_real(a) != _is_real(b):
        fa = {m: _gi(v) for m, v in fa.items()}
        fb = {m: _gi(v) for m, v in fb.items()}
    h = _heu_gcd(fa, fb, len(atoms))
    if h is not None:
        return _from_intdict(h, atoms)
    # main variable: lowest combined degree keeps the PRS short
    v = min(common, key=lambda at: (a.degree_in(at) + b.degree_in(at), at))
    ca, cb = _content_in(a, v), _content_in(b, v)
    c = poly_gcd(ca, cb)
    pa = _num_primitive(divexact(a, ca))
    pb = _num_primitive(divexact(b, cb))
    if pa.degree_in(v) < pb.degree_in(v):
        pa, pb = pb, pa
    if pb.degree_in(v) == 0:
        return c
    while True:
        r = _prem(pa, pb, v)
        if r.is_zero():
            break
        if r.degree_in(v) == 0:
            pb = Poly.const(1)
            break
        pa, pb = pb, _num_primitive(divexact(r, _content_in(r, v)))
    if pb.degree_in(v) > 0:
        pb = divexact(pb, _content_in(pb, v))
    return c * pb


# ---------------------------------------------------------------------------
# Canonical rational functions


def _split_pi(p: Poly) -> Tuple[int, Poly]:
    lo = None
    for m in p.terms:
        e = 0
        for atom, ee in m:
            if atom.rank == 3:
                e = ee
                break
        lo = e if lo is None else min(lo, e)
    if not lo:
        return 0, p
    return lo, p.mul_mono(((PI_ATOM, -lo),))


class Expr:
    """Canonical rational function ``num / den``.

    Build with the module constructors (``const``, ``var``, ``func``, ``PI``,
    ``I``) and Python operators.  ``Expr(num, den)`` normalizes; the private
    ``_raw`` path trusts the caller.
    """

    __slots__ = ("num", "den", "_is_poly", "_hash")

    def __init__(self, num: Poly, den: Poly | None = None, _raw: bool = False):
        if den is None:
            den = _POLY_ONE
            _raw = True if not _has_neg_exponents(num) else _raw
        if not _raw:
            num, den = _normalize(num, den)
        self.num = num
        self.den = den
        self._is_poly = den.is_one()
        self._hash = None

    # -- predicates ------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.num.terms

    def is_const(self) -> bool:
        return self._is_poly and self.num.is_const()

    def is_polynomial(self) -> bool:
        return self._is_poly

    def __bool__(self):
        return bool(self.num.terms)

    def __eq__(self, other):
        if not isinstance(other, Expr):
            if isinstance(other, (int, Fraction, complex, GQ)):
                other = const(other)
            else:
                return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.num, self.den))
        return self._hash

    def __repr__(self):
        from .dsl import render_expr

        return f"Expr({render_expr(self)!r})"

    def __str__(self):
        from .dsl import render_expr

        return render_expr(self)

    # -- field operations -------------------------------------------------
    def __add__(self, other) -> "Expr":
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if not other.num.terms:
            return self
        if not self.num.terms:
            return other
        if self._is_poly and other._is_poly:
            return Expr(self.num + other.num, _POLY_ONE, _raw=True)
        return _add_rational(self.num, self.den, other.num, other.den)

    __radd__ = __add__

    def __neg__(self) -> "Expr":
        return Expr(-self.num, self.den, _raw=True)

    def __sub__(self, other) -> "Expr":
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> "Expr":
        return _coerce(other) + (-self)

    def __mul__(self, other) -> "Expr":
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if not self.num.terms or not other.num.terms:
            return ZERO
        if self._is_poly and other._is_poly:
            num = self.num * other.num
            if _has_neg_exponents(num):
                return Expr(num, _POLY_ONE, _raw=False)
            return Expr(num, _POLY_ONE, _raw=True)
        if other._is_poly and _is_unit(other.num):
            return Expr(self.num * other.num, self.den, _raw=True)
        if self._is_poly and _is_unit(self.num):
            return Expr(self.num * other.num, other.den, _raw=True)
        return _mul_rational(self.num, self.den, other.num, other.den)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Expr":
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if not other.num.terms:
            raise ZeroDivisionError("zero denominator")
        return Expr(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other) -> "Expr":
        return _coerce(other) / self

    def __pow__(self, k: int) -> "Expr":
        if not isinstance(k, int):
            raise TypeError("only integer powers are supported")
        if k < 0:
            return ONE / (self ** (-k))
        if self._is_poly:
            return Expr(self.num ** k)
        return Expr(self.num ** k, self.den ** k, _raw=True)

    def conjugate(self) -> "Expr":
        """Complex conjugate, treating every atom as real."""
        return Expr(self.num.conjugate(), self.den.conjugate())

    def real_part(self) -> "Expr":
        return (self + self.conjugate()) * Fraction(1, 2)

    # -- calculus ---------------------------------------------------------
    def partial(self, v: VarId) -> "Expr":
        if self._is_poly:
            return Expr(self.num.partial(v))
        dn = self.num.partial(v)
        dd = self.den.partial(v)
        if dd.is_zero():
            return Expr(dn, self.den)
        return Expr(dn * self.den - self.num * dd, self.den * self.den)

    def free_vars(self) -> set:
        return self.num.free_vars() | self.den.free_vars()

    def atoms(self) -> set:
        return self.num.atoms() | self.den.atoms()

    def substitute(self, sigma: Mapping[VarId, "Expr"]) -> "Expr":
        return substitute(self, sigma)

    def eval(self, point: Mapping = (), funcs: Mapping = ()) -> complex:
        return eval_numeric(self, point, funcs)


_POLY_ONE = Poly.const(1)


def _has_neg_exponents(p: Poly) -> bool:
    for m in p.terms:
        for atom, e in m:
            if e < 0 and atom.rank != 3:
                return True
    return False


def _normalize(num: Poly, den: Poly) -> Tuple[Poly, Poly]:
    if den.is_zero():
        raise ZeroDivisionError("zero denominator")
    if num.is_zero():
        return Poly(), _POLY_ONE
    # non-pi negative exponents can only come from monomial division; fold
    # them into the denominator
    for p_is_num in (True, False):
        p = num if p_is_num else den
        neg = {}
        for m in p.terms:
            for atom, e in m:
                if e < 0 and atom.rank != 3:
                    neg[atom] = max(neg.get(atom, 0), -e)
        if neg:
            mono = tuple(sorted(neg.items()))
            num = num.mul_mono(mono)
            den = den.mul_mono(mono)
    pn, n1 = _split_pi(num)
    pd, d1 = _split_pi(den)
    if d1.is_const():
        g = d1.const_value()
        n1 = n1.scale(g.inverse())
        d1 = _POLY_ONE
    else:
        q = divexact(n1, d1)
        if q is not None:
            n1, d1 = q, _POLY_ONE
        else:
            g = poly_gcd(n1, d1)
            if not g.is_const():
                n1 = divexact(n1, g)
                d1 = divexact(d1, g)
            _, lc = d1.leading()
            if not lc.is_one():
                inv = lc.inverse()
                n1 = n1.scale(inv)
                d1 = d1.scale(inv)
    shift = pn - pd
    if shift:
        n1 = n1.mul_mono(((PI_ATOM, shift),))
    return n1, d1


def _is_unit(p: Poly) -> bool:
    """Single term made of a constant times a power of pi."""
    if len(p.terms) != 1:
        return False
    (m,) = p.terms
    return all(atom.rank == 3 for atom, _ in m)


def _gcd_laurent(n: Poly, d: Poly) -> Poly:
    # d is never divisible by pi, so the Laurent pi part of n is irrelevant
    return poly_gcd(_split_pi(n)[1], d)


def _cancel(n: Poly, g: Poly) -> Poly:
    if g.is_one():
        return n
    if g.is_const():
        return n.scale(g.const_value().inverse())
    shift, n1 = _split_pi(n)
    q = divexact(n1, g)
    if q is None:
        raise ArithmeticError("internal error: cancellation by a non-divisor")
    return q.mul_mono(((PI_ATOM, shift),)) if shift else q


def _finish(num: Poly, den: Poly) -> "Expr":
    if num.is_zero():
        return ZERO
    if den.is_const():
        return Expr(num.scale(den.const_value().inverse()), _POLY_ONE, _raw=True)
    _, lc = den.leading()
    if not lc.is_one():
        inv = lc.inverse()
        num, den = num.scale(inv), den.scale(inv)
    return Expr(num, den, _raw=True)


def _mul_rational(n1: Poly, d1: Poly, n2: Poly, d2: Poly) -> "Expr":
    g1 = _gcd_laurent(n1, d2) if not d2.is_one() else _POLY_ONE
    g2 = _gcd_laurent(n2, d1) if not d1.is_one() else _POLY_ONE
    num = _cancel(n1, g1) * _cancel(n2, g2)
    den = _cancel(d1, g2) * _cancel(d2, g1)
    return _finish(num, den)


def _add_rational(n1: Poly, d1: Poly, n2: Poly, d2: Poly) -> "Expr":
    # with g = gcd(d1, d2) the sum can only share factors with g
    if d1 == d2:
        g, c1, c2 = d1, _POLY_ONE, _POLY_ONE
    else:
        g = poly_gcd(d1, d2)
        c1, c2 = _cancel(d1, g), _cancel(d2, g)
    num = n1 * c2 + n2 * c1
    if num.is_zero():
        return ZERO
    h = _gcd_laurent(num, g)
    num = _cancel(num, h)
    den = _cancel(g, h) * c1 * c2
    return _finish(num, den)


def _coerce(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction, complex, GQ, float)):
        return const(x)
    if isinstance(x, Scalar):
        return x.to_expr()
    return NotImplemented


def expr_sum(items: Iterable[Expr]) -> Expr:
    """Sum many expressions, normalizing once per distinct denominator."""
    groups: Dict[Poly, Poly] = {}
    poly_acc = Poly()
    for e in items:
        if e._is_poly:
            poly_acc = poly_acc + e.num
        else:
            groups[e.den] = groups.get(e.den, Poly()) + e.num
    out = Expr(poly_acc, _POLY_ONE, _raw=True)
    for den, num in groups.items():
        out = out + Expr(num, den)
    return out


# ---------------------------------------------------------------------------
# Scalars and constructors


class Scalar:
    """Gaussian rational times an integer power of pi."""

    __slots__ = ("value", "pi_pow")

    def __init__(self, re=0, im=0, pi_pow: int = 0):
        v = GQ(_q(Fraction(re)), _q(Fraction(im)))
        self.value = v
        self.pi_pow = pi_pow if v else 0

    def __eq__(self, other):
        return (isinstance(other, Scalar) and self.value == other.value
                and self.pi_pow == other.pi_pow)

    def __hash__(self):
        return hash((self.value, self.pi_pow))

    def __repr__(self):
        return f"Scalar({self.value.re}, {self.value.im}, pi_pow={self.pi_pow})"

    def __pow__(self, k: int) -> "Scalar":
        out = GQ_ONE
        for _ in range(abs(k)):
            out = out * self.value
        if k < 0:
            out = out.inverse()
        return Scalar(out.re, out.im, self.pi_pow * k)

    def to_expr(self) -> Expr:
        if not self.value:
            return ZERO
        mono = ((PI_ATOM, self.pi_pow),) if self.pi_pow else ()
        return Expr(Poly({mono: self.value}), _POLY_ONE, _raw=True)


def const(c) -> Expr:
    if isinstance(c, Scalar):
        return c.to_expr()
    return Expr(Poly.const(as_gq(c)), _POLY_ONE, _raw=True)


def var(v: VarId) -> Expr:
    return Expr(Poly.atom(v), _POLY_ONE, _raw=True)


def x(i: int) -> Expr:
    return var(base(i))


def gamma(alpha: int, i: int, beta: int) -> Expr:
    return var(fiber(alpha, i, beta))


def func(name: str, args: Iterable[VarId], partials: Iterable[VarId] = ()) -> Expr:
    return Expr(Poly.atom(funcsym(name, args, partials)), _POLY_ONE, _raw=True)


ZERO = Expr(Poly(), _POLY_ONE, _raw=True)
ONE = const(1)
I = const(GQ(0, 1))
PI = Expr(Poly.atom(PI_ATOM), _POLY_ONE, _raw=True)
# (sqrt(-1)) / (2 pi), the normalization inside the characteristic determinant
I_OVER_2PI = Scalar(0, Fraction(1, 2), -1)


def to_scalar(e: Expr) -> Scalar:
    """Inverse of ``Scalar.to_expr`` for single-term pi-monomial constants."""
    if not e._is_poly or len(e.num.terms) > 1:
        raise ValueError("not a scalar")
    if e.is_zero():
        return Scalar()
    (m, c), = e.num.terms.items()
    if any(atom.rank != 3 for atom, _ in m):
        raise ValueError("not a scalar")
    pp = m[0][1] if m else 0
    return Scalar(c.re, c.im, pp)


# ---------------------------------------------------------------------------
# Substitution and evaluation


def substitute(e: Expr, sigma: Mapping[VarId, Expr]) -> Expr:
    """Simultaneous substitution of coordinates by expressions."""
    if not sigma:
        return e
    cache: Dict[tuple, Expr] = {}
    num = _subst_poly(e.num, sigma, cache)
    if e._is_poly:
        return num
    den = _subst_poly(e.den, sigma, cache)
    if den.is_zero():
        raise ZeroDivisionError("denominator vanished under substitution")
    return num / den


def _atom_power(atom, e: int, sigma, cache) -> Expr:
    key = (atom, e)
    hit = cache.get(key)
    if hit is not None:
        return hit
    if atom.rank < 2 and atom in sigma:
        base_e = sigma[atom]
        out = base_e ** e
    else:
        for v in atom.args:
            if v in sigma and sigma[v] != var(v):
                raise ValueError(
                    f"cannot substitute into argument {v!r} of opaque function {atom.name}")
        out = Expr(Poly.atom(atom, e), _POLY_ONE, _raw=True)
    cache[key] = out
    return out


def _subst_poly(p: Poly, sigma, cache) -> Expr:
    parts = []
    for m, c in p.terms.items():
        term = Expr(Poly({(): c}), _POLY_ONE, _raw=True)
        rest = []
        for atom, e in m:
            if (atom.rank < 2 and atom in sigma) or atom.rank == 2:
                term = term * _atom_power(atom, e, sigma, cache)
            else:
                rest.append((atom, e))
        if rest:
            term = term * Expr(Poly({tuple(rest): GQ_ONE}))
        parts.append(term)
    return expr_sum(parts)


EPS_DEN = 1e-300


def eval_numeric(e: Expr, point: Mapping = (), funcs: Mapping = ()) -> complex:
    """Evaluate at a point.

    ``point`` maps VarId -> float; ``funcs`` maps FuncSym (with its partials)
    or a function name to either a float or a callable ``(fs, point) -> float``.
    """
    point = dict(point)
    funcs = dict(funcs)
    num = _eval_poly(e.num, point, funcs)
    if e._is_poly:
        return num
    den = _eval_poly(e.den, point, funcs)
    if abs(den) < EPS_DEN:
        raise ZeroDivisionError("pole at evaluation point")
    return num / den


def _atom_value(atom, point, funcs) -> float:
    if atom.rank == 3:
        return math.pi
    if atom.rank < 2:
        if atom not in point:
            raise KeyError(f"unbound symbol {atom!r}")
        return point[atom]
    if atom in funcs:
        f = funcs[atom]
    elif atom.name in funcs:
        f = funcs[atom.name]
    else:
        raise KeyError(f"unbound symbol {atom!r}")
    if callable(f):
        return f(atom, point)
    return f


def _eval_poly(p: Poly, point, funcs) -> complex:
    acc = 0j
    for m, c in p.terms.items():
        t = 1.0
        for atom, e in m:
            t *= _atom_value(atom, point, funcs) ** e
        acc += c.to_complex() * t
    return acc


def compile_numeric(e: Expr, funcs: Mapping[str, Callable] | None = None):
    """Vectorized evaluator.

    Returns ``f(coords)`` where ``coords`` maps base VarId -> ndarray (all the
    same shape).  ``funcs`` maps a FuncSym name to ``impl(fs, coords) -> ndarray``
    that must honour ``fs.partials``.
    """
    import numpy as np

    funcs = dict(funcs or {})

    def ev_poly(p: Poly, coords, cache):
        re = None
        im = None
        for m, c in p.terms.items():
            t = None
            for atom, ex in m:
                key = (atom, ex)
                val = cache.get(key)
                if val is None:
                    if atom.rank == 3:
                        val = math.pi ** ex
                    else:
                        b = cache.get((atom, 1))
                        if b is None:
                            if atom.rank < 2:
                                b = np.asarray(coords[atom], dtype=float)
                            else:
                                impl = funcs.get(atom.name)
                                if impl is None:
                                    raise KeyError(f"unbound symbol {atom!r}")
                                b = np.asarray(impl(atom, coords), dtype=float)
                            cache[(atom, 1)] = b
                        val = b ** ex if ex != 1 else b
                    cache[key] = val
                t = val if t is None else t * val
            if t is None:
                t = 1.0
            if c.re:
                re = float(c.re) * t if re is None else re + float(c.re) * t
            if c.im:
                im = float(c.im) * t if im is None else im + float(c.im) * t
        shape = np.shape(next(iter(coords.values()))) if coords else ()
        re = np.zeros(shape) + (0.0 if re is None else re)
        im = np.zeros(shape) + (0.0 if im is None else im)
        return re + 1j * im

    def f(coords):
        cache: dict = {}
        n = ev_poly(e.num, coords, cache)
        if e._is_poly:
            return n
        d = ev_poly(e.den, coords, cache)
        if np.any(np.abs(d) < EPS_DEN):
            raise ZeroDivisionError("pole at evaluation point")
        return n / d

    return f


# ---------------------------------------------------------------------------
# Small dense matrices of expressions

ExprMatrix = list  # list of rows of Expr


def mat_identity(n: int) -> ExprMatrix:
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


def mat_mul(a: ExprMatrix, b: ExprMatrix) -> ExprMatrix:
    n, m, p = len(a), len(b), len(b[0])
    return [[expr_sum(a[i][k] * b[k][j] for k in range(m)) for j in range(p)]
            for i in range(n)]


def mat_inverse(a: ExprMatrix) -> ExprMatrix:
    """Exact inverse by Gauss-Jordan elimination over rational functions."""
    n = len(a)
    aug = [list(row) + [ONE if i == j else ZERO for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        # prefer constant pivots, then the smallest expression
        candidates = [r for r in range(col, n) if not aug[r][col].is_zero()]
        if not candidates:
            raise ZeroDivisionError("matrix is not invertible")
        piv = min(candidates, key=lambda r: (not aug[r][col].is_const(),
                                             len(aug[r][col].num.terms) + len(aug[r][col].den.terms)))
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = ONE / aug[col][col]
        aug[col] = [e * inv for e in aug[col]]
        for r in range(n):
            if r != col and not aug[r][col].is_zero():
                f = aug[r][col]
                aug[r] = [aug[r][j] - f * aug[col][j] for j in range(2 * n)]
    return [row[n:] for row in aug]


def mat_det(a: ExprMatrix) -> Expr:
    """Determinant by Laplace expansion (fine for n <= 5)."""
    n = len(a)
    if n == 1:
        return a[0][0]
    parts = []
    for j in range(n):
        if a[0][j].is_zero():
            continue
        sub = [row[:j] + row[j + 1:] for row in a[1:]]
        t = a[0][j] * mat_det(sub)
        parts.append(t if j % 2 == 0 else -t)
    return expr_sum(parts)

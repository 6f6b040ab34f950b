"""Exact arithmetic in a real algebraic number field Q(alpha).

All grid data in this package lives in a single user-declared field
Q(alpha), where alpha is specified by its minimal polynomial together
with an isolating rational interval selecting one real root.  Elements
are coefficient vectors (c_0, ..., c_{n-1}) representing
c_0 + c_1*alpha + ... + c_{n-1}*alpha^{n-1} with rational c_t, so

  * equality and rationality are decidable by inspecting coefficients,
  * signs are decidable by refining the isolating interval.

Rationals are `fractions.Fraction` throughout (always lowest terms,
positive denominator), which is what makes equality canonical.
"""

from __future__ import annotations

from fractions import Fraction

__all__ = [
    "FieldError",
    "NumberField",
    "AlgebraicNumber",
    "coefficient_vectors",
    "assemble",
    "fraction_to_str",
    "parse_fraction",
    "field_to_json",
    "field_from_json",
    "an_to_json",
    "an_from_json",
]

# Bisection steps allowed while deciding a sign.  Reached only if the
# minimal polynomial was not irreducible (a nonzero coefficient vector
# can then still represent the real number 0).
_SIGN_REFINE_CAP = 20000


class FieldError(ValueError):
    """Invalid field specification or cross-field operation."""


def parse_fraction(x) -> Fraction:
    """Parse an int, Fraction, or "p/q" string into a Fraction.

    >>> parse_fraction("-3/4")
    Fraction(-3, 4)
    >>> parse_fraction(7)
    Fraction(7, 1)
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise FieldError(f"malformed rational {x!r}: {exc}") from None
    if isinstance(x, float):
        raise FieldError(
            f"refusing to parse float {x!r} as an exact rational; use 'p/q'"
        )
    raise FieldError(f"cannot interpret {x!r} as a rational")


def fraction_to_str(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


# ----------------------------------------------------------------------
# Polynomial helpers over Q, coefficient lists with constant term first.

def _poly_trim(p):
    while p and p[-1] == 0:
        p.pop()
    return p


def _poly_divmod(a, b):
    """Quotient and remainder of a by b in Q[x]; b nonzero."""
    a = list(a)
    q = [Fraction(0)] * max(0, len(a) - len(b) + 1)
    inv_lead = 1 / b[-1]
    for k in range(len(a) - len(b), -1, -1):
        c = a[k + len(b) - 1] * inv_lead
        q[k] = c
        if c:
            for j, bj in enumerate(b):
                a[k + j] -= c * bj
    return _poly_trim(q), _poly_trim(a[: len(b) - 1])


def _poly_gcd(a, b):
    a, b = _poly_trim(list(a)), _poly_trim(list(b))
    while b:
        a, b = b, _poly_divmod(a, b)[1]
    if a:
        lead = a[-1]
        a = [c / lead for c in a]
    return a


def _poly_xgcd_modulus(a, f):
    """Return (g, u) with u*a = g mod f, g the monic gcd(a, f).

    Used for inversion: when g = 1, u is the inverse of a modulo f.
    """
    # Maintain the invariant  r = u*a (mod f)  for both rows.
    r0, u0 = _poly_trim(list(f)), []
    r1, u1 = _poly_trim(list(a)), [Fraction(1)]
    while r1:
        q, r = _poly_divmod(r0, r1)
        # u_new = u0 - q*u1
        prod = [Fraction(0)] * (len(q) + len(u1) - 1) if q and u1 else []
        for i, qi in enumerate(q):
            if qi:
                for j, uj in enumerate(u1):
                    prod[i + j] += qi * uj
        u = [Fraction(0)] * max(len(u0), len(prod))
        for i, c in enumerate(u0):
            u[i] += c
        for i, c in enumerate(prod):
            u[i] -= c
        r0, u0, r1, u1 = r1, u1, r, _poly_trim(u)
    if r0:
        lead = r0[-1]
        r0 = [c / lead for c in r0]
        u0 = [c / lead for c in u0]
    return r0, u0


def _poly_eval_fraction(p, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


def _interval_eval(p, lo: Fraction, hi: Fraction):
    """Interval-arithmetic Horner evaluation of p over [lo, hi]."""
    alo = ahi = Fraction(0)
    for c in reversed(p):
        cands = (alo * lo, alo * hi, ahi * lo, ahi * hi)
        alo, ahi = min(cands) + c, max(cands) + c
    return alo, ahi


# ----------------------------------------------------------------------


class NumberField:
    """The real field Q(alpha), alpha a root of `minpoly` in `root_interval`.

    `minpoly` is given constant-term first and is normalized to be monic.
    Squarefreeness is always enforced; irreducibility is verified for
    degree <= 4 and is a documented user obligation above that (a
    reducible modulus surfaces later as a FieldError during division or
    sign refinement, never as a silently wrong answer).

    >>> F = NumberField([-2, 0, 1], ("1", "2"))   # x^2 - 2, alpha = sqrt(2)
    >>> F.degree
    2
    """

    __slots__ = (
        "minpoly", "degree", "_interval", "_interval0", "_alpha_float", "_reduction"
    )

    def __init__(self, minpoly, root_interval):
        coeffs = [parse_fraction(c) for c in minpoly]
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        if len(coeffs) < 2:
            raise FieldError("minpoly must have degree >= 1")
        lead = coeffs[-1]
        coeffs = [c / lead for c in coeffs]
        self.minpoly = tuple(coeffs)
        self.degree = len(coeffs) - 1

        deriv = [i * c for i, c in enumerate(coeffs)][1:]
        if len(_poly_gcd(coeffs, deriv)) > 1:
            raise FieldError("minpoly is not squarefree")
        if 2 <= self.degree <= 4:
            self._check_irreducible()

        lo, hi = (parse_fraction(v) for v in root_interval)
        if not lo < hi:
            raise FieldError("root_interval must satisfy lo < hi")
        if self.degree == 1:
            root = -self.minpoly[0]
            if not (lo < root < hi):
                raise FieldError("root_interval does not contain the rational root")
        else:
            flo = _poly_eval_fraction(coeffs, lo)
            fhi = _poly_eval_fraction(coeffs, hi)
            if flo == 0 or fhi == 0:
                raise FieldError("root_interval endpoints must not be roots")
            if (flo < 0) == (fhi < 0):
                raise FieldError("minpoly does not change sign on root_interval")
            if self._count_real_roots(lo, hi) != 1:
                raise FieldError("root_interval must isolate exactly one real root")
        self._interval = (lo, hi)
        # The interval as given, kept stable for serialization while
        # _interval narrows during sign refinement.
        self._interval0 = (lo, hi)
        self._alpha_float = None

        # alpha^n = -(c_0 + c_1 alpha + ... + c_{n-1} alpha^{n-1});
        # table of alpha^n .. alpha^{2n-2} as coefficient vectors.
        n = self.degree
        table = []
        prev = [-c for c in coeffs[:n]]
        table.append(tuple(prev))
        for _ in range(n - 2):
            shifted = [Fraction(0)] + prev[:-1]
            top = prev[-1]
            prev = [s + top * t for s, t in zip(shifted, table[0])]
            table.append(tuple(prev))
        self._reduction = tuple(table)

    def _check_irreducible(self):
        from sympy import Poly, Rational, symbols

        x = symbols("x")
        p = Poly(
            sum(Rational(c.numerator, c.denominator) * x**i
                for i, c in enumerate(self.minpoly)),
            x,
        )
        if not p.is_irreducible:
            raise FieldError("minpoly is reducible over Q")

    def _count_real_roots(self, lo: Fraction, hi: Fraction) -> int:
        from sympy import Poly, Rational, symbols

        x = symbols("x")
        p = Poly(
            sum(Rational(c.numerator, c.denominator) * x**i
                for i, c in enumerate(self.minpoly)),
            x,
        )
        return p.count_roots(
            Rational(lo.numerator, lo.denominator),
            Rational(hi.numerator, hi.denominator),
        )

    # -- root interval refinement ------------------------------------

    def refine_interval(self):
        """One bisection step; keeps the sign change across the interval."""
        lo, hi = self._interval
        if self.degree == 1:
            return
        mid = (lo + hi) / 2
        fmid = _poly_eval_fraction(self.minpoly, mid)
        if fmid == 0:
            # Irreducible of degree >= 2 has no rational root; if we get
            # here the modulus was bad.  Nudge rather than divide by it.
            mid = (lo + 2 * hi) / 3
            fmid = _poly_eval_fraction(self.minpoly, mid)
            if fmid == 0:
                raise FieldError("minpoly has a rational root; not irreducible")
        flo = _poly_eval_fraction(self.minpoly, lo)
        if (flo < 0) != (fmid < 0):
            self._interval = (lo, mid)
        else:
            self._interval = (mid, hi)

    def alpha_interval(self, max_width: Fraction):
        if self.degree == 1:
            root = -self.minpoly[0]
            return (root, root)
        while self._interval[1] - self._interval[0] > max_width:
            self.refine_interval()
        return self._interval

    def alpha_float(self) -> float:
        if self._alpha_float is None:
            if self.degree == 1:
                self._alpha_float = float(-self.minpoly[0])
            else:
                lo, hi = self.alpha_interval(Fraction(1, 10**20))
                self._alpha_float = float((lo + hi) / 2)
        return self._alpha_float

    # -- element constructors ----------------------------------------

    def element(self, coeffs) -> AlgebraicNumber:
        cs = [parse_fraction(c) for c in coeffs]
        if len(cs) > self.degree:
            raise FieldError(
                f"coefficient vector of length {len(cs)} in a degree "
                f"{self.degree} field"
            )
        cs += [Fraction(0)] * (self.degree - len(cs))
        return AlgebraicNumber(self, tuple(cs))

    def rational(self, x) -> AlgebraicNumber:
        return self.element([parse_fraction(x)])

    def zero(self) -> AlgebraicNumber:
        return self.rational(0)

    def one(self) -> AlgebraicNumber:
        return self.rational(1)

    def alpha(self) -> AlgebraicNumber:
        if self.degree == 1:
            return self.rational(-self.minpoly[0])
        return self.element([0, 1])

    # ------------------------------------------------------------------

    def _key(self):
        return (self.minpoly,)

    def __eq__(self, other):
        return isinstance(other, NumberField) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"NumberField(minpoly={[str(c) for c in self.minpoly]})"


def _coerce(field: NumberField, x) -> "AlgebraicNumber":
    if isinstance(x, AlgebraicNumber):
        if x.field != field:
            raise FieldError("mixed operands from different number fields")
        return x
    if isinstance(x, (int, Fraction)):
        return field.rational(x)
    return NotImplemented


class AlgebraicNumber:
    """An element of a NumberField; immutable, exact, totally ordered.

    >>> F = NumberField([-2, 0, 1], (1, 2))
    >>> r2 = F.alpha()
    >>> (r2 * r2).as_fraction()
    Fraction(2, 1)
    >>> (1 / (1 + r2)) == r2 - 1
    True
    >>> (3 - 2 * r2).sign()
    1
    """

    __slots__ = ("field", "coeffs")

    def __init__(self, field: NumberField, coeffs):
        self.field = field
        self.coeffs = coeffs

    # -- ring/field operations ----------------------------------------

    def __add__(self, other):
        other = _coerce(self.field, other)
        if other is NotImplemented:
            return NotImplemented
        return AlgebraicNumber(
            self.field, tuple(a + b for a, b in zip(self.coeffs, other.coeffs))
        )

    __radd__ = __add__

    def __neg__(self):
        return AlgebraicNumber(self.field, tuple(-a for a in self.coeffs))

    def __sub__(self, other):
        other = _coerce(self.field, other)
        if other is NotImplemented:
            return NotImplemented
        return AlgebraicNumber(
            self.field, tuple(a - b for a, b in zip(self.coeffs, other.coeffs))
        )

    def __rsub__(self, other):
        return -(self - other)

    def __mul__(self, other):
        other = _coerce(self.field, other)
        if other is NotImplemented:
            return NotImplemented
        n = self.field.degree
        a, b = self.coeffs, other.coeffs
        if n == 1:
            return AlgebraicNumber(self.field, (a[0] * b[0],))
        conv = [Fraction(0)] * (2 * n - 1)
        for i, ai in enumerate(a):
            if ai:
                for j, bj in enumerate(b):
                    if bj:
                        conv[i + j] += ai * bj
        out = conv[:n]
        for k in range(n, 2 * n - 1):
            ck = conv[k]
            if ck:
                red = self.field._reduction[k - n]
                for t in range(n):
                    if red[t]:
                        out[t] += ck * red[t]
        return AlgebraicNumber(self.field, tuple(out))

    __rmul__ = __mul__

    def inverse(self) -> "AlgebraicNumber":
        if not any(self.coeffs):
            raise ZeroDivisionError("division by zero field element")
        g, u = _poly_xgcd_modulus(list(self.coeffs), list(self.field.minpoly))
        if len(g) != 1:
            raise FieldError(
                "element is a zero divisor; the declared minpoly is reducible"
            )
        n = self.field.degree
        u += [Fraction(0)] * (n - len(u))
        return AlgebraicNumber(self.field, tuple(u[:n]))

    def __truediv__(self, other):
        other = _coerce(self.field, other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = self.field.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- predicates and order ------------------------------------------

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def is_rational(self) -> bool:
        return not any(self.coeffs[1:])

    def as_fraction(self) -> Fraction:
        if not self.is_rational():
            raise FieldError(f"{self!r} is not rational")
        return self.coeffs[0]

    def sign(self) -> int:
        """Exact sign under the real embedding: -1, 0, or +1."""
        if self.is_zero():
            return 0
        if self.is_rational():
            return 1 if self.coeffs[0] > 0 else -1
        poly = _poly_trim(list(self.coeffs))
        field = self.field
        for _ in range(_SIGN_REFINE_CAP):
            lo, hi = field._interval
            vlo, vhi = _interval_eval(poly, lo, hi)
            if vlo > 0:
                return 1
            if vhi < 0:
                return -1
            field.refine_interval()
        raise FieldError(
            "sign refinement did not terminate; minpoly is likely reducible"
        )

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.is_rational() and self.coeffs[0] == other
        if not isinstance(other, AlgebraicNumber):
            return NotImplemented
        return self.field == other.field and self.coeffs == other.coeffs

    def __hash__(self):
        if self.is_rational():
            return hash(self.coeffs[0])
        return hash((self.field.minpoly, self.coeffs))

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __gt__(self, other):
        return (self - other).sign() > 0

    def __ge__(self, other):
        return (self - other).sign() >= 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __float__(self):
        a = self.field.alpha_float()
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * a + float(c)
        return acc

    def __repr__(self):
        terms = []
        for t, c in enumerate(self.coeffs):
            if not c:
                continue
            if t == 0:
                terms.append(str(c))
            elif t == 1:
                terms.append(f"{c}*a")
            else:
                terms.append(f"{c}*a^{t}")
        return " + ".join(terms) if terms else "0"


# ----------------------------------------------------------------------
# Coefficient decomposition of vectors.

def coefficient_vectors(vec):
    """Decompose a vector over Q(alpha) as sum_t alpha^t * v_t.

    Returns the list (v_0, v_1, ..., v_{deg-1}) of rational vectors:
    v_0 is the rational part, v_t for t >= 1 the irrational parts.

    >>> F = NumberField([-2, 0, 1], (1, 2))
    >>> r2 = F.alpha()
    >>> [list(map(str, part)) for part in coefficient_vectors([1 + r2, F.rational(3)])]
    [['1', '3'], ['1', '0']]
    """
    vec = list(vec)
    if not vec:
        raise FieldError("empty vector")
    field = vec[0].field
    for v in vec:
        if not isinstance(v, AlgebraicNumber) or v.field != field:
            raise FieldError("vector entries must share one number field")
    return [
        tuple(v.coeffs[t] for v in vec)
        for t in range(field.degree)
    ]


def assemble(field: NumberField, parts):
    """Inverse of coefficient_vectors: rebuild the vector sum_t alpha^t v_t."""
    r = len(parts[0])
    out = []
    for i in range(r):
        out.append(field.element([part[i] for part in parts]))
    return out


# ----------------------------------------------------------------------
# JSON forms.  A field is {"minpoly": [...], "root_interval": ["lo","hi"]};
# an element is an array of "p/q" strings, constant coefficient first.

def field_to_json(field: NumberField) -> dict:
    lo, hi = field._interval0
    return {
        "minpoly": [fraction_to_str(c) for c in field.minpoly],
        "root_interval": [fraction_to_str(lo), fraction_to_str(hi)],
    }


def field_from_json(obj) -> NumberField:
    if not isinstance(obj, dict):
        raise FieldError("field spec must be an object")
    unknown = set(obj) - {"minpoly", "root_interval"}
    if unknown:
        raise FieldError(f"unknown field spec keys: {sorted(unknown)}")
    try:
        minpoly = obj["minpoly"]
        interval = obj["root_interval"]
    except KeyError as exc:
        raise FieldError(f"field spec missing key {exc}") from None
    if not isinstance(interval, (list, tuple)) or len(interval) != 2:
        raise FieldError("root_interval must be a pair")
    return NumberField(minpoly, interval)


def an_to_json(a: AlgebraicNumber) -> list:
    return [fraction_to_str(c) for c in a.coeffs]


def an_from_json(field: NumberField, obj) -> AlgebraicNumber:
    if isinstance(obj, (int, str)):
        obj = [obj]
    if not isinstance(obj, (list, tuple)):
        raise FieldError(f"cannot parse field element from {obj!r}")
    return field.element(obj)

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

from sympy import isprime

from backend_operations.errors import DomainError, ParseError, ResourceCapError, UsageError

DEFAULT_DEGREE_CAP = 10**6

_degree_cap = DEFAULT_DEGREE_CAP


def set_degree_cap(cap: int) -> None:
    """
    Set the largest polynomial degree any operation may produce.

    :param cap: Maximum degree, at least 1
    """
    global _degree_cap
    if cap < 1:
        raise UsageError(f"Degree cap must be positive, got {cap}.")
    _degree_cap = cap
    logging.debug(f"Degree cap set to {cap}.")


def get_degree_cap() -> int:
    return _degree_cap


def check_degree(degree: int, context: str) -> None:
    """Raise a resource error before allocating a polynomial above the cap."""
    if degree > _degree_cap:
        logging.warning(f"Degree cap hit in {context}: {degree} > {_degree_cap}.")
        raise ResourceCapError(f"{context} needs degree {degree}, above the cap of {_degree_cap}.")


@dataclass(frozen=True)
class PrimeModulus:
    p: int

    def __post_init__(self):
        if isinstance(self.p, bool) or not isinstance(self.p, int) or not isprime(self.p):
            raise DomainError(f"{self.p!r} is not a prime modulus.")

    def element(self, value: int) -> "FpElem":
        return FpElem(value, self)

    def poly(self, coeffs: Iterable[int]) -> "FpPoly":
        return FpPoly(tuple(coeffs), self)

    def ratfunc(self, num: Iterable[int], den: Iterable[int] = (1,)) -> "RatFunc":
        return RatFunc(self.poly(num), self.poly(den))

    def constant(self, value: int) -> "RatFunc":
        value %= self.p
        num = FpPoly._raw((value,) if value else (), self)
        return RatFunc._raw(num, FpPoly._raw((1,), self))

    def one(self) -> "RatFunc":
        return self.constant(1)

    def __repr__(self):
        return f"PrimeModulus({self.p})"


@dataclass(frozen=True)
class FpElem:
    value: int
    modulus: PrimeModulus

    def __post_init__(self):
        object.__setattr__(self, "value", self.value % self.modulus.p)

    def _coerce(self, other) -> int:
        if isinstance(other, FpElem):
            if other.modulus != self.modulus:
                raise UsageError(f"Cannot combine elements of F_{self.modulus.p} and F_{other.modulus.p}.")
            return other.value
        if isinstance(other, int):
            return other
        return NotImplemented

    def _new(self, value: int) -> "FpElem":
        return FpElem(value, self.modulus)

    def __add__(self, other):
        value = self._coerce(other)
        if value is NotImplemented:
            return value
        return self._new(self.value + value)

    __radd__ = __add__

    def __sub__(self, other):
        value = self._coerce(other)
        if value is NotImplemented:
            return value
        return self._new(self.value - value)

    def __rsub__(self, other):
        value = self._coerce(other)
        if value is NotImplemented:
            return value
        return self._new(value - self.value)

    def __mul__(self, other):
        value = self._coerce(other)
        if value is NotImplemented:
            return value
        return self._new(self.value * value)

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.value)

    def inverse(self) -> "FpElem":
        if self.value == 0:
            raise DomainError(f"Zero has no inverse in F_{self.modulus.p}.")
        return self._new(pow(self.value, -1, self.modulus.p))

    def __truediv__(self, other):
        value = self._coerce(other)
        if value is NotImplemented:
            return value
        return self * self._new(value).inverse()

    def __pow__(self, exponent: int) -> "FpElem":
        if exponent < 0:
            return self.inverse() ** (-exponent)
        return self._new(pow(self.value, exponent, self.modulus.p))

    def __int__(self):
        return self.value

    def __bool__(self):
        return self.value != 0

    def __repr__(self):
        return f"FpElem({self.value} mod {self.modulus.p})"


def _strip(coeffs: list) -> list:
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


def _add(a: Sequence[int], b: Sequence[int], p: int) -> list:
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, c in enumerate(b):
        out[i] = (out[i] + c) % p
    return _strip(out)


def _sub(a: Sequence[int], b: Sequence[int], p: int) -> list:
    out = list(a) + [0] * max(0, len(b) - len(a))
    for i, c in enumerate(b):
        out[i] = (out[i] - c) % p
    return _strip(out)


def _scale(a: Sequence[int], c: int, p: int) -> list:
    c %= p
    if c == 0:
        return []
    return [x * c % p for x in a]


def _mul(a: Sequence[int], b: Sequence[int], p: int) -> list:
    if not a or not b:
        return []
    check_degree(len(a) + len(b) - 2, "polynomial product")
    if len(a) == 1:
        return _scale(b, a[0], p)
    if len(b) == 1:
        return _scale(a, b[0], p)
    dense = [(i, c) for i, c in enumerate(a) if c]
    sparse = [(j, c) for j, c in enumerate(b) if c]
    if len(dense) < len(sparse):
        dense, sparse = sparse, dense
    out = [0] * (len(a) + len(b) - 1)
    for j, cb in sparse:
        for i, ca in dense:
            out[i + j] += ca * cb
    return _strip([c % p for c in out])


def _divmod(a: Sequence[int], b: Sequence[int], p: int) -> tuple[list, list]:
    if not b:
        raise DomainError("Polynomial division by zero.")
    db = len(b) - 1
    if len(a) <= db:
        return [], list(a)
    inv = pow(b[-1], -1, p)
    support = [(j, c) for j, c in enumerate(b[:-1]) if c]
    rem = list(a)
    quot = [0] * (len(a) - db)
    for i in range(len(a) - db - 1, -1, -1):
        c = rem[i + db] * inv % p
        quot[i] = c
        rem[i + db] = 0
        if c:
            for j, bj in support:
                rem[i + j] = (rem[i + j] - c * bj) % p
    return _strip(quot), _strip(rem[:db])


def _frobenius(a: Sequence[int], k: int, p: int) -> list:
    if k == 0 or len(a) <= 1:
        return list(a)
    step = p**k
    check_degree((len(a) - 1) * step, "Frobenius power")
    out = [0] * ((len(a) - 1) * step + 1)
    for i, c in enumerate(a):
        out[i * step] = c
    return out


def _binary_pow(a: Sequence[int], m: int, p: int) -> list:
    result = [1]
    base = list(a)
    while m:
        if m & 1:
            result = _mul(result, base, p)
        m >>= 1
        if m:
            base = _mul(base, base, p)
    return result


def _digit_pow(a: Sequence[int], m: int, p: int) -> list:
    # a^m = prod_i Frob^i(a^{d_i}) for m = sum_i d_i p^i
    small_powers = {}
    result = [1]
    level = 0
    while m:
        m, digit = divmod(m, p)
        if digit:
            if digit not in small_powers:
                small_powers[digit] = _binary_pow(a, digit, p)
            result = _mul(result, _frobenius(small_powers[digit], level, p), p)
        level += 1
    return result


@dataclass(frozen=True)
class FpPoly:
    """Polynomial over F_p, coefficients lowest degree first; the zero polynomial has no coefficients."""

    coeffs: tuple
    modulus: PrimeModulus

    def __post_init__(self):
        p = self.modulus.p
        object.__setattr__(self, "coeffs", tuple(_strip([int(c) % p for c in self.coeffs])))

    @classmethod
    def _raw(cls, coeffs: Sequence[int], modulus: PrimeModulus) -> "FpPoly":
        poly = object.__new__(cls)
        object.__setattr__(poly, "coeffs", tuple(coeffs))
        object.__setattr__(poly, "modulus", modulus)
        return poly

    @property
    def p(self) -> int:
        return self.modulus.p

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_one(self) -> bool:
        return self.coeffs == (1,)

    def is_constant(self) -> bool:
        return len(self.coeffs) <= 1

    def leading(self) -> int:
        return self.coeffs[-1] if self.coeffs else 0

    def _check(self, other: "FpPoly") -> None:
        if other.modulus != self.modulus:
            raise UsageError(f"Cannot combine polynomials over F_{self.p} and F_{other.p}.")

    def _wrap(self, coeffs: list) -> "FpPoly":
        return FpPoly._raw(coeffs, self.modulus)

    def __add__(self, other: "FpPoly") -> "FpPoly":
        self._check(other)
        return self._wrap(_add(self.coeffs, other.coeffs, self.p))

    def __sub__(self, other: "FpPoly") -> "FpPoly":
        self._check(other)
        return self._wrap(_sub(self.coeffs, other.coeffs, self.p))

    def __neg__(self) -> "FpPoly":
        return self._wrap(_scale(self.coeffs, -1, self.p))

    def __mul__(self, other):
        if isinstance(other, int):
            return self._wrap(_scale(self.coeffs, other, self.p))
        self._check(other)
        return self._wrap(_mul(self.coeffs, other.coeffs, self.p))

    __rmul__ = __mul__

    def __divmod__(self, other: "FpPoly") -> tuple["FpPoly", "FpPoly"]:
        self._check(other)
        quot, rem = _divmod(self.coeffs, other.coeffs, self.p)
        return self._wrap(quot), self._wrap(rem)

    def __floordiv__(self, other: "FpPoly") -> "FpPoly":
        return divmod(self, other)[0]

    def __mod__(self, other: "FpPoly") -> "FpPoly":
        return divmod(self, other)[1]

    def __pow__(self, m: int) -> "FpPoly":
        return poly_int_pow(self, m)

    def monic(self) -> "FpPoly":
        if not self.coeffs or self.coeffs[-1] == 1:
            return self
        return self._wrap(_scale(self.coeffs, pow(self.coeffs[-1], -1, self.p), self.p))

    def frobenius(self, k: int) -> "FpPoly":
        return self._wrap(_frobenius(self.coeffs, k, self.p))

    def __call__(self, x: int) -> int:
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * x + c) % self.p
        return acc

    def __repr__(self):
        return f"FpPoly({format_poly(self)} mod {self.p})"


def poly_divmod(f: FpPoly, g: FpPoly) -> tuple[FpPoly, FpPoly]:
    return divmod(f, g)


def poly_gcd(f: FpPoly, g: FpPoly) -> FpPoly:
    """Monic greatest common divisor; gcd(0, 0) is 0."""
    f._check(g)
    p = f.p
    a, b = list(f.coeffs), list(g.coeffs)
    while b:
        a, b = b, _divmod(a, b, p)[1]
    return f._wrap(a).monic()


def poly_int_pow(f: FpPoly, m: int, strategy: str = "frobenius") -> FpPoly:
    """
    Raise a polynomial to a non-negative power.

    :param strategy: "frobenius" uses the base-p digits of m, "binary" plain square-and-multiply
    """
    if m < 0:
        raise DomainError("Polynomials cannot be raised to negative powers.")
    if m == 0:
        return f._wrap([1])
    if f.is_zero():
        return f
    if f.is_constant():
        return f._wrap([pow(f.coeffs[0], m, f.p)])
    check_degree(f.degree * m, "polynomial power")
    if strategy == "binary" or m < f.p:
        return f._wrap(_binary_pow(f.coeffs, m, f.p))
    if strategy != "frobenius":
        raise UsageError(f"Unknown power strategy '{strategy}'.")
    return f._wrap(_digit_pow(f.coeffs, m, f.p))


@dataclass(frozen=True)
class RatFunc:
    """Element of F_p(t) as a reduced fraction with monic denominator."""

    num: FpPoly
    den: FpPoly

    def __post_init__(self):
        num, den = _normalize(self.num, self.den)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def _raw(cls, num: FpPoly, den: FpPoly) -> "RatFunc":
        value = object.__new__(cls)
        object.__setattr__(value, "num", num)
        object.__setattr__(value, "den", den)
        return value

    @property
    def modulus(self) -> PrimeModulus:
        return self.num.modulus

    @property
    def p(self) -> int:
        return self.num.modulus.p

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_one(self) -> bool:
        return self.num.is_one() and self.den.is_one()

    def is_constant(self) -> bool:
        return self.den.is_one() and self.num.is_constant()

    def _coerce(self, other) -> "RatFunc":
        if isinstance(other, RatFunc):
            if other.modulus != self.modulus:
                raise UsageError(f"Cannot combine rational functions over F_{self.p} and F_{other.p}.")
            return other
        if isinstance(other, int):
            return self.modulus.constant(other)
        if isinstance(other, FpElem):
            return self.modulus.constant(other.value)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.den == other.den:
            if self.den.is_one():
                return RatFunc._raw(self.num + other.num, self.den)
            return ratfunc_normalize(self.num + other.num, self.den)
        # a polynomial plus a reduced fraction stays reduced
        if self.den.is_one():
            return RatFunc._raw(self.num * other.den + other.num, other.den)
        if other.den.is_one():
            return RatFunc._raw(other.num * self.den + self.num, self.den)
        return ratfunc_normalize(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self) -> "RatFunc":
        return RatFunc._raw(-self.num, self.den)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.is_zero() or other.is_zero():
            return self.modulus.constant(0)
        if self.den.is_one() and other.den.is_one():
            return RatFunc._raw(self.num * other.num, self.den)
        left = poly_gcd(self.num, other.den)
        right = poly_gcd(other.num, self.den)
        num = (self.num // left) * (other.num // right)
        den = (self.den // right) * (other.den // left)
        return RatFunc._raw(num, den)

    __rmul__ = __mul__

    def inverse(self) -> "RatFunc":
        if self.is_zero():
            raise DomainError("Zero has no inverse in F_p(t).")
        scale = pow(self.num.leading(), -1, self.p)
        return RatFunc._raw(self.den * scale, self.num * scale)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other * self.inverse()

    def __pow__(self, m: int) -> "RatFunc":
        return ratfunc_int_pow(self, m)

    def frobenius(self, k: int) -> "RatFunc":
        return frobenius_power(self, k)

    def __str__(self):
        return format_ratfunc(self)

    def __repr__(self):
        return f"RatFunc({format_ratfunc(self)} mod {self.p})"


def _normalize(num: FpPoly, den: FpPoly) -> tuple[FpPoly, FpPoly]:
    num._check(den)
    if den.is_zero():
        raise DomainError("Rational function with zero denominator.")
    if num.is_zero():
        return num, den._wrap([1])
    if not den.is_one():
        common = poly_gcd(num, den)
        if not common.is_one():
            num, den = num // common, den // common
    lead = den.leading()
    if lead != 1:
        scale = pow(lead, -1, den.p)
        num, den = num * scale, den * scale
    return num, den


def ratfunc_normalize(num: FpPoly, den: FpPoly) -> RatFunc:
    """Canonical reduced fraction num/den with a monic denominator."""
    return RatFunc._raw(*_normalize(num, den))


def frobenius_power(x: RatFunc, k: int) -> RatFunc:
    """
    x^(p^k), computed by re-indexing coefficients since f(t)^p = f(t^p) over F_p.

    :param k: Number of Frobenius steps, non-negative
    """
    if k < 0:
        raise DomainError(f"Frobenius exponent must be non-negative, got {k}.")
    if k == 0:
        return x
    return RatFunc._raw(x.num.frobenius(k), x.den.frobenius(k))


def ratfunc_int_pow(x: RatFunc, m: int, strategy: str = "frobenius") -> RatFunc:
    """
    x^m for any integer m; negative powers go through the inverse.

    Powers of a reduced fraction stay reduced and a power of a monic denominator stays monic,
    so no gcd is needed.
    """
    if m == 0:
        return x.modulus.one()
    if m < 0:
        x, m = x.inverse(), -m
    if m == 1:
        return x
    return RatFunc._raw(poly_int_pow(x.num, m, strategy), poly_int_pow(x.den, m, strategy))


def format_poly(f: FpPoly) -> str:
    if f.is_zero():
        return "0"
    return ",".join(str(c) for c in f.coeffs)


def parse_poly(text: str, modulus: PrimeModulus) -> FpPoly:
    """Parse comma-separated base-10 coefficients, lowest degree first."""
    fields = [field.strip() for field in text.split(",")]
    if not fields or any(field == "" for field in fields):
        raise ParseError(f"Malformed polynomial '{text}'.")
    try:
        coeffs = [int(field) for field in fields]
    except ValueError as exc:
        raise ParseError(f"Malformed polynomial '{text}': {exc}")
    return FpPoly(tuple(coeffs), modulus)


def format_ratfunc(x: RatFunc) -> str:
    return f"{format_poly(x.num)}/{format_poly(x.den)}"


def parse_ratfunc(text: str, modulus: PrimeModulus) -> RatFunc:
    """Parse `num/den`; a missing denominator means 1."""
    parts = text.strip().split("/")
    if len(parts) > 2:
        raise ParseError(f"Malformed rational function '{text}'.")
    num = parse_poly(parts[0], modulus)
    den = parse_poly(parts[1], modulus) if len(parts) == 2 else modulus.poly([1])
    try:
        return ratfunc_normalize(num, den)
    except DomainError as exc:
        raise ParseError(f"Malformed rational function '{text}': {exc}")

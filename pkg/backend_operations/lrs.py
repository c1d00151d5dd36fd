import logging
from dataclasses import dataclass
from math import lcm
from typing import Optional, Sequence

from sympy import Matrix, Poly, cyclotomic_poly, divisors, symbols

from backend_operations.errors import DomainError, ParseError, UnsupportedError
from backend_operations.exact_arith import PrimeModulus

DEFAULT_CYCLOTOMIC_BOUND = 64

# below this index terms are produced by stepping the recurrence
_DIRECT_EVAL_LIMIT = 256

_X = symbols("x")

IntPoly = tuple  # integer coefficients, lowest degree first


@dataclass(frozen=True)
class Lrs:
    """
    Integer linear recurrence u_{n+d} + c_{d-1} u_{n+d-1} + ... + c_0 u_n = 0.

    rec_coeffs holds (c_0, ..., c_{d-1}) and initial holds (u_0, ..., u_{d-1}).
    """

    rec_coeffs: tuple
    initial: tuple

    def __post_init__(self):
        object.__setattr__(self, "rec_coeffs", tuple(int(c) for c in self.rec_coeffs))
        object.__setattr__(self, "initial", tuple(int(u) for u in self.initial))
        if not self.rec_coeffs:
            raise DomainError("A recurrence needs order at least 1.")
        if len(self.rec_coeffs) != len(self.initial):
            raise DomainError(
                f"Recurrence of order {len(self.rec_coeffs)} needs {len(self.rec_coeffs)} initial terms, "
                f"got {len(self.initial)}."
            )

    @property
    def order(self) -> int:
        return len(self.rec_coeffs)

    def char_poly(self) -> IntPoly:
        return self.rec_coeffs + (1,)

    def __getitem__(self, n: int) -> int:
        return lrs_eval(self, n)

    def __repr__(self):
        return f"Lrs({format_lrs(self)})"


@dataclass(frozen=True)
class CharRoots:
    integer_roots: tuple  # (root, multiplicity) pairs, ascending by root
    unresolved_factor: IntPoly

    def reconstruct(self) -> IntPoly:
        """Multiply the factorization back out."""
        poly = list(self.unresolved_factor)
        for root, mult in self.integer_roots:
            for _ in range(mult):
                poly = int_poly_mul(poly, [-root, 1])
        return tuple(poly)

    def is_fully_resolved(self) -> bool:
        return len(self.unresolved_factor) == 1


@dataclass(frozen=True)
class RootVerdict:
    root: Optional[int]
    status: str  # independent | dependent | unknown
    exponent: Optional[int] = None
    sign: Optional[int] = None


def int_poly_mul(a: Sequence[int], b: Sequence[int]) -> list:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _synthetic_divide(coeffs: Sequence[int], root: int) -> tuple[list, int]:
    """Divide by (x - root); returns quotient and remainder."""
    n = len(coeffs) - 1
    quot = [0] * n
    acc = coeffs[n]
    for i in range(n - 1, -1, -1):
        quot[i] = acc
        acc = coeffs[i] + root * acc
    return quot, acc


def companion_matrix(s: Lrs) -> list:
    d = s.order
    rows = [[1 if j == i + 1 else 0 for j in range(d)] for i in range(d - 1)]
    rows.append([-c for c in s.rec_coeffs])
    return rows


def mat_mul(a: Sequence[Sequence[int]], b: Sequence[Sequence[int]]) -> list:
    cols = list(zip(*b))
    return [[sum(x * y for x, y in zip(row, col)) for col in cols] for row in a]


def mat_pow(a: Sequence[Sequence[int]], n: int) -> list:
    """Binary powering of a square integer matrix."""
    size = len(a)
    result = [[int(i == j) for j in range(size)] for i in range(size)]
    base = [list(row) for row in a]
    while n:
        if n & 1:
            result = mat_mul(result, base)
        n >>= 1
        if n:
            base = mat_mul(base, base)
    return result


def char_poly_of(matrix: Sequence[Sequence[int]]) -> IntPoly:
    """Characteristic polynomial of an integer matrix, lowest degree first."""
    coeffs = Matrix(matrix).charpoly(_X).all_coeffs()
    return tuple(int(c) for c in reversed(coeffs))


def lrs_terms(s: Lrs, count: int) -> list:
    """The first `count` terms, by stepping the recurrence."""
    terms = list(s.initial[:count])
    d = s.order
    negated = [-c for c in s.rec_coeffs]
    while len(terms) < count:
        window = terms[-d:]
        terms.append(sum(c * u for c, u in zip(negated, window)))
    return terms


def lrs_eval(s: Lrs, n: int) -> int:
    """
    Exact u_n.

    :param n: Non-negative index
    """
    if n < 0:
        raise DomainError(f"Sequence index must be non-negative, got {n}.")
    if n < s.order:
        return s.initial[n]
    if n < _DIRECT_EVAL_LIMIT:
        return lrs_terms(s, n + 1)[n]
    power = mat_pow(companion_matrix(s), n)
    return sum(c * u for c, u in zip(power[0], s.initial))


def lrs_subsequence(s: Lrs, a: int, b: int) -> Lrs:
    """
    The sequence v_k = u_{ak+b}, whose recurrence is the characteristic polynomial of C^a.
    """
    if a < 1 or b < 0:
        raise DomainError(f"Subsequence needs a >= 1 and b >= 0, got a={a}, b={b}.")
    d = s.order
    if a == 1:
        return Lrs(s.rec_coeffs, lrs_terms(s, b + d)[b:])
    rec = char_poly_of(mat_pow(companion_matrix(s), a))[:-1]
    last = (d - 1) * a + b
    if last < _DIRECT_EVAL_LIMIT * 4:
        terms = lrs_terms(s, last + 1)
        initial = [terms[a * k + b] for k in range(d)]
    else:
        initial = [lrs_eval(s, a * k + b) for k in range(d)]
    return Lrs(rec, initial)


def lrs_zero_progression_certify(s: Lrs, a: int, b: int) -> bool:
    """True iff u_{ak+b} = 0 for every k; d' zero terms of an order-d' recurrence force all later ones."""
    return all(v == 0 for v in lrs_subsequence(s, a, b).initial)


def lrs_is_constant(s: Lrs) -> bool:
    return len(set(lrs_terms(s, s.order + 1))) == 1


def integer_roots(poly: Sequence[int]) -> tuple[list, IntPoly]:
    """
    Integer roots with multiplicity of a monic integer polynomial (lowest degree first).

    :return: ascending (root, multiplicity) pairs and the factor left after dividing them out
    """
    coeffs = list(poly)
    roots = []
    zeros = 0
    while len(coeffs) > 1 and coeffs[0] == 0:
        coeffs.pop(0)
        zeros += 1
    if zeros:
        roots.append((0, zeros))
    if len(coeffs) > 1:
        for divisor in divisors(abs(coeffs[0])):
            for root in (divisor, -divisor):
                mult = 0
                while len(coeffs) > 1:
                    quot, rem = _synthetic_divide(coeffs, root)
                    if rem:
                        break
                    coeffs = quot
                    mult += 1
                if mult:
                    roots.append((root, mult))
            if len(coeffs) == 1:
                break
    roots.sort()
    return roots, tuple(coeffs)


def lrs_char_roots(s: Lrs) -> CharRoots:
    roots, rest = integer_roots(s.char_poly())
    return CharRoots(tuple(roots), rest)


def _cyclotomic_orders(factor: IntPoly, bound: int) -> list:
    """Orders M of the cyclotomic factors of `factor`; raises when something else remains."""
    poly = Poly(list(reversed(factor)), _X)
    orders = []
    for order in range(1, bound + 1):
        cyclo = cyclotomic_poly(order, _X, polys=True)
        while poly.degree() >= cyclo.degree():
            quot, rem = poly.div(cyclo)
            if not rem.is_zero:
                break
            poly = quot
            orders.append(order)
        if poly.degree() == 0:
            return orders
    raise UnsupportedError(
        f"Characteristic factor {poly.as_expr()} is not a product of cyclotomic polynomials of order <= {bound}."
    )


def lrs_nondegenerate_split(s: Lrs, cyclotomic_bound: int = DEFAULT_CYCLOTOMIC_BOUND) -> list:
    """
    Split N_0 into progressions {Mk + l} on which u is non-degenerate.

    :return: list of (M, l, subsequence) for l = 0 .. M-1
    """
    roots = lrs_char_roots(s)
    orders = []
    if not roots.is_fully_resolved():
        orders.extend(_cyclotomic_orders(roots.unresolved_factor, cyclotomic_bound))
    values = {root for root, _ in roots.integer_roots}
    # -1 as a root, or two roots differing only in sign, need even and odd indices apart
    if -1 in values or any(root != 0 and -root in values for root in values):
        orders.append(2)
    modulus = lcm(*orders) if orders else 1
    logging.debug(f"Non-degenerate split of {format_lrs(s)} uses modulus {modulus}.")
    return [(modulus, offset, lrs_subsequence(s, modulus, offset)) for offset in range(modulus)]


def lrs_root_p_dependence(roots: CharRoots, p: PrimeModulus) -> tuple:
    """Label each integer root as independent of p or dependent (|r| = p^s); unresolved parts are unknown."""
    verdicts = []
    for root, _ in roots.integer_roots:
        if root == 0:
            verdicts.append(RootVerdict(root, "independent"))
            continue
        rest, exponent = abs(root), 0
        while rest % p.p == 0:
            rest //= p.p
            exponent += 1
        if rest == 1:
            verdicts.append(RootVerdict(root, "dependent", exponent, 1 if root > 0 else -1))
        else:
            verdicts.append(RootVerdict(root, "independent"))
    if not roots.is_fully_resolved():
        verdicts.append(RootVerdict(None, "unknown"))
    return tuple(verdicts)


def format_lrs(s: Lrs) -> str:
    return f"{s.order};{','.join(map(str, s.rec_coeffs))};{','.join(map(str, s.initial))}"


def parse_lrs(text: str) -> Lrs:
    """Parse `order;c_0,...;u_0,...`."""
    parts = text.strip().split(";")
    if len(parts) != 3:
        raise ParseError(f"Malformed recurrence '{text}': expected order;coefficients;initial terms.")
    try:
        order = int(parts[0])
        rec = [int(field) for field in parts[1].split(",")]
        initial = [int(field) for field in parts[2].split(",")]
    except ValueError as exc:
        raise ParseError(f"Malformed recurrence '{text}': {exc}")
    if order != len(rec):
        raise ParseError(f"Recurrence '{text}' declares order {order} but lists {len(rec)} coefficients.")
    try:
        return Lrs(rec, initial)
    except DomainError as exc:
        raise ParseError(f"Malformed recurrence '{text}': {exc}")

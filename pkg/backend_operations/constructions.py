import random
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

from sympy import GF, Matrix, Poly, expand, symbols
from sympy.polys.matrices import DomainMatrix

from backend_operations.errors import ConstructionError, DomainError
from backend_operations.exact_arith import PrimeModulus, RatFunc
from backend_operations.lrs import Lrs, companion_matrix
from backend_operations.torus import (
    CoprimeBasis,
    FactoredPoint,
    LaurentPoly,
    TorusInstance,
    TorusPoint,
    TorusSelfMap,
    Variety,
    return_set,
)

SELF_CHECK_SAMPLES = 50
# zero-row conventions, tried in order until the self-check passes
ZERO_ROW_CONVENTIONS = ("wrap", "clipped")


def vandermonde_inverse(p: PrimeModulus) -> tuple:
    """
    Inverse over F_p of V[a][j] = a^j (a in F_p^x, 0 <= j < p - 1).

    Row k of the result satisfies sum_a A[k][a] a^j = [j == k mod p - 1].
    """
    if p.p < 3:
        raise DomainError(f"The Vandermonde construction needs p >= 3, got {p.p}.")
    size = p.p - 1
    vandermonde = Matrix([[pow(a, j, p.p) for j in range(size)] for a in range(1, p.p)])
    inverse = vandermonde.inv_mod(p.p)
    return tuple(tuple(int(inverse[k, a]) % p.p for a in range(size)) for k in range(size))


def _weighted_monomials(weights: Sequence[int], total: int):
    """Exponent vectors e with sum e_k * weights[k] == total."""
    if not weights:
        if total == 0:
            yield ()
        return
    head, rest = weights[0], weights[1:]
    for e in range(total // head + 1):
        for tail in _weighted_monomials(rest, total - e * head):
            yield (e,) + tail


class _Implicitizer:
    """
    Relations over F_p among the coefficients z_0 .. z_{l-1} of prod_j (a + y_j)^(c_j).

    z_k has weight l - k; relations of a given weight span the kernel of the
    monomial-substitution matrix.
    """

    def __init__(self, p: int, c: Sequence[int]):
        self.p = p
        self.level = sum(c)
        self.ys = symbols(f"y1:{len(c) + 1}")
        a = symbols("a")
        product_expr = 1
        for y, multiplicity in zip(self.ys, c):
            product_expr *= (a + y) ** multiplicity
        coeffs = Poly(expand(product_expr), a).all_coeffs()[::-1]
        self.coefficients = [Poly(coeffs[k], *self.ys, modulus=p) for k in range(self.level)]
        self.weights = [self.level - k for k in range(self.level)]

    def relations(self, weight: int) -> list:
        """Basis of the weight-`weight` relations as (exponent vector, coefficient) lists."""
        monomials = list(_weighted_monomials(self.weights, weight))
        if not monomials:
            return []
        columns = []
        for exps in monomials:
            value = Poly(1, *self.ys, modulus=self.p)
            for k, e in enumerate(exps):
                if e:
                    value = value * self.coefficients[k] ** e
            columns.append({m: int(v) % self.p for m, v in value.as_dict().items()})
        keys = sorted({m for column in columns for m in column})
        field = GF(self.p)
        rows = [[field(column.get(key, 0)) for column in columns] for key in keys]
        matrix = DomainMatrix(rows, (len(keys), len(monomials)), field)
        kernel = matrix.nullspace()
        found = []
        for vector in kernel.to_list():
            coefficients = [int(field.to_sympy(v)) % self.p for v in vector]
            found.append([(exps, coeff) for exps, coeff in zip(monomials, coefficients) if coeff])
        return found


def _is_coarsening(pattern: Sequence[int], parts: Sequence[int]) -> bool:
    """True if parts can be grouped into blocks whose sums are exactly pattern."""
    if sum(pattern) != sum(parts):
        return False
    parts = sorted(parts, reverse=True)

    @lru_cache(maxsize=None)
    def fill(index: int, remaining: tuple) -> bool:
        if index == len(parts):
            return all(r == 0 for r in remaining)
        tried = set()
        for i, room in enumerate(remaining):
            if room >= parts[index] and room not in tried:
                tried.add(room)
                if fill(index + 1, remaining[:i] + (room - parts[index],) + remaining[i + 1 :]):
                    return True
        return False

    return fill(0, tuple(sorted(pattern)))


@dataclass
class PsetVariety:
    """
    X in G_m^(p-1) with E = {m : [m]P in X} = {sum_j c_j p^(n_j)}, P = (t+1, ..., t+p-1).
    """

    p: PrimeModulus
    c: tuple
    variety: Variety
    base_point: TorusPoint
    a_inv: tuple
    zero_rows: tuple
    convention: str

    @property
    def level(self) -> int:
        return sum(self.c)

    def multiple_in_variety(self, m: int) -> bool:
        """Exact test of [m]P in X for any integer m."""
        return self.variety.contains(self.base_point**m)

    def digit_member(self, m: int) -> bool:
        """
        Decide [m]P in X from the base-p digits of m.

        (t+a)^m = prod_i (t^(p^i) + a)^(m_i), so the form z_k collects the sub-digit choices
        whose dropped total is k mod p-1, each contributing a distinct monomial.
        """
        if m < 0:
            return False
        p = self.p.p
        digits = []
        rest = m
        while rest:
            rest, digit = divmod(rest, p)
            digits.append(digit)
        counts = [0] * (p - 1)
        counts[0] = 1
        for digit in digits:
            if digit == 0:
                continue
            following = [0] * (p - 1)
            for residue, count in enumerate(counts):
                if count:
                    for e in range(digit + 1):
                        slot = (residue + e) % (p - 1)
                        following[slot] = min(2, following[slot] + count)
            counts = following
        if sum(digits) % (p - 1) != self.level % (p - 1) or counts[self.level] != 1:
            return False
        if any(counts[k] for k in self.zero_rows):
            return False
        return _is_coarsening([d for d in digits if d], self.c)

    def pset_terms(self) -> tuple:
        return tuple((cj, 1) for cj in self.c)


def _forms(a_inv: Sequence[Sequence[int]], modulus: PrimeModulus) -> list:
    size = len(a_inv)
    forms = []
    for row in a_inv:
        terms = [(tuple(int(i == a) for i in range(size)), modulus.constant(entry)) for a, entry in enumerate(row)]
        forms.append(LaurentPoly(size, terms))
    return forms


def _zero_rows(convention: str, level: int, p: int) -> tuple:
    rows = list(range(level + 1, p - 1))
    if convention == "wrap":
        rows.append(0)
    return tuple(sorted(set(rows)))


def _linear_equations(level: int, zero_rows: Sequence[int], modulus: PrimeModulus) -> list:
    size = modulus.p - 1
    one = modulus.one()
    equations = [LaurentPoly.variable(size, level, modulus) - LaurentPoly.constant(size, one)]
    equations.extend(LaurentPoly.variable(size, k, modulus) for k in zero_rows)
    return equations


def _relation_poly(relation: list, size: int, modulus: PrimeModulus) -> LaurentPoly:
    terms = []
    for exps, coeff in relation:
        full = tuple(exps) + (0,) * (size - len(exps))
        terms.append((full, modulus.constant(coeff)))
    return LaurentPoly(size, terms)


def _random_poly(rng: random.Random, modulus: PrimeModulus, max_degree: int = 3) -> RatFunc:
    degree = rng.randint(1, max_degree)
    coeffs = [rng.randrange(modulus.p) for _ in range(degree)] + [rng.randrange(1, modulus.p)]
    return modulus.ratfunc(coeffs)


def _pattern_point(rng: random.Random, modulus: PrimeModulus, pattern: Sequence[int]) -> TorusPoint:
    """x_a = prod_j (y_j + a)^(pattern_j) for random non-constant y_j."""
    ys = [_random_poly(rng, modulus) for _ in pattern]
    coords = []
    for a in range(1, modulus.p):
        value = modulus.one()
        for y, multiplicity in zip(ys, pattern):
            value = value * (y + a) ** multiplicity
        coords.append(value)
    return TorusPoint(tuple(coords))


def _self_check_points(modulus: PrimeModulus, c: Sequence[int], seed: int) -> tuple[list, list]:
    rng = random.Random(seed)
    level = sum(c)
    members = [_pattern_point(rng, modulus, c) for _ in range(SELF_CHECK_SAMPLES)]
    wrong = []
    if any(cj != 1 for cj in c):
        wrong.append((1,) * level)
    if level + 1 < modulus.p - 1:
        wrong.append(tuple(c) + (1,))
    if level > 1:
        wrong.append((1,) * (level - 1))
    others = []
    for i in range(SELF_CHECK_SAMPLES):
        if wrong and i % 2:
            others.append(_pattern_point(rng, modulus, wrong[i // 2 % len(wrong)]))
        else:
            others.append(TorusPoint(tuple(_random_poly(rng, modulus) for _ in range(modulus.p - 1))))
    return members, others


def _passes(variety: Variety, members: list, others: list) -> bool:
    return all(variety.contains(x) for x in members) and not any(variety.contains(x) for x in others)


def build_pset_variety(p: PrimeModulus, c: Sequence[int], seed: int = 0) -> PsetVariety:
    """
    The variety X with [m]P in X exactly when m = sum_j c_j p^(n_j).

    Linear rows come from the inverse Vandermonde matrix; for repeated multiplicities the
    relations among the remaining coefficients are found by implicitization. The zero-row
    range and the relation weight are fixed by sampling against the parametrization.
    """
    c = tuple(int(cj) for cj in c)
    if not c or any(cj < 1 for cj in c):
        raise DomainError(f"Multiplicities must be positive integers, got {c}.")
    level = sum(c)
    if level >= p.p - 1:
        raise DomainError(f"Need sum(c) < p - 1, got sum {level} with p = {p.p}.")
    a_inv = vandermonde_inverse(p)
    size = p.p - 1
    forms = _forms(a_inv, p)
    base_point = TorusPoint(tuple(p.ratfunc([a, 1]) for a in range(1, p.p)))
    members, others = _self_check_points(p, c, seed)
    implicitizer = _Implicitizer(p.p, c) if any(cj != 1 for cj in c) else None
    for convention in ZERO_ROW_CONVENTIONS:
        zero_rows = _zero_rows(convention, level, p.p)
        equations = _linear_equations(level, zero_rows, p)
        variety = Variety(size, equations, forms)
        if not all(variety.contains(x) for x in members):
            logging.info(f"Zero-row convention '{convention}' rejects parametrized points; trying the next one.")
            continue
        weight = 0
        while not _passes(variety, members, others):
            weight += 1
            if implicitizer is None or weight > level * (level - 1):
                break
            for relation in implicitizer.relations(weight):
                equations.append(_relation_poly(relation, size, p))
            variety = Variety(size, equations, forms)
        else:
            logging.info(f"p-set variety for c={c} over F_{p.p}: {len(equations)} equations, convention '{convention}'.")
            return PsetVariety(p, c, variety, base_point, a_inv, zero_rows, convention)
    raise ConstructionError(f"No equation set for c={c} over F_{p.p} passed the sampling self-check.")


def exponent_set(pv: PsetVariety, bound: int) -> list:
    """{m in [0, bound] : [m]P in X}, by iterating the translation by P and evaluating exactly."""
    if bound < 0:
        raise DomainError(f"bound must be non-negative, got {bound}.")
    size = pv.p.p - 1
    identity = tuple(tuple(int(i == j) for j in range(size)) for i in range(size))
    selfmap = TorusSelfMap(identity, pv.base_point)
    return return_set(selfmap, TorusPoint.one(pv.p, size), pv.variety, bound)


@dataclass(frozen=True)
class LrsEncoding:
    """Phi = companion action on exponents, Q_i = P^(u_(i-1)), pi = first coordinate."""

    dimension: int
    phi_matrix: tuple
    pi_exponents: tuple
    Q: TorusPoint
    base_point: RatFunc

    @property
    def selfmap(self) -> TorusSelfMap:
        return TorusSelfMap(self.phi_matrix, TorusPoint.one(self.base_point.modulus, self.dimension))

    def project(self, x: TorusPoint) -> RatFunc:
        value = self.base_point.modulus.one()
        for coord, e in zip(x.coords, self.pi_exponents):
            if e:
                value = value * coord**e
        return value


def encode_lrs(u: Lrs, base_point: RatFunc) -> LrsEncoding:
    if base_point.is_zero():
        raise DomainError("The base point of an encoding must be non-zero.")
    matrix = tuple(tuple(row) for row in companion_matrix(u))
    Q = TorusPoint(tuple(base_point**value for value in u.initial))
    pi = (1,) + (0,) * (u.order - 1)
    return LrsEncoding(u.order, matrix, pi, Q, base_point)


def encoding_exponents(encoding: LrsEncoding, n_max: int) -> list:
    """Exponent e_n with pi(Phi^n(Q)) = P^(e_n) for n <= n_max, tracked on a coprime basis of P."""
    modulus = encoding.base_point.modulus
    basis = CoprimeBasis(modulus, [encoding.base_point])
    point = basis.factor_point(encoding.Q)
    reference = basis.factor(encoding.base_point)
    exponents = []
    for n in range(n_max + 1):
        projected = FactoredPoint.one(1, len(basis), modulus.p)
        for e, unit, row in zip(encoding.pi_exponents, point.units, point.rows):
            if e:
                projected = projected * FactoredPoint((unit,), (row,), modulus.p).power(e)
        exponents.append(_exponent_of(projected, reference, modulus.p))
        point = point.endo_apply(encoding.phi_matrix)
    return exponents


def _exponent_of(point: FactoredPoint, reference: tuple, p: int) -> Optional[int]:
    """The m with point = reference^m, or None."""
    unit, row = reference
    target = point.rows[0]
    pivot = next((i for i, e in enumerate(row) if e), None)
    if pivot is None:
        return 0 if all(e == 0 for e in target) and point.units[0] == 1 else None
    if target[pivot] % row[pivot]:
        return None
    m = target[pivot] // row[pivot]
    if tuple(m * e for e in row) != target or pow(unit, m % (p - 1), p) != point.units[0]:
        return None
    return m


@dataclass
class DmlInstance:
    """
    Orbit instance whose return set is {n : u_n in E}.

    Coordinates are block-major: block a (for P_a = t + a) holds the encoding of u.
    """

    u: Lrs
    pset_variety: PsetVariety
    selfmap: TorusSelfMap
    start: TorusPoint
    variety: Variety

    @property
    def p(self) -> PrimeModulus:
        return self.pset_variety.p

    def return_set(self, n_max: int) -> list:
        return return_set(self.selfmap, self.start, self.variety, n_max)

    def lifted_return_set(self, n_max: int) -> list:
        """Return set via exponent vectors and the digit decision; never materializes coordinates."""
        order = self.u.order
        blocks = self.p.p - 1
        targets = [self.p.poly([a, 1]) for a in range(1, self.p.p)]

        def membership(point: FactoredPoint, basis: CoprimeBasis) -> bool:
            exponents = set()
            for block, target in enumerate(targets):
                index = next((i for i, b in enumerate(basis.polys) if b == target), None)
                coordinate = block * order
                if point.units[coordinate] != 1:
                    return False
                row = point.rows[coordinate]
                if any(e for i, e in enumerate(row) if i != index):
                    return False
                exponents.add(row[index] if index is not None else 0)
            if len(exponents) != 1:
                return False
            return self.pset_variety.digit_member(exponents.pop())

        hits = return_set(self.selfmap, self.start, self.variety, n_max, membership=membership)
        logging.debug(f"Lifted return set over {blocks} blocks: {len(hits)} hits up to {n_max}.")
        return hits

    def to_torus_instance(self, n_max: int) -> TorusInstance:
        return TorusInstance(self.selfmap, self.start, self.variety.expanded(), n_max, declared_dim=None)


def dml_instance(u: Lrs, p: PrimeModulus, c: Sequence[int]) -> DmlInstance:
    """
    Block-diagonal companion action over the p - 1 coordinates of P, pulled back along
    the first coordinate of each block.
    """
    pv = build_pset_variety(p, c)
    order = u.order
    blocks = p.p - 1
    size = blocks * order
    companion = companion_matrix(u)
    matrix = [[0] * size for _ in range(size)]
    for block in range(blocks):
        for i in range(order):
            for j in range(order):
                matrix[block * order + i][block * order + j] = companion[i][j]
    coords = []
    for coordinate in pv.base_point.coords:
        coords.extend(coordinate**value for value in u.initial)
    start = TorusPoint(tuple(coords))
    monomials = [tuple(int(j == block * order) for j in range(size)) for block in range(blocks)]
    variety = pv.variety.pullback(monomials)
    selfmap = TorusSelfMap(matrix, TorusPoint.one(p, size))
    logging.info(f"Generated an instance in dimension {size} for u={u} and c={pv.c} over F_{p.p}.")
    return DmlInstance(u, pv, selfmap, start, variety)
import logging
from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterable, Optional, Sequence

from sympy import Matrix

from backend_operations.errors import DomainError, InvariantError, ParseError, UsageError, ValidationError
from backend_operations.exact_arith import (
    FpPoly,
    PrimeModulus,
    RatFunc,
    check_degree,
    format_ratfunc,
    parse_ratfunc,
    poly_gcd,
    poly_int_pow,
    ratfunc_int_pow,
)
from backend_operations.lrs import Lrs, int_poly_mul, char_poly_of, integer_roots, lrs_terms, mat_mul, mat_pow
from backend_operations.psets import DEFAULT_PERIOD_CAP, ReturnSetDesc, desc_verify, fit_description

DEFAULT_R_MAX = 12
DEFAULT_S_MAX = 24


def _check_square(matrix: Sequence[Sequence[int]]) -> int:
    size = len(matrix)
    if size == 0 or any(len(row) != size for row in matrix):
        raise UsageError(f"Expected a non-empty square matrix, got {len(matrix)} rows.")
    return size


@dataclass(frozen=True)
class TorusPoint:
    coords: tuple

    def __post_init__(self):
        coords = tuple(self.coords)
        if not coords:
            raise DomainError("A torus point needs at least one coordinate.")
        if any(x.is_zero() for x in coords):
            raise DomainError("Torus points cannot have a zero coordinate.")
        if len({x.p for x in coords}) != 1:
            raise UsageError("Torus point coordinates live over different primes.")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def one(cls, modulus: PrimeModulus, dimension: int) -> "TorusPoint":
        return cls(tuple(modulus.one() for _ in range(dimension)))

    @property
    def dimension(self) -> int:
        return len(self.coords)

    @property
    def modulus(self) -> PrimeModulus:
        return self.coords[0].modulus

    def is_one(self) -> bool:
        return all(x.is_one() for x in self.coords)

    def __mul__(self, other: "TorusPoint") -> "TorusPoint":
        if other.dimension != self.dimension:
            raise UsageError(f"Cannot multiply points of dimension {self.dimension} and {other.dimension}.")
        return TorusPoint(tuple(x * y for x, y in zip(self.coords, other.coords)))

    def __pow__(self, m: int) -> "TorusPoint":
        return TorusPoint(tuple(ratfunc_int_pow(x, m) for x in self.coords))

    def __str__(self):
        return "(" + ", ".join(str(x) for x in self.coords) + ")"


@dataclass(frozen=True)
class TorusSelfMap:
    """The map x -> y * [A]x with ([A]x)_i = prod_j x_j^(A_ij)."""

    matrix: tuple
    translation: TorusPoint

    def __post_init__(self):
        matrix = tuple(tuple(int(v) for v in row) for row in self.matrix)
        size = _check_square(matrix)
        if self.translation.dimension != size:
            raise UsageError(f"Translation has dimension {self.translation.dimension}, matrix has {size}.")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dimension(self) -> int:
        return len(self.matrix)

    @property
    def modulus(self) -> PrimeModulus:
        return self.translation.modulus

    def __call__(self, x: TorusPoint) -> TorusPoint:
        return self.translation * endo_apply(self.matrix, x)


def endo_apply(matrix: Sequence[Sequence[int]], x: TorusPoint) -> TorusPoint:
    """([A]x)_i = prod_j x_j^(A_ij); negative entries go through inverses."""
    if _check_square(matrix) != x.dimension:
        raise UsageError(f"Matrix of size {len(matrix)} cannot act on a point of dimension {x.dimension}.")
    coords = []
    for row in matrix:
        value = x.modulus.one()
        for entry, coord in zip(row, x.coords):
            if entry:
                value = value * ratfunc_int_pow(coord, entry)
        coords.append(value)
    return TorusPoint(tuple(coords))


class CoprimeBasis:
    """
    Pairwise coprime monic polynomials over which a set of rational functions factors.

    Built by gcd refinement only: two overlapping members g, f are replaced by
    h = gcd(g, f), g/h and f/h until no two members share a factor.
    """

    def __init__(self, modulus: PrimeModulus, elements: Iterable[RatFunc] = ()):
        self.modulus = modulus
        self.polys = []
        for x in elements:
            self.add(x)

    def __len__(self):
        return len(self.polys)

    def _insert(self, f: FpPoly) -> None:
        pending = [f]
        while pending:
            f = pending.pop()
            if f.is_constant():
                continue
            f = f.monic()
            for i, g in enumerate(self.polys):
                common = poly_gcd(f, g)
                if common.is_constant():
                    continue
                del self.polys[i]
                pending.extend([common, g // common, f // common])
                break
            else:
                self.polys.append(f)

    def add(self, x: RatFunc) -> None:
        if x.modulus != self.modulus:
            raise UsageError(f"Cannot add an element over F_{x.p} to a basis over F_{self.modulus.p}.")
        self._insert(x.num)
        self._insert(x.den)

    def _strip(self, f: FpPoly) -> tuple[FpPoly, list]:
        exps = []
        for b in self.polys:
            count = 0
            while f.degree >= b.degree:
                quotient, remainder = divmod(f, b)
                if not remainder.is_zero():
                    break
                f = quotient
                count += 1
            exps.append(count)
        return f, exps

    def factor(self, x: RatFunc) -> tuple[int, tuple]:
        """Write x as unit * prod b^e over the basis."""
        if x.is_zero():
            raise DomainError("Zero does not factor over a coprime basis.")
        num, up = self._strip(x.num)
        den, down = self._strip(x.den)
        if not num.is_constant() or not den.is_constant():
            raise InvariantError(f"{x} does not factor over the current coprime basis.")
        unit = num.leading() * pow(den.leading(), -1, self.modulus.p) % self.modulus.p
        return unit, tuple(u - d for u, d in zip(up, down))

    def expand(self, unit: int, exps: Sequence[int]) -> RatFunc:
        """Materialize unit * prod b^e; coprimality keeps the fraction reduced."""
        degree = sum(abs(e) * b.degree for e, b in zip(exps, self.polys))
        check_degree(degree, "coordinate materialization")
        num = self.modulus.poly([unit])
        den = self.modulus.poly([1])
        for e, b in zip(exps, self.polys):
            if e > 0:
                num = num * poly_int_pow(b, e)
            elif e < 0:
                den = den * poly_int_pow(b, -e)
        return RatFunc._raw(num, den)

    def factor_point(self, x: TorusPoint) -> "FactoredPoint":
        pairs = [self.factor(coord) for coord in x.coords]
        return FactoredPoint(tuple(u for u, _ in pairs), tuple(e for _, e in pairs), self.modulus.p)

    def materialize(self, x: "FactoredPoint") -> TorusPoint:
        return TorusPoint(tuple(self.expand(u, e) for u, e in zip(x.units, x.rows)))


@dataclass(frozen=True)
class FactoredPoint:
    """A torus point as units in F_p^x and exponent rows over a shared coprime basis."""

    units: tuple
    rows: tuple
    p: int

    @classmethod
    def one(cls, dimension: int, width: int, p: int) -> "FactoredPoint":
        return cls((1,) * dimension, ((0,) * width,) * dimension, p)

    def __mul__(self, other: "FactoredPoint") -> "FactoredPoint":
        units = tuple(u * v % self.p for u, v in zip(self.units, other.units))
        rows = tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self.rows, other.rows))
        return FactoredPoint(units, rows, self.p)

    def power(self, k: int) -> "FactoredPoint":
        units = tuple(pow(u, k % (self.p - 1), self.p) for u in self.units)
        rows = tuple(tuple(k * e for e in row) for row in self.rows)
        return FactoredPoint(units, rows, self.p)

    def endo_apply(self, matrix: Sequence[Sequence[int]]) -> "FactoredPoint":
        units, rows = [], []
        width = len(self.rows[0]) if self.rows else 0
        for matrix_row in matrix:
            unit = 1
            row = [0] * width
            for entry, u, source in zip(matrix_row, self.units, self.rows):
                if entry:
                    unit = unit * pow(u, entry % (self.p - 1), self.p) % self.p
                    for i, e in enumerate(source):
                        row[i] += entry * e
            units.append(unit)
            rows.append(tuple(row))
        return FactoredPoint(tuple(units), tuple(rows), self.p)


def _orbit_basis(selfmap: TorusSelfMap, alpha: TorusPoint) -> CoprimeBasis:
    if alpha.dimension != selfmap.dimension:
        raise UsageError(f"Start point has dimension {alpha.dimension}, map has {selfmap.dimension}.")
    if alpha.modulus != selfmap.modulus:
        raise UsageError("Start point and map live over different primes.")
    return CoprimeBasis(alpha.modulus, alpha.coords + selfmap.translation.coords)


def _compose(first: tuple, second: tuple) -> tuple:
    """(A1, y1) after (A2, y2) is (A1 A2, y1 * [A1] y2)."""
    a1, y1 = first
    a2, y2 = second
    return mat_mul(a1, a2), y1 * y2.endo_apply(a1)


def selfmap_iterate(selfmap: TorusSelfMap, alpha: TorusPoint, n: int) -> TorusPoint:
    """Phi^n(alpha) by binary powering of the affine pair in factored form."""
    if n < 0:
        raise DomainError(f"Iteration count must be non-negative, got {n}.")
    basis = _orbit_basis(selfmap, alpha)
    size = selfmap.dimension
    identity = [[int(i == j) for j in range(size)] for i in range(size)]
    result = (identity, FactoredPoint.one(size, len(basis), basis.modulus.p))
    base = ([list(row) for row in selfmap.matrix], basis.factor_point(selfmap.translation))
    while n:
        if n & 1:
            result = _compose(result, base)
        n >>= 1
        if n:
            base = _compose(base, base)
    matrix, shift = result
    return basis.materialize(shift * basis.factor_point(alpha).endo_apply(matrix))


class LaurentPoly:
    """
    Laurent polynomial in nvars variables with F_p(t) coefficients.

    terms maps exponent tuples to non-zero coefficients.
    """

    def __init__(self, nvars: int, terms: Iterable = ()):
        self.nvars = nvars
        collected = {}
        for exps, coeff in terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars:
                raise UsageError(f"Exponent vector {exps} does not have {nvars} entries.")
            collected[exps] = collected[exps] + coeff if exps in collected else coeff
        self.terms = tuple(sorted((e, c) for e, c in collected.items() if not c.is_zero()))

    @classmethod
    def constant(cls, nvars: int, value: RatFunc) -> "LaurentPoly":
        return cls(nvars, [((0,) * nvars, value)])

    @classmethod
    def variable(cls, nvars: int, index: int, modulus: PrimeModulus) -> "LaurentPoly":
        exps = tuple(int(i == index) for i in range(nvars))
        return cls(nvars, [(exps, modulus.one())])

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def total_degree(self) -> int:
        return max((sum(abs(e) for e in exps) for exps, _ in self.terms), default=0)

    def variables(self) -> set:
        return {i for exps, _ in self.terms for i, e in enumerate(exps) if e}

    def __eq__(self, other):
        return isinstance(other, LaurentPoly) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, self.terms))

    def __add__(self, other: "LaurentPoly") -> "LaurentPoly":
        return LaurentPoly(self.nvars, self.terms + other.terms)

    def __neg__(self) -> "LaurentPoly":
        return LaurentPoly(self.nvars, [(e, -c) for e, c in self.terms])

    def __sub__(self, other: "LaurentPoly") -> "LaurentPoly":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, RatFunc):
            return LaurentPoly(self.nvars, [(e, c * other) for e, c in self.terms])
        return LaurentPoly(
            self.nvars,
            [
                (tuple(a + b for a, b in zip(e1, e2)), c1 * c2)
                for (e1, c1), (e2, c2) in product(self.terms, other.terms)
            ],
        )

    def __pow__(self, m: int) -> "LaurentPoly":
        if m < 0:
            raise DomainError("Only non-negative powers of a Laurent polynomial are supported.")
        result = None
        for _ in range(m):
            result = self if result is None else result * self
        return result if result is not None else LaurentPoly.constant(self.nvars, self._modulus().one())

    def _modulus(self) -> PrimeModulus:
        if not self.terms:
            raise DomainError("The zero polynomial carries no modulus.")
        return self.terms[0][1].modulus

    def evaluate(self, values: Sequence[RatFunc], cache: Optional[dict] = None) -> RatFunc:
        """Exact value at a point; powers of each coordinate are cached across terms."""
        if len(values) != self.nvars:
            raise UsageError(f"Expected {self.nvars} values, got {len(values)}.")
        cache = {} if cache is None else cache
        total = values[0].modulus.constant(0)
        for exps, coeff in self.terms:
            value = coeff
            for i, e in enumerate(exps):
                if e:
                    key = (i, e)
                    if key not in cache:
                        cache[key] = ratfunc_int_pow(values[i], e)
                    value = value * cache[key]
            total = total + value
        return total

    def substitute_monomials(self, monomials: Sequence[Sequence[int]]) -> "LaurentPoly":
        """Replace variable i by the monomial with exponent vector monomials[i]."""
        if len(monomials) != self.nvars:
            raise UsageError(f"Need {self.nvars} monomials, got {len(monomials)}.")
        width = len(monomials[0])
        terms = []
        for exps, coeff in self.terms:
            image = [0] * width
            for e, monomial in zip(exps, monomials):
                if e:
                    for j, m in enumerate(monomial):
                        image[j] += e * m
            terms.append((tuple(image), coeff))
        return LaurentPoly(width, terms)

    def compose(self, forms: Sequence["LaurentPoly"]) -> "LaurentPoly":
        """Substitute forms[i] for variable i; exponents must be non-negative."""
        if len(forms) != self.nvars:
            raise UsageError(f"Need {self.nvars} forms, got {len(forms)}.")
        width = forms[0].nvars
        result = LaurentPoly(width)
        powers = {}
        for exps, coeff in self.terms:
            term = LaurentPoly.constant(width, coeff)
            for i, e in enumerate(exps):
                if e < 0:
                    raise DomainError("Cannot compose a Laurent polynomial with a negative exponent.")
                if e:
                    if (i, e) not in powers:
                        powers[(i, e)] = forms[i] ** e
                    term = term * powers[(i, e)]
            result = result + term
        return result

    def __repr__(self):
        return f"LaurentPoly({self.nvars}, {[(e, str(c)) for e, c in self.terms]})"


class Variety:
    """
    Zero set in G_m^N of a list of equations.

    With forms given, the equations are polynomials in the form values z_k = forms[k](x);
    forms are evaluated lazily and linear equations are tested first.
    """

    def __init__(
        self,
        dimension: int,
        equations: Iterable[LaurentPoly] = (),
        forms: Optional[Sequence[LaurentPoly]] = None,
        declared_dim: Optional[int] = None,
    ):
        self.dimension = dimension
        self.forms = tuple(forms) if forms is not None else None
        width = len(self.forms) if self.forms is not None else dimension
        equations = list(equations)
        for equation in equations:
            if equation.nvars != width:
                raise UsageError(f"Equation has {equation.nvars} variables, expected {width}.")
        if self.forms is not None and any(form.nvars != dimension for form in self.forms):
            raise UsageError(f"Every form must be a Laurent polynomial in {dimension} variables.")
        self.equations = tuple(sorted(equations, key=lambda eq: eq.total_degree))
        self.declared_dim = declared_dim

    def is_whole(self) -> bool:
        return not self.equations

    def contains(self, x: TorusPoint) -> bool:
        if x.dimension != self.dimension:
            raise UsageError(f"Point of dimension {x.dimension} tested against a variety in dimension {self.dimension}.")
        cache = {}
        if self.forms is None:
            return all(eq.evaluate(x.coords, cache).is_zero() for eq in self.equations)
        values = {}
        zero = x.modulus.constant(0)
        for equation in self.equations:
            for k in equation.variables():
                if k not in values:
                    values[k] = self.forms[k].evaluate(x.coords, cache)
            point = [values.get(k, zero) for k in range(len(self.forms))]
            if not equation.evaluate(point).is_zero():
                return False
        return True

    def expanded(self) -> "Variety":
        """The same variety with forms composed into plain equations in x."""
        if self.forms is None:
            return self
        return Variety(self.dimension, [eq.compose(self.forms) for eq in self.equations], None, self.declared_dim)

    def pullback(self, monomials: Sequence[Sequence[int]]) -> "Variety":
        """Preimage under x_i -> prod_j w_j^(monomials[i][j])."""
        width = len(monomials[0])
        if self.forms is not None:
            forms = [form.substitute_monomials(monomials) for form in self.forms]
            return Variety(width, self.equations, forms, self.declared_dim)
        return Variety(width, [eq.substitute_monomials(monomials) for eq in self.equations], None, self.declared_dim)


def variety_contains(variety: Variety, x: TorusPoint) -> bool:
    return variety.contains(x)


def return_set(
    selfmap: TorusSelfMap,
    alpha: TorusPoint,
    variety: Variety,
    n_max: int,
    membership: Optional[Callable[[FactoredPoint, CoprimeBasis], bool]] = None,
) -> list:
    """
    All n <= n_max with Phi^n(alpha) in the variety, iterating one affine step at a time.

    :param membership: optional test on factored points; the default materializes and evaluates
    """
    if n_max < 0:
        raise DomainError(f"n_max must be non-negative, got {n_max}.")
    basis = _orbit_basis(selfmap, alpha)
    if variety.dimension != selfmap.dimension:
        raise UsageError(f"Variety lives in dimension {variety.dimension}, map in {selfmap.dimension}.")
    step = basis.factor_point(selfmap.translation)
    current = basis.factor_point(alpha)
    hits = []
    for n in range(n_max + 1):
        if variety.is_whole():
            inside = True
        elif membership is not None:
            inside = membership(current, basis)
        else:
            inside = variety.contains(basis.materialize(current))
        if inside:
            hits.append(n)
        if n < n_max:
            current = step * current.endo_apply(selfmap.matrix)
    logging.debug(f"Orbit visited the variety {len(hits)} times up to n={n_max}.")
    return hits


def minimal_polynomial(matrix: Sequence[Sequence[int]]) -> tuple:
    """
    Monic minimal polynomial of an integer matrix, lowest degree first.

    Searches the first power A^k that is a rational combination of I, A, ..., A^(k-1).
    """
    size = _check_square(matrix)
    powers = [mat_pow(matrix, 0)]
    for k in range(1, size + 1):
        powers.append(mat_mul(powers[-1], matrix))
        columns = Matrix([[entry for row in power for entry in row] for power in powers]).T
        kernel = columns.nullspace()
        if kernel:
            vector = kernel[0] / kernel[0][k]
            coeffs = tuple(int(v) for v in vector)
            if any(v != int(v) for v in vector):
                raise InvariantError(f"Minimal polynomial of {matrix} has non-integer coefficients.")
            return coeffs
    raise InvariantError(f"No annihilating polynomial of degree <= {size} for {matrix}.")


def matrix_poly_eval(coeffs: Sequence[int], matrix: Sequence[Sequence[int]]) -> list:
    """sum_k coeffs[k] A^k by Horner's rule."""
    size = _check_square(matrix)
    result = [[0] * size for _ in range(size)]
    for c in reversed(coeffs):
        result = mat_mul(result, matrix)
        for i in range(size):
            result[i][i] += c
    return result


@dataclass(frozen=True)
class ReductionData:
    """
    Phi^n(alpha) = prod_i Q_i^(u^(i)_n) * prod_i (A^i alpha)^(v^(i)_n).

    u_seqs[i] pairs with q_points[i] = prod_{j <= i} [A^j] y and v_seqs[i] with alpha_iterates[i] = [A^i] alpha.
    """

    minpoly: tuple
    u_seqs: tuple
    v_seqs: tuple
    q_points: tuple
    alpha_iterates: tuple


def reduction_decompose(selfmap: TorusSelfMap, alpha: TorusPoint) -> ReductionData:
    minpoly = minimal_polynomial(selfmap.matrix)
    order = len(minpoly) - 1
    rec = minpoly[:-1]
    v_seqs = tuple(Lrs(rec, [int(i == j) for j in range(order)]) for i in range(order))
    extended = tuple(int_poly_mul(minpoly, [-1, 1]))[:-1]
    partial_sums = []
    for v in v_seqs:
        terms = lrs_terms(v, order + 1)
        partial_sums.append([sum(terms[:n]) for n in range(order + 1)])
    partial_sums.append([0] * (order + 1))
    u_seqs = tuple(
        Lrs(extended, [partial_sums[i][n] - partial_sums[i + 1][n] for n in range(order + 1)]) for i in range(order)
    )
    q_points = []
    shift = TorusPoint.one(alpha.modulus, selfmap.dimension)
    image = selfmap.translation
    for _ in range(order):
        shift = shift * image
        q_points.append(shift)
        image = endo_apply(selfmap.matrix, image)
    alpha_iterates = []
    point = alpha
    for _ in range(order):
        alpha_iterates.append(point)
        point = endo_apply(selfmap.matrix, point)
    logging.debug(f"Reduction uses a minimal polynomial of degree {order}.")
    return ReductionData(minpoly, u_seqs, v_seqs, tuple(q_points), tuple(alpha_iterates))


def verify_reduction(rd: ReductionData, selfmap: TorusSelfMap, alpha: TorusPoint, n_max: int) -> bool:
    """Compare sequential iteration with the decomposition for every n <= n_max, on factored points."""
    basis = _orbit_basis(selfmap, alpha)
    q_factored = [basis.factor_point(q) for q in rd.q_points]
    a_factored = [basis.factor_point(x) for x in rd.alpha_iterates]
    u_values = [lrs_terms(u, n_max + 1) for u in rd.u_seqs]
    v_values = [lrs_terms(v, n_max + 1) for v in rd.v_seqs]
    step = basis.factor_point(selfmap.translation)
    current = basis.factor_point(alpha)
    one = FactoredPoint.one(selfmap.dimension, len(basis), basis.modulus.p)
    for n in range(n_max + 1):
        expected = one
        for q, values in zip(q_factored, u_values):
            expected = expected * q.power(values[n])
        for x, values in zip(a_factored, v_values):
            expected = expected * x.power(values[n])
        if expected != current:
            logging.info(f"Decomposition identity fails at n={n}.")
            return False
        current = step * current.endo_apply(selfmap.matrix)
    return True


@dataclass(frozen=True)
class ObstructionVerdict:
    status: str  # obstructed | clear-to-bound
    r: Optional[int]
    s: Optional[int]
    r_max: int
    s_max: int

    @property
    def obstructed(self) -> bool:
        return self.status == "obstructed"

    def __str__(self):
        if self.obstructed:
            return f"obstructed({self.r}, {self.s})"
        return f"clear-to-bound({self.r_max}, {self.s_max})"


def frobenius_obstruction(
    matrix: Sequence[Sequence[int]], p: PrimeModulus, r_max: int = DEFAULT_R_MAX, s_max: int = DEFAULT_S_MAX
) -> ObstructionVerdict:
    """
    Look for an iterate A^r acting as the p^s-power map on a subgroup, i.e. det(A^r - p^s I) = 0.

    Integer eigenvalues +-p^b are decided outright; otherwise (r, s) is scanned up to the bounds.
    """
    _check_square(matrix)
    if r_max < 1 or s_max < 1:
        raise DomainError(f"Obstruction bounds must be positive, got r_max={r_max}, s_max={s_max}.")
    roots, _ = integer_roots(minimal_polynomial(matrix))
    for root, _ in roots:
        if root == 0:
            continue
        rest, exponent = abs(root), 0
        while rest % p.p == 0:
            rest //= p.p
            exponent += 1
        if rest == 1:
            r = 1 if root > 0 else 2
            return ObstructionVerdict("obstructed", r, exponent * r, r_max, s_max)
    for r in range(1, r_max + 1):
        charpoly = char_poly_of(mat_pow(matrix, r))
        for s in range(s_max + 1):
            value = p.p**s
            if sum(c * value**i for i, c in enumerate(charpoly)) == 0:
                return ObstructionVerdict("obstructed", r, s, r_max, s_max)
    return ObstructionVerdict("clear-to-bound", None, None, r_max, s_max)


def full_pipeline(
    selfmap: TorusSelfMap,
    alpha: TorusPoint,
    variety: Variety,
    n_max: int,
    declared_dim: Optional[int] = None,
    period_cap: int = DEFAULT_PERIOD_CAP,
    r_max: int = DEFAULT_R_MAX,
    s_max: int = DEFAULT_S_MAX,
) -> ReturnSetDesc:
    """
    Verified structured description of the return set on [0, n_max].

    Pure endomorphisms with no Frobenius-like iterate are fitted with progressions only;
    everything else may also use two-term p-sets.

    :param declared_dim: caller's dimension of the variety, falling back to the variety's own;
        advisory only. Above two it adds a note that the two-term fit may miss structure, but
        the shape is still chosen from the translation and the obstruction verdict.
    """
    hits = return_set(selfmap, alpha, variety, n_max)
    modulus = selfmap.modulus
    declared = declared_dim if declared_dim is not None else variety.declared_dim
    verdict = frobenius_obstruction(selfmap.matrix, modulus, r_max, s_max)
    notes = [f"obstruction {verdict}"]
    if selfmap.translation.is_one() and not verdict.obstructed:
        shape = "ap-only"
    else:
        shape = "two-term"
        if declared is not None and declared > 2:
            notes.append(f"declared dimension {declared} exceeds two; two-term fit is advisory")
    notes.append(f"shape {shape}")
    members = set(hits)
    desc = fit_description(hits, modulus, n_max, shape=shape, period_cap=period_cap)
    desc.notes = notes
    if not desc_verify(desc, members.__contains__, n_max):
        logging.info("Fitted orbit description failed verification; reporting raw hits.")
        desc = ReturnSetDesc(modulus.p, exceptional=sorted(members), notes=notes + ["fit rejected"])
        desc_verify(desc, members.__contains__, n_max)
    return desc


def format_equation(equation: LaurentPoly) -> list:
    return [f"{','.join(str(e) for e in exps)} : {format_ratfunc(coeff)}" for exps, coeff in equation.terms]


def parse_equation(fields: Sequence[str], dimension: int, modulus: PrimeModulus) -> LaurentPoly:
    """Parse a list of `e_1,...,e_N : num/den` terms."""
    terms = []
    for text in fields:
        if not isinstance(text, str) or text.count(":") != 1:
            raise ParseError(f"Malformed equation term {text!r}.")
        left, right = text.split(":")
        try:
            exps = tuple(int(e) for e in left.split(","))
        except ValueError as exc:
            raise ParseError(f"Malformed exponent vector in {text!r}: {exc}")
        if len(exps) != dimension:
            raise ValidationError(f"Exponent vector in {text!r} needs {dimension} entries.")
        terms.append((exps, parse_ratfunc(right, modulus)))
    return LaurentPoly(dimension, terms)


@dataclass
class TorusInstance:
    """A replayable return-set problem: map, start point, variety and iteration bound."""

    selfmap: TorusSelfMap
    alpha: TorusPoint
    variety: Variety
    n_max: int
    declared_dim: Optional[int] = None

    def to_document(self) -> dict:
        variety = self.variety.expanded()
        return {
            "kind": "torus",
            "p": self.selfmap.modulus.p,
            "N": self.selfmap.dimension,
            "matrix": [list(row) for row in self.selfmap.matrix],
            "y": [format_ratfunc(x) for x in self.selfmap.translation.coords],
            "alpha": [format_ratfunc(x) for x in self.alpha.coords],
            "variety": [format_equation(eq) for eq in variety.equations],
            "n_max": self.n_max,
            "declared_dim": self.declared_dim,
        }

    @classmethod
    def from_document(cls, document: dict) -> "TorusInstance":
        try:
            p, size = int(document["p"]), int(document["N"])
            matrix, y, alpha = document["matrix"], document["y"], document["alpha"]
            equations, n_max = document["variety"], int(document["n_max"])
            declared = document.get("declared_dim")
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"Malformed torus instance: {exc}")
        try:
            modulus = PrimeModulus(p)
            if len(matrix) != size or len(y) != size or len(alpha) != size:
                raise ValidationError(f"Matrix, translation and start point must all have dimension {size}.")
            selfmap = TorusSelfMap(matrix, TorusPoint(tuple(parse_ratfunc(x, modulus) for x in y)))
            start = TorusPoint(tuple(parse_ratfunc(x, modulus) for x in alpha))
            variety = Variety(
                size,
                [parse_equation(eq, size, modulus) for eq in equations],
                declared_dim=None if declared is None else int(declared),
            )
        except (DomainError, UsageError) as exc:
            raise ValidationError(f"Invalid torus instance: {exc}")
        if n_max < 0:
            raise ValidationError(f"n_max must be non-negative, got {n_max}.")
        return cls(selfmap, start, variety, n_max, variety.declared_dim)

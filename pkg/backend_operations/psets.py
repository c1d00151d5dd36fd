import re
import logging
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, permutations, product
from math import lcm, log2
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from sympy import Matrix

from backend_operations.errors import DomainError, ParseError, UnsupportedError
from backend_operations.exact_arith import PrimeModulus

DEFAULT_PERIOD_CAP = 360

# exponent steps tried when fitting p-set shapes to observed elements
_FIT_STEPS = (1, 2, 3)
_FIT_WINDOW = 5
_FIT_MAX_PSETS = 3
# exponent pairs (i, j) at which a two-term shape is pinned to window elements
_FIT_GRID = ((0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1), (1, 2))

_TERM_PATTERN = re.compile(r"^(-?\d+(?:/\d+)?)\*p\^\((\d+)\*n_(\d+)\)$")


@dataclass(frozen=True)
class ArithProg:
    """The progression {a*k + b : k >= 0}; a = 0 is the singleton {b}."""

    modulus: int
    offset: int

    def __post_init__(self):
        if self.modulus < 0 or self.offset < 0:
            raise DomainError(f"Progression needs non-negative modulus and offset, got {self.modulus}, {self.offset}.")

    def contains(self, n: int) -> bool:
        if self.modulus == 0:
            return n == self.offset
        return n >= self.offset and (n - self.offset) % self.modulus == 0

    def enumerate(self, bound: int) -> range:
        if self.modulus == 0:
            return range(self.offset, self.offset + 1) if self.offset <= bound else range(0)
        return range(self.offset, bound + 1, self.modulus)


@dataclass(frozen=True)
class PSet:
    """
    The set {sum_j c_j p^(k_j n_j) : n_j >= 0}, read as a subset of N_0.

    A term with k_j = 0 is the constant c_j.
    """

    terms: tuple

    def __post_init__(self):
        terms = tuple((Fraction(c), int(k)) for c, k in self.terms)
        if not terms:
            raise DomainError("A p-set needs at least one term.")
        if any(k < 0 for _, k in terms):
            raise DomainError("Exponent steps of a p-set must be non-negative.")
        object.__setattr__(self, "terms", terms)

    @property
    def nontrivial_count(self) -> int:
        return sum(1 for c, k in self.terms if k > 0 and c != 0)

    def __str__(self):
        return format_pset(self)


@dataclass
class ReturnSetDesc:
    """Finite union of progressions, p-sets and exceptional elements, with the bound it was checked to."""

    p: int
    aps: list = field(default_factory=list)
    psets: list = field(default_factory=list)
    exceptional: list = field(default_factory=list)
    verified_bound: Optional[int] = None
    notes: list = field(default_factory=list)

    def contains(self, n: int) -> bool:
        if n < 0:
            return False
        if n in self.exceptional or any(ap.contains(n) for ap in self.aps):
            return True
        modulus = PrimeModulus(self.p)
        return any(pset_membership(n, pset, modulus) is not None for pset in self.psets)

    def enumerate(self, bound: int) -> set:
        modulus = PrimeModulus(self.p)
        members = {n for n in self.exceptional if 0 <= n <= bound}
        for ap in self.aps:
            members.update(ap.enumerate(bound))
        for pset in self.psets:
            members.update(pset_enumerate(pset, modulus, bound))
        return members

    def has_nontrivial_pset(self) -> bool:
        return any(pset.nontrivial_count > 0 for pset in self.psets)


@dataclass(frozen=True)
class _Problem:
    """A representability query with denominators cleared and constant terms folded into the target."""

    residual: int
    coeffs: tuple  # scaled coefficients of the terms that move
    steps: tuple  # their k_j
    indices: tuple  # their positions in the original p-set
    size: int  # number of terms in the original p-set


def _scaled_terms(pset: PSet) -> tuple[int, list]:
    denominator = lcm(*(c.denominator for c, _ in pset.terms))
    scaled = []
    for c, k in pset.terms:
        value = c * denominator
        if value.denominator != 1:
            raise DomainError(f"Coefficient {c} did not clear with denominator {denominator}.")
        scaled.append((int(value), k))
    return denominator, scaled


def _prepare(target: int, pset: PSet) -> Optional[_Problem]:
    denominator, scaled = _scaled_terms(pset)
    scaled_target = Fraction(target) * denominator
    if scaled_target.denominator != 1:
        raise DomainError(f"Target {target} is not integral after scaling by {denominator}.")
    residual = int(scaled_target)
    coeffs, steps, indices = [], [], []
    for index, (c, k) in enumerate(scaled):
        if k == 0:
            residual -= c
        elif c != 0:
            coeffs.append(c)
            steps.append(k)
            indices.append(index)
    return _Problem(residual, tuple(coeffs), tuple(steps), tuple(indices), len(scaled))


def _levels_above(value: int, p: int) -> int:
    """Smallest l with p^l > value (value >= 0)."""
    if value <= 0:
        return 0
    level = max(0, int((value.bit_length() - 1) / log2(p)) - 1)
    power = p**level
    while power <= value:
        power *= p
        level += 1
    return level


def _top_level(residual: int, coeffs: Sequence[int], steps: Sequence[int], p: int) -> int:
    """
    Highest level a term of the lexicographically least solution can occupy.

    With positive coefficients every placed power is at most |residual|. With mixed signs an
    upper group separated by a gap of g + K levels (p^g > 2 sum|c|, K = lcm of steps) above
    p^l > 2|residual| must sum to zero and could be shifted down by K.
    """
    if all(c > 0 for c in coeffs):
        return _levels_above(abs(residual), p)
    gap = _levels_above(2 * sum(abs(c) for c in coeffs), p)
    period = lcm(*steps)
    start = max(_levels_above(2 * abs(residual), p), period)
    return start + len(coeffs) * (gap + period)


class _DigitSearch:
    """
    Level-by-level search placing the terms of a problem at base-p levels.

    A state (value, unplaced) at level l means the unplaced terms, divided by p^l, must sum
    to value. Placing a subset S at level l needs value - sum(S) divisible by p.
    """

    def __init__(self, problem: _Problem, p: int, pins: dict):
        self.problem = problem
        self.p = p
        self.pins = pins
        self.count = len(problem.coeffs)
        self.top = _top_level(problem.residual, problem.coeffs, problem.steps, p)
        self.sums = [0] * (1 << self.count)
        for mask in range(1, 1 << self.count):
            low = mask & -mask
            self.sums[mask] = self.sums[mask ^ low] + problem.coeffs[low.bit_length() - 1]
        self.edges = []
        self.good = []

    def _choices(self, level: int, unplaced: int) -> Iterable[int]:
        eligible = 0
        forced = 0
        for j in range(self.count):
            bit = 1 << j
            if not unplaced & bit or level % self.problem.steps[j]:
                continue
            pinned = self.pins.get(j)
            if pinned is None:
                eligible |= bit
            elif pinned == level:
                eligible |= bit
                forced |= bit
        submask = eligible
        while True:
            if submask & forced == forced:
                yield submask
            if submask == 0:
                break
            submask = (submask - 1) & eligible

    def _viable(self, value: int, unplaced: int) -> bool:
        if unplaced == 0:
            return value == 0
        signs = {self.problem.coeffs[j] > 0 for j in range(self.count) if unplaced >> j & 1}
        if signs == {True}:
            return value > 0
        if signs == {False}:
            return value < 0
        return True

    def run(self) -> bool:
        full = (1 << self.count) - 1
        start = (self.problem.residual, full)
        if not self._viable(*start):
            return False
        frontier = {start}
        for level in range(self.top + 1):
            level_edges = {}
            following = set()
            for value, unplaced in frontier:
                if unplaced == 0:
                    continue
                outs = []
                for chosen in self._choices(level, unplaced):
                    rest = value - self.sums[chosen]
                    if rest % self.p:
                        continue
                    state = (rest // self.p, unplaced & ~chosen)
                    if self._viable(*state):
                        outs.append((chosen, state))
                        following.add(state)
                level_edges[(value, unplaced)] = outs
            self.edges.append(level_edges)
            frontier = following
            if not frontier:
                break
        done = (0, 0)
        good = {done}
        self.good = [None] * (len(self.edges) + 1)
        self.good[len(self.edges)] = good
        for level in range(len(self.edges) - 1, -1, -1):
            current = {done}
            for state, outs in self.edges[level].items():
                if any(state_next in good for _, state_next in outs):
                    current.add(state)
            self.good[level] = current
            good = current
        return start in self.good[0]

    def lowest_level(self, j: int) -> Optional[int]:
        """Lowest level at which term j is placed on some successful path."""
        bit = 1 << j
        for level, level_edges in enumerate(self.edges):
            for state, outs in level_edges.items():
                if state not in self.good[level]:
                    continue
                if any(chosen & bit and state_next in self.good[level + 1] for chosen, state_next in outs):
                    return level
        return None


def pset_membership(target: int, pset: PSet, p: PrimeModulus) -> Optional[tuple]:
    """
    Decide whether target lies in the p-set.

    :return: the lexicographically least exponent tuple (n_1, ..., n_m), or None
    """
    problem = _prepare(target, pset)
    if not problem.coeffs:
        return (0,) * problem.size if problem.residual == 0 else None
    pins = {}
    if not _DigitSearch(problem, p.p, pins).run():
        return None
    for j in range(len(problem.coeffs)):
        search = _DigitSearch(problem, p.p, pins)
        search.run()
        level = search.lowest_level(j)
        if level is None:
            raise UnsupportedError(f"Witness search lost track of term {j} for target {target}.")
        pins[j] = level
    witness = [0] * problem.size
    for j, index in enumerate(problem.indices):
        witness[index] = pins[j] // problem.steps[j]
    return tuple(witness)


def pset_enumerate(pset: PSet, p: PrimeModulus, bound: int) -> list:
    """All elements of the p-set in [0, bound], sorted."""
    if bound < 0:
        return []
    denominator, scaled = _scaled_terms(pset)
    constant = sum(c for c, k in scaled if k == 0)
    moving = [(c, k) for c, k in scaled if k > 0 and c != 0]
    ceiling = bound * denominator
    if not moving:
        value = Fraction(constant, denominator)
        return [int(value)] if value.denominator == 1 and 0 <= value <= bound else []
    coeffs = [c for c, _ in moving]
    steps = [k for _, k in moving]
    widest = max(abs(constant), abs(ceiling - constant))
    top = _top_level(widest, coeffs, steps, p.p)
    positive = all(c > 0 for c in coeffs)
    found = set()

    def walk(index: int, partial: int) -> None:
        if index == len(moving):
            value = Fraction(partial, denominator)
            if value.denominator == 1 and 0 <= value <= bound:
                found.add(int(value))
            return
        c, k = moving[index]
        for level in range(0, top + 1, k):
            total = partial + c * p.p**level
            if positive and total + sum(coeffs[index + 1 :]) > ceiling:
                break
            walk(index + 1, total)

    walk(0, constant)
    return sorted(found)


def _eventual_cycle(base: int, modulus: int) -> tuple[int, int, list]:
    """Preperiod, period and residues of base^n mod modulus."""
    seen = {}
    residues = []
    value = 1 % modulus
    while value not in seen:
        seen[value] = len(residues)
        residues.append(value)
        value = value * base % modulus
    preperiod = seen[value]
    return preperiod, len(residues) - preperiod, residues


def _raise_above(pset: PSet, p: int, floor: int) -> list:
    """Split a p-set with positive moving coefficients into p-sets whose elements are all >= floor."""
    constant = sum(c for c, k in pset.terms if k == 0)
    moving = [(c, k) for c, k in pset.terms if k > 0 and c != 0]
    smallest = constant + sum(c for c, _ in moving)
    if smallest >= floor:
        return [pset]
    thresholds = []
    for i, (c, k) in enumerate(moving):
        others = sum(c2 for j, (c2, _) in enumerate(moving) if j != i)
        t = 0
        while constant + c * p ** (k * t) + others < floor:
            t += 1
        thresholds.append(t)
    pieces = []
    for i, (c, k) in enumerate(moving):
        for prefix in product(*(range(thresholds[j]) for j in range(i))):
            pinned = sum(moving[j][0] * p ** (moving[j][1] * t) for j, t in enumerate(prefix))
            terms = [(constant + pinned, 0), (c * p ** (k * thresholds[i]), k)] + moving[i + 1 :]
            pieces.append(PSet(terms))
    for box in product(*(range(t) for t in thresholds)):
        value = constant + sum(c * p ** (k * t) for (c, k), t in zip(moving, box))
        if value >= floor and value.denominator == 1:
            pieces.append(PSet(((value, 0),)))
    return pieces


def ap_intersect_pset(ap: ArithProg, pset: PSet, p: PrimeModulus) -> list:
    """
    The intersection of a progression with a p-set as a finite list of p-sets.

    Each moving term's residues p^(k n) mod (D a) are eventually periodic; every admissible
    residue combination pins the preperiodic exponents and turns periodic ones into new terms.
    """
    if ap.modulus == 0:
        return [PSet(((ap.offset, 0),))] if pset_membership(ap.offset, pset, p) is not None else []
    denominator, scaled = _scaled_terms(pset)
    modulus = denominator * ap.modulus
    target = denominator * ap.offset % modulus
    options = []
    for (c, k), (c_scaled, _) in zip(pset.terms, scaled):
        if k == 0 or c == 0:
            options.append([(None, c_scaled % modulus, (c, 0))])
            continue
        preperiod, period, residues = _eventual_cycle(p.p**k, modulus)
        choices = []
        for n, residue in enumerate(residues):
            coefficient = c * p.p ** (k * n)
            term = (coefficient, 0) if n < preperiod else (coefficient, k * period)
            choices.append((n, c_scaled * residue % modulus, term))
        options.append(choices)
    pieces = []
    for combination in product(*options):
        if sum(residue for _, residue, _ in combination) % modulus == target:
            pieces.append(PSet(tuple(term for _, _, term in combination)))
    logging.debug(f"Progression {ap} meets {format_pset(pset)} in {len(pieces)} residue classes.")
    if ap.offset < ap.modulus:
        return pieces
    if any(c < 0 for c, k in pset.terms if k > 0):
        raise UnsupportedError(
            f"Intersection with {format_pset(pset)} below offset {ap.offset} needs a positive-coefficient p-set."
        )
    raised = []
    for piece in pieces:
        raised.extend(_raise_above(piece, p.p, ap.offset))
    return raised


def desc_verify(desc: ReturnSetDesc, oracle: Callable[[int], bool], bound: int) -> bool:
    """Check the description against the oracle at every n in [0, bound]; records the bound on success."""
    members = desc.enumerate(bound)
    for n in range(bound + 1):
        if (n in members) != bool(oracle(n)):
            logging.info(f"Description disagrees with oracle at n={n}.")
            return False
    desc.verified_bound = bound
    return True


def _extract_aps(hits: set, bound: int, period_cap: int) -> list:
    """Progressions from the eventually periodic tail of the indicator, seen over at least two periods."""
    indicator = bytearray(bound + 1)
    for n in hits:
        if 0 <= n <= bound:
            indicator[n] = 1
    best = None
    for period in range(1, min(period_cap, (bound + 1) // 2) + 1):
        start = bound - period + 1
        while start > 0 and indicator[start - 1] == indicator[start - 1 + period]:
            start -= 1
        if bound + 1 - start < 2 * period or not any(indicator[start : start + period]):
            continue
        if best is None or start < best[1]:
            best = (period, start)
        if start == 0:
            break
    if best is None:
        return []
    period, start = best
    return [ArithProg(period, r) for r in range(start, start + period) if indicator[r]]


@lru_cache(maxsize=None)
def _grid_inverse(p: int, step1: int, step2: int, points: tuple) -> Optional[tuple]:
    """Inverse of the 3x3 system d0 + d1 p^(step1 i) + d2 p^(step2 j) at the grid points; None when singular."""
    matrix = Matrix([[1, p ** (step1 * i), p ** (step2 * j)] for i, j in points])
    if matrix.det() == 0:
        return None
    inverse = matrix.inv()
    return tuple(tuple(Fraction(int(v.p), int(v.q)) for v in inverse.row(r)) for r in range(3))


def _solve3(p: int, steps: tuple, points: tuple, values: Sequence[int]) -> Optional[list]:
    """Coefficients (d0, d1, d2) through the three (point, value) pairs; None when the points are dependent."""
    inverse = _grid_inverse(p, steps[0], steps[1], points)
    if inverse is None:
        return None
    return [sum((a * v for a, v in zip(row, values)), Fraction(0)) for row in inverse]


def _shape(d0: Fraction, moving: list) -> tuple:
    terms = tuple(moving) + (((d0, 0),) if d0 != 0 else ())
    return terms


def _candidates(window: Sequence[int], p: int, max_terms: int) -> Iterable[PSet]:
    """p-sets d0 + d1 p^(l1 n1) [+ d2 p^(l2 n2)] through the smallest window elements; d1, d2 may be negative."""
    seen = set()
    for step in _FIT_STEPS:
        for low, high in ((0, 1), (0, 2), (1, 2)):
            d1 = Fraction(window[high] - window[low], p**step - 1)
            d0 = window[low] - d1
            terms = _shape(d0, [(d1, step)])
            if d1 > 0 and len(terms) <= max_terms and terms not in seen:
                seen.add(terms)
                yield PSet(terms)
    for step1 in _FIT_STEPS:
        for step2 in _FIT_STEPS:
            if step2 < step1:
                continue
            for points in combinations(_FIT_GRID, 3):
                for values in permutations(window[:3]):
                    solution = _solve3(p, (step1, step2), points, values)
                    if solution is None:
                        continue
                    d0, d1, d2 = solution
                    if d1 == 0 or d2 == 0:
                        continue
                    terms = _shape(d0, [(d1, step1), (d2, step2)])
                    if len(terms) <= max_terms and terms not in seen:
                        seen.add(terms)
                        yield PSet(terms)


def _best_pset(remaining: list, p: PrimeModulus, bound: int, max_terms: int) -> Optional[PSet]:
    pool = set(remaining)
    best = None
    for skip in range(min(3, len(remaining) - _FIT_WINDOW + 1)):
        window = remaining[skip : skip + _FIT_WINDOW]
        for candidate in _candidates(window, p.p, max_terms):
            head = set(pset_enumerate(candidate, p, window[-1]))
            if not set(window) <= head or not head <= pool:
                continue
            elements = set(pset_enumerate(candidate, p, bound))
            if not elements <= pool:
                continue
            score = (len(elements), -len(candidate.terms))
            if best is None or score > best[0]:
                best = (score, candidate)
        if best is not None:
            return best[1]
    return None


def fit_description(
    elements: Iterable[int],
    p: PrimeModulus,
    bound: int,
    shape: str = "two-term",
    max_terms: int = 3,
    period_cap: int = DEFAULT_PERIOD_CAP,
    allow_aps: bool = True,
) -> ReturnSetDesc:
    """
    Fit a structured description to observed elements of [0, bound]; the result is unverified.

    :param shape: "ap-only" fits progressions only, "two-term" also fits p-sets with at most two moving terms
    """
    hits = sorted(set(n for n in elements if 0 <= n <= bound))
    desc = ReturnSetDesc(p.p)
    if allow_aps:
        desc.aps = _extract_aps(set(hits), bound, period_cap)
    remaining = [n for n in hits if not any(ap.contains(n) for ap in desc.aps)]
    if shape == "two-term":
        while len(remaining) >= _FIT_WINDOW and len(desc.psets) < _FIT_MAX_PSETS:
            candidate = _best_pset(remaining, p, bound, max_terms)
            if candidate is None:
                break
            covered = set(pset_enumerate(candidate, p, bound))
            desc.psets.append(candidate)
            remaining = [n for n in remaining if n not in covered]
    elif shape != "ap-only":
        raise DomainError(f"Unknown description shape '{shape}'.")
    desc.exceptional = remaining
    return desc


def pset_intersect_bounded(first: PSet, second: PSet, p: PrimeModulus, bound: int) -> tuple[list, Optional[list]]:
    """
    Exact elements of the intersection up to bound, plus a verified p-set description when one fits.

    Candidate p-sets never use more terms than the larger input.
    """
    elements = sorted(set(pset_enumerate(first, p, bound)) & set(pset_enumerate(second, p, bound)))
    pool = set(elements)
    max_terms = max(len(first.terms), len(second.terms))
    options = [[first], [second]]
    if elements:
        fitted = fit_description(elements, p, bound, max_terms=max_terms, allow_aps=False)
        options.append(fitted.psets + [PSet(((n, 0),)) for n in fitted.exceptional])
    else:
        options.append([])
    for option in options:
        desc = ReturnSetDesc(p.p, psets=list(option))
        if desc_verify(desc, pool.__contains__, bound):
            return elements, option
    return elements, None


def format_pset(pset: PSet) -> str:
    return "+".join(f"{c}*p^({k}*n_{j})" for j, (c, k) in enumerate(pset.terms, start=1))


def parse_pset(text: str) -> PSet:
    """Parse `c_1*p^(k_1*n_1)+...`; negative coefficients appear as `+-c`."""
    terms = []
    for j, chunk in enumerate(text.strip().split("+"), start=1):
        match = _TERM_PATTERN.match(chunk.strip())
        if match is None or int(match.group(3)) != j:
            raise ParseError(f"Malformed p-set term '{chunk}' in '{text}'.")
        terms.append((Fraction(match.group(1)), int(match.group(2))))
    if not terms:
        raise ParseError(f"Empty p-set '{text}'.")
    return PSet(tuple(terms))


def desc_to_document(desc: ReturnSetDesc) -> dict:
    return {
        "p": desc.p,
        "aps": [[ap.modulus, ap.offset] for ap in desc.aps],
        "psets": [format_pset(pset) for pset in desc.psets],
        "exceptional": list(desc.exceptional),
        "verified_bound": desc.verified_bound,
        "notes": list(desc.notes),
    }


def desc_from_document(document: dict) -> ReturnSetDesc:
    try:
        return ReturnSetDesc(
            p=int(document["p"]),
            aps=[ArithProg(int(a), int(b)) for a, b in document["aps"]],
            psets=[parse_pset(text) for text in document["psets"]],
            exceptional=sorted(int(n) for n in document["exceptional"]),
            verified_bound=document.get("verified_bound"),
            notes=list(document.get("notes", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"Malformed return-set description: {exc}")

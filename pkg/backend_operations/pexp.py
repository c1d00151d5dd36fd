import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Optional, Sequence

from backend_operations.errors import DomainError, UnsupportedError
from backend_operations.exact_arith import PrimeModulus
from backend_operations.lrs import (
    DEFAULT_CYCLOTOMIC_BOUND,
    Lrs,
    integer_roots,
    lrs_char_roots,
    lrs_is_constant,
    lrs_nondegenerate_split,
    lrs_root_p_dependence,
    lrs_terms,
    lrs_zero_progression_certify,
)
from backend_operations.psets import (
    DEFAULT_PERIOD_CAP,
    ArithProg,
    PSet,
    ReturnSetDesc,
    desc_verify,
    fit_description,
    pset_membership,
)


@dataclass(frozen=True)
class PexpInstance:
    """The equation u_n = c_1 p^(k_1 n_1) + ... + c_m p^(k_m n_m); no terms is the void equation."""

    u: Lrs
    p: PrimeModulus
    terms: tuple = ()

    def __post_init__(self):
        terms = tuple((int(c), int(k)) for c, k in self.terms)
        if any(k < 0 for _, k in terms):
            raise DomainError("Exponent steps must be non-negative.")
        object.__setattr__(self, "terms", terms)

    def pset(self) -> Optional[PSet]:
        return PSet(self.terms) if self.terms else None


@dataclass(frozen=True)
class FArithSeq:
    """
    U_n = U^(1)_{n_1} + ... + U^(m)_{n_m} over n in the progression ap.

    Each part is trivial when it is a constant sequence.
    """

    ap: ArithProg
    U: Lrs
    parts: tuple
    p: PrimeModulus

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    def trivial_parts(self) -> list:
        return [part for part in self.parts if lrs_is_constant(part)]

    def nontrivial_parts(self) -> list:
        return [part for part in self.parts if not lrs_is_constant(part)]


@dataclass
class FArithResult:
    solutions: list = field(default_factory=list)
    undecided: list = field(default_factory=list)


def _solve_values(values: Sequence[int], pset: PSet, p: PrimeModulus) -> list:
    solutions = []
    for n, value in enumerate(values):
        witness = pset_membership(value, pset, p)
        if witness is not None:
            solutions.append((n, witness))
    return solutions


def pexp_solve(inst: PexpInstance, n_max: int) -> list:
    """
    All n <= n_max for which u_n is representable, each with its lexicographically least witness.

    :return: list of (n, witness) pairs in increasing n
    """
    if n_max < 0:
        raise DomainError(f"n_max must be non-negative, got {n_max}.")
    values = lrs_terms(inst.u, n_max + 1)
    if not inst.terms:
        return [(n, ()) for n in range(n_max + 1)]
    solutions = _solve_values(values, inst.pset(), inst.p)
    logging.debug(f"Solved {len(values)} terms; {len(solutions)} representable.")
    return solutions


def format_witness_table(solutions: Sequence) -> str:
    """Tab-separated rows `n  n_1 ... n_m`."""
    return "\n".join("\t".join(str(v) for v in (n,) + tuple(witness)) for n, witness in solutions)


def _map_piece(desc: ReturnSetDesc, modulus: int, offset: int) -> ReturnSetDesc:
    """Carry a description of {k} back to n = modulus * k + offset."""
    if modulus == 1 and offset == 0:
        return desc
    mapped = ReturnSetDesc(desc.p)
    mapped.aps = [ArithProg(modulus * ap.modulus, modulus * ap.offset + offset) for ap in desc.aps]
    for pset in desc.psets:
        moving = [(modulus * c, k) for c, k in pset.terms if k > 0]
        constant = sum((c for c, k in pset.terms if k == 0), Fraction(0))
        terms = moving + [(modulus * constant + offset, 0)]
        mapped.psets.append(PSet(terms))
    mapped.exceptional = [modulus * k + offset for k in desc.exceptional]
    return mapped


def _select_path(inst: PexpInstance) -> tuple[str, Optional[str]]:
    roots = lrs_char_roots(inst.u)
    verdicts = lrs_root_p_dependence(roots, inst.p)
    if roots.is_fully_resolved() and all(v.status == "independent" for v in verdicts):
        return "A", "ap-only"
    if inst.pset().nontrivial_count <= 2:
        return "B", "two-term"
    return "fallback", None


def _exceptional_only(p: PrimeModulus, hits: set, n_max: int, notes: list) -> ReturnSetDesc:
    desc = ReturnSetDesc(p.p, exceptional=sorted(hits), notes=notes)
    desc_verify(desc, hits.__contains__, n_max)
    return desc


def pexp_classify(
    inst: PexpInstance,
    n_max: int,
    cyclotomic_bound: int = DEFAULT_CYCLOTOMIC_BOUND,
    period_cap: int = DEFAULT_PERIOD_CAP,
) -> ReturnSetDesc:
    """
    Describe the solution set on [0, n_max] as progressions, p-sets and exceptions.

    The recurrence is split into non-degenerate subsequences first; each piece is fitted
    in its own index and mapped back. The result always passes desc_verify at n_max.
    """
    if not inst.terms:
        desc = ReturnSetDesc(inst.p.p, aps=[ArithProg(1, 0)], notes=["void equation"])
        desc_verify(desc, lambda n: True, n_max)
        return desc
    hits = {n for n, _ in pexp_solve(inst, n_max)}
    try:
        pieces = lrs_nondegenerate_split(inst.u, cyclotomic_bound)
    except UnsupportedError as exc:
        logging.warning(f"Falling back to the raw solution list: {exc}")
        return _exceptional_only(inst.p, hits, n_max, ["path fallback", f"unsupported: {exc}"])
    path, shape = _select_path(inst)
    if shape is None:
        logging.info("More than two moving terms on a non-A instance; reporting raw solutions.")
        return _exceptional_only(inst.p, hits, n_max, ["path fallback", "more than two moving terms"])
    pset = inst.pset()
    zero_representable = pset_membership(0, pset, inst.p) is not None
    desc = ReturnSetDesc(inst.p.p, notes=[f"path {path}", f"split modulus {pieces[0][0]}"])
    for modulus, offset, _ in pieces:
        if offset > n_max:
            continue
        if lrs_zero_progression_certify(inst.u, modulus, offset):
            if zero_representable:
                desc.aps.append(ArithProg(modulus, offset))
            continue
        bound = (n_max - offset) // modulus
        local = {(n - offset) // modulus for n in hits if n >= offset and (n - offset) % modulus == 0}
        fitted = fit_description(local, inst.p, bound, shape=shape, period_cap=period_cap)
        mapped = _map_piece(fitted, modulus, offset)
        desc.aps.extend(mapped.aps)
        desc.psets.extend(mapped.psets)
        desc.exceptional.extend(mapped.exceptional)
    desc.exceptional.sort()
    if desc_verify(desc, hits.__contains__, n_max):
        return desc
    logging.info(f"Fitted description failed verification on [0, {n_max}]; reporting raw solutions.")
    return _exceptional_only(inst.p, hits, n_max, [f"path {path}", "fit rejected"])


def _closed_form(part: Lrs, p: PrimeModulus) -> Optional[list]:
    """
    p-set terms equal to the part when its roots are 1 and one p^b, both simple.

    :return: list of (coefficient, step) with step 0 for the constant, or None
    """
    roots, rest = integer_roots(part.char_poly())
    if len(rest) != 1 or any(mult != 1 for _, mult in roots):
        return None
    values = [root for root, _ in roots]
    powers = []
    for root in values:
        if root == 1:
            continue
        exponent, rest_value = 0, root
        while rest_value > 1 and rest_value % p.p == 0:
            rest_value //= p.p
            exponent += 1
        if rest_value != 1 or exponent == 0:
            return None
        powers.append(exponent)
    if len(powers) != 1:
        return None
    step = powers[0]
    first, second = lrs_terms(part, 2)
    if 1 in values:
        beta = Fraction(second - first, p.p**step - 1)
        alpha = first - beta
    else:
        beta, alpha = Fraction(first), Fraction(0)
    check = lrs_terms(part, part.order + 2)
    if any(alpha + beta * p.p ** (step * k) != v for k, v in enumerate(check)):
        return None
    return [(beta, step), (alpha, 0)]


def _search_cap(values: Sequence[int], p: PrimeModulus) -> int:
    largest = max((abs(v) for v in values), default=0)
    levels = 0
    power = 1
    while power < 1 + largest:
        power *= p.p
        levels += 1
    return 4 * levels + 16


def _window_conclusive(windows: list, target: int, constant: Fraction, has_converted: bool) -> bool:
    """True when every searched part has outgrown anything the other summands could cancel."""
    if has_converted:
        return False
    peaks = [max(abs(v) for v in window) for window in windows]
    for i, window in enumerate(windows):
        slack = abs(target) + abs(constant) + sum(peak for j, peak in enumerate(peaks) if j != i)
        tail = [abs(v) for v in window[-4:]]
        if tail != sorted(tail) or tail[-1] <= slack:
            return False
    return True


def farith_solve(seq: FArithSeq, n_max: int) -> FArithResult:
    """
    All n = ak + b <= n_max where U_n splits as a sum of part values.

    Parts with roots 1 and p^b become p-set terms; the rest are searched up to a cap, and n
    whose search could not be closed by a growth argument are reported as undecided.
    """
    a, b = seq.ap.modulus, seq.ap.offset
    indices = ([b] if b <= n_max else []) if a == 0 else list(range(b, n_max + 1, a))
    if not seq.parts:
        return FArithResult(indices, [])
    if not indices:
        return FArithResult()
    values = lrs_terms(seq.U, indices[-1] + 1)
    constant = Fraction(sum(part.initial[0] for part in seq.trivial_parts()))
    converted, searched = [], []
    for part in seq.nontrivial_parts():
        terms = _closed_form(part, seq.p)
        if terms is None:
            searched.append(part)
        else:
            converted.extend(terms)
    moving = [(c, k) for c, k in converted if k > 0 and c != 0]
    constant += sum((c for c, k in converted if k == 0), Fraction(0))
    pset = PSet(moving + [(constant, 0)]) if moving else None
    cap = _search_cap([values[n] for n in indices], seq.p)
    windows = [lrs_terms(part, cap + 1) for part in searched]
    if searched:
        logging.info(f"Searching {len(searched)} unconverted parts up to index {cap}.")
    result = FArithResult()
    for n in indices:
        target = values[n]
        found = False
        for choice in product(*windows):
            rest = target - sum(choice)
            if pset is None:
                found = rest == constant
            else:
                found = pset_membership(rest, pset, seq.p) is not None
            if found:
                break
        if found:
            result.solutions.append(n)
        elif searched and not _window_conclusive(windows, target, constant, pset is not None):
            result.undecided.append(n)
    if result.undecided:
        logging.warning(f"Nested search hit its cap for {len(result.undecided)} indices.")
    return result


def general_farith_intersect(seqs: Sequence[FArithSeq], n_max: int) -> FArithResult:
    """Intersection of several F-arithmetic solution sets; an index stays undecided if no sequence rules it out."""
    if not seqs:
        raise DomainError("Intersection needs at least one sequence.")
    results = [farith_solve(seq, n_max) for seq in seqs]
    solved = [set(r.solutions) for r in results]
    open_sets = [set(r.solutions) | set(r.undecided) for r in results]
    solutions = set.intersection(*solved)
    undecided = set.intersection(*open_sets) - solutions
    return FArithResult(sorted(solutions), sorted(undecided))

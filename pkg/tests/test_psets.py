import random
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from backend_operations.errors import ParseError, UnsupportedError
from backend_operations.exact_arith import PrimeModulus
from backend_operations.psets import (
    ArithProg,
    PSet,
    ReturnSetDesc,
    ap_intersect_pset,
    desc_from_document,
    desc_to_document,
    desc_verify,
    fit_description,
    format_pset,
    parse_pset,
    pset_enumerate,
    pset_intersect_bounded,
    pset_membership,
    _solve3,
)


def brute_force_witness(target: int, pset: PSet, p: int, levels: int):
    """Lexicographically least exponent tuple with every k_j n_j <= levels, or None."""
    ranges = [range(levels // k + 1) if k else range(1) for _, k in pset.terms]
    values = [[c * p ** (k * n) for n in r] for (c, k), r in zip(pset.terms, ranges)]
    for witness in product(*ranges):
        if sum(column[n] for column, n in zip(values, witness)) == target:
            return witness
    return None


def oracle_levels(p: int, limit: int) -> int:
    levels = 0
    while p**levels <= limit:
        levels += 1
    return levels + 8


def brute_force_elements(pset: PSet, p: int, bound: int) -> set:
    """Values of sum c_j p^(k_j n_j) in [0, bound] over every exponent tuple up to oracle_levels."""
    levels = oracle_levels(p, bound)
    ranges = [range(levels // k + 1) if k else range(1) for _, k in pset.terms]
    columns = [[c * p ** (k * n) for n in r] for (c, k), r in zip(pset.terms, ranges)]
    found = set()
    for row in product(*columns):
        value = sum(row)
        if value.denominator == 1 and 0 <= value <= bound:
            found.add(int(value))
    return found


def test_membership_examples(f3, f5):
    two_powers = PSet(((1, 1), (1, 1)))
    assert pset_membership(4, two_powers, f3) == (0, 1)
    assert pset_membership(5, two_powers, f3) is None
    assert pset_membership(3, PSet(((2, 0), (1, 1))), f5) == (0, 0)


def test_membership_with_negative_coefficients(f3):
    difference = PSet(((2, 1), (-1, 1)))
    for n in range(6):
        assert pset_membership(3**n, difference, f3) is not None
    assert pset_membership(-1, PSet(((1, 1),)), f3) is None


def test_membership_with_fractional_coefficients(f3):
    half = PSet(((Fraction(1, 2), 1), (Fraction(1, 2), 0)))
    assert pset_membership(5, half, f3) == (2, 0)
    assert pset_membership(4, half, f3) is None


def test_enumerate_examples(f5):
    assert pset_enumerate(PSet(((1, 1), (1, 1))), f5, 30) == [2, 6, 10, 26, 30]
    assert pset_enumerate(PSet(((3, 2),)), f5, 100) == [3, 75]
    assert pset_enumerate(PSet(((7, 0), (1, 1))), f5, 7) == []


def test_ap_intersection_examples(f3):
    powers = PSet(((1, 1),))
    assert ap_intersect_pset(ArithProg(2, 0), powers, f3) == []
    odd = ap_intersect_pset(ArithProg(2, 1), powers, f3)
    assert set().union(*(pset_enumerate(s, f3, 1000) for s in odd)) == {1, 3, 9, 27, 81, 243, 729}
    assert ap_intersect_pset(ArithProg(0, 10), PSet(((1, 0), (1, 1))), f3) == [PSet(((10, 0),))]
    assert ap_intersect_pset(ArithProg(0, 11), PSet(((1, 0), (1, 1))), f3) == []


def test_ap_intersection_above_offset(f3):
    pieces = ap_intersect_pset(ArithProg(4, 6), PSet(((1, 1), (1, 1))), f3)
    elements = set().union(*(pset_enumerate(s, f3, 2000) for s in pieces))
    expected = {n for n in pset_enumerate(PSet(((1, 1), (1, 1))), f3, 2000) if n >= 6 and n % 4 == 2}
    assert elements == expected


def test_ap_intersection_rejects_mixed_signs_above_offset(f3):
    with pytest.raises(UnsupportedError):
        ap_intersect_pset(ArithProg(2, 7), PSet(((2, 1), (-1, 1))), f3)


def test_bounded_intersection(f3):
    powers = PSet(((1, 1),))
    assert pset_intersect_bounded(powers, powers, f3, 500)[1] == [powers]
    difference = PSet(((2, 1), (-1, 1)))
    elements, option = pset_intersect_bounded(powers, difference, f3, 100)
    assert elements == [1, 3, 9, 27, 81]
    assert option == [powers]
    elements, option = pset_intersect_bounded(PSet(((1, 0),)), PSet(((2, 0),)), f3, 100)
    assert elements == []
    assert option == []


def test_desc_verify():
    exact = ReturnSetDesc(5, exceptional=[1, 3, 8])
    assert desc_verify(exact, {1, 3, 8}.__contains__, 50)
    assert exact.verified_bound == 50
    missing = ReturnSetDesc(5, exceptional=[1, 3])
    assert not desc_verify(missing, {1, 3, 8}.__contains__, 50)
    assert missing.verified_bound is None
    evens = ReturnSetDesc(5, aps=[ArithProg(2, 0)])
    assert desc_verify(evens, lambda n: n % 2 == 0, 10**4)


def test_fit_description_finds_progressions_and_psets(f5):
    evens = fit_description(range(0, 1001, 2), f5, 1000)
    assert evens.aps == [ArithProg(2, 0)]
    assert evens.exceptional == []
    sums = pset_enumerate(PSet(((1, 1), (1, 1))), f5, 3125)
    fitted = fit_description(sums, f5, 3125)
    assert desc_verify(fitted, set(sums).__contains__, 3125)
    assert fitted.has_nontrivial_pset()


def test_fit_description_accepts_signed_coefficients(f5):
    differences = pset_enumerate(PSet(((1, 1), (-1, 1))), f5, 700)
    assert differences == [0, 4, 20, 24, 100, 120, 124, 500, 600, 620, 624]
    fitted = fit_description(differences, f5, 700)
    assert fitted.aps == []
    assert fitted.exceptional == []
    assert len(fitted.psets) == 1
    assert pset_enumerate(fitted.psets[0], f5, 700) == differences
    assert sorted(c for c, k in fitted.psets[0].terms if k > 0) == [-1, 1]


def test_three_point_solver():
    assert _solve3(5, (1, 1), ((0, 0), (1, 0), (2, 1)), (0, 4, 20)) == [0, 1, -1]
    assert _solve3(3, (1, 2), ((0, 0), (1, 0), (0, 1)), (3, 5, 11)) == [1, 1, 1]
    # columns for d0 and d2 coincide when j stays 0
    assert _solve3(5, (1, 1), ((0, 0), (1, 0), (2, 0)), (0, 4, 24)) is None


def test_text_and_document_formats(f5):
    pset = PSet(((Fraction(3, 2), 1), (-1, 2), (4, 0)))
    assert format_pset(pset) == "3/2*p^(1*n_1)+-1*p^(2*n_2)+4*p^(0*n_3)"
    assert parse_pset(format_pset(pset)) == pset
    with pytest.raises(ParseError):
        parse_pset("3*p^(1*n_2)")
    desc = ReturnSetDesc(5, aps=[ArithProg(4, 1)], psets=[pset], exceptional=[2], verified_bound=40, notes=["x"])
    assert desc_from_document(desc_to_document(desc)) == desc


def _random_pset(rng: random.Random, mixed: bool, max_moving: int) -> PSet:
    terms = []
    for _ in range(rng.randint(1, max_moving)):
        c = rng.randint(1, 6)
        if mixed and rng.random() < 0.5:
            c = -c
        terms.append((c, rng.randint(1, 3)))
    if rng.random() < 0.3:
        terms.append((rng.randint(-6, 6), 0))
    return PSet(tuple(terms))


@pytest.mark.slow
def test_membership_agrees_with_exhaustive_search():
    rng = random.Random(20240611)
    disagreements = []
    for _ in range(100):
        p = rng.choice([2, 3, 5, 7, 11])
        modulus = PrimeModulus(p)
        pset = _random_pset(rng, mixed=True, max_moving=3)
        levels = oracle_levels(p, 10**5)
        for _ in range(10):
            target = rng.randint(0, 10**5)
            witness = pset_membership(target, pset, modulus)
            expected = brute_force_witness(target, pset, p, levels)
            if witness is not None:
                value = sum(c * p ** (k * n) for (c, k), n in zip(pset.terms, witness))
                if value != target or (expected is not None and witness > expected):
                    disagreements.append((p, pset, target, witness, expected))
            elif expected is not None:
                disagreements.append((p, pset, target, witness, expected))
    assert disagreements == []


@pytest.mark.slow
def test_ap_intersection_matches_brute_force():
    rng = random.Random(7)
    bound = 10**5
    disagreements = []
    for _ in range(100):
        p = rng.choice([2, 3, 5, 7])
        modulus = PrimeModulus(p)
        a = rng.randint(1, 6)
        mixed = rng.random() < 0.5
        b = rng.randrange(a) if mixed else rng.randint(0, 3 * a)
        pset = _random_pset(rng, mixed=mixed, max_moving=2 if mixed else 3)
        ap = ArithProg(a, b)
        pieces = ap_intersect_pset(ap, pset, modulus)
        found = set()
        for piece in pieces:
            found.update(pset_enumerate(piece, modulus, bound))
        expected = {n for n in brute_force_elements(pset, p, bound) if ap.contains(n)}
        if found != expected:
            disagreements.append((p, ap, pset))
    assert disagreements == []


@settings(max_examples=50)
@given(
    p=st.sampled_from([2, 3, 5]),
    exps=st.lists(st.integers(min_value=0, max_value=6), min_size=2, max_size=2),
    coeffs=st.lists(st.integers(min_value=1, max_value=4), min_size=2, max_size=2),
)
def test_constructed_members_are_found(p, exps, coeffs):
    pset = PSet(tuple((c, 1) for c in coeffs))
    target = sum(c * p**n for c, n in zip(coeffs, exps))
    witness = pset_membership(target, pset, PrimeModulus(p))
    assert witness is not None
    assert sum(c * p**n for c, n in zip(coeffs, witness)) == target
    assert witness <= tuple(exps)

import random

import pytest

from backend_operations.errors import DomainError
from backend_operations.exact_arith import PrimeModulus
from backend_operations.lrs import Lrs, lrs_terms
from backend_operations.pexp import PexpInstance, pexp_solve
from backend_operations.psets import PSet, pset_enumerate
from backend_operations.torus import TorusInstance, full_pipeline, return_set, selfmap_iterate
from backend_operations.constructions import (
    build_pset_variety,
    dml_instance,
    encode_lrs,
    encoding_exponents,
    exponent_set,
    vandermonde_inverse,
)

NATURALS = Lrs((1, -2), (0, 1))


@pytest.fixture(scope="module")
def two_powers_of_five():
    return build_pset_variety(PrimeModulus(5), (1, 1))


@pytest.fixture(scope="module")
def power_plus_double_power_of_seven():
    return build_pset_variety(PrimeModulus(7), (1, 2))


def test_vandermonde_inverse_small_case():
    assert vandermonde_inverse(PrimeModulus(3)) == ((2, 2), (2, 1))
    with pytest.raises(DomainError):
        vandermonde_inverse(PrimeModulus(2))


@pytest.mark.parametrize("p", [3, 5, 7, 11])
def test_vandermonde_identity(p):
    inverse = vandermonde_inverse(PrimeModulus(p))
    for k, row in enumerate(inverse):
        for j in range(2 * (p - 1) + 1):
            value = sum(entry * pow(a, j, p) for a, entry in enumerate(row, start=1)) % p
            assert value == (1 if j % (p - 1) == k else 0)


def test_pset_variety_membership(two_powers_of_five, power_plus_double_power_of_seven):
    assert two_powers_of_five.multiple_in_variety(6)
    assert not two_powers_of_five.multiple_in_variety(7)
    assert not two_powers_of_five.multiple_in_variety(-1)
    assert power_plus_double_power_of_seven.multiple_in_variety(15)
    assert not power_plus_double_power_of_seven.multiple_in_variety(-1)
    assert two_powers_of_five.pset_terms() == ((1, 1), (1, 1))
    assert two_powers_of_five.level == 2


def test_pset_variety_rejects_bad_multiplicities(f5):
    with pytest.raises(DomainError):
        build_pset_variety(f5, (2, 2))
    with pytest.raises(DomainError):
        build_pset_variety(f5, (0, 1))
    with pytest.raises(DomainError):
        build_pset_variety(f5, ())


def test_exponent_set_examples(two_powers_of_five, power_plus_double_power_of_seven):
    assert exponent_set(two_powers_of_five, 30) == [2, 6, 10, 26, 30]
    assert exponent_set(two_powers_of_five, 1) == []
    # 21 = 7 + 2 * 7 also belongs
    assert exponent_set(power_plus_double_power_of_seven, 25) == [3, 9, 15, 21]
    with pytest.raises(DomainError):
        exponent_set(two_powers_of_five, -1)


def test_digit_decision_matches_exact_evaluation(two_powers_of_five, power_plus_double_power_of_seven):
    for m in range(-3, 160):
        assert two_powers_of_five.digit_member(m) == two_powers_of_five.multiple_in_variety(m), m
    for m in range(0, 120):
        assert power_plus_double_power_of_seven.digit_member(m) == power_plus_double_power_of_seven.multiple_in_variety(m), m


def test_encoding_examples(f5, fibonacci, three_pow_minus_two):
    base = f5.ratfunc([1, 1])
    encoding = encode_lrs(fibonacci, base)
    assert encoding.dimension == 2
    assert encoding.pi_exponents == (1, 0)
    sixth = selfmap_iterate(encoding.selfmap, encoding.Q, 6)
    assert encoding.project(sixth) == base**8
    assert encoding_exponents(encoding, 10) == lrs_terms(fibonacci, 11)
    constant = encode_lrs(Lrs((-1,), (7,)), base)
    assert constant.phi_matrix == ((1,),)
    assert constant.Q.coords == (base**7,)
    assert encoding_exponents(encode_lrs(three_pow_minus_two, base), 3)[3] == 25
    with pytest.raises(DomainError):
        encode_lrs(fibonacci, f5.constant(0))


def test_encoding_identity_for_random_recurrences():
    rng = random.Random(99)
    for _ in range(20):
        modulus = PrimeModulus(rng.choice([3, 5]))
        order = rng.randint(1, 4)
        u = Lrs([rng.randint(-3, 3) for _ in range(order)], [rng.randint(-5, 5) for _ in range(order)])
        base = modulus.ratfunc([rng.randrange(1, modulus.p), 1, rng.randrange(modulus.p)])
        assert encoding_exponents(encode_lrs(u, base), 25) == lrs_terms(u, 26)


def test_dml_instance_for_naturals(f5):
    instance = dml_instance(NATURALS, f5, (1, 1))
    assert instance.selfmap.dimension == 8
    assert instance.lifted_return_set(40) == [2, 6, 10, 26, 30]
    assert instance.return_set(30) == [2, 6, 10, 26, 30]


def test_dml_instance_for_constant_member(f5):
    instance = dml_instance(Lrs((-1,), (2,)), f5, (1, 1))
    assert instance.lifted_return_set(12) == list(range(13))


def test_dml_instance_replays_through_torus_document(f5):
    generated = dml_instance(NATURALS, f5, (1, 1)).to_torus_instance(30)
    replayed = TorusInstance.from_document(generated.to_document())
    assert return_set(replayed.selfmap, replayed.alpha, replayed.variety, replayed.n_max) == [2, 6, 10, 26, 30]


@pytest.mark.slow
def test_full_pipeline_recovers_the_pset_of_a_generated_instance(f5):
    generated = dml_instance(NATURALS, f5, (1, 1)).to_torus_instance(140)
    desc = full_pipeline(generated.selfmap, generated.alpha, generated.variety, generated.n_max)
    assert "obstruction obstructed(1, 0)" in desc.notes
    assert desc.aps == []
    assert desc.exceptional == []
    assert desc.has_nontrivial_pset()
    assert sorted(desc.enumerate(140)) == pset_enumerate(PSet(((1, 1), (1, 1))), f5, 140)
    assert desc.verified_bound == 140


@pytest.mark.slow
def test_exponent_set_matches_enumeration_for_two_powers(two_powers_of_five, f5):
    expected = pset_enumerate(PSet(((1, 1), (1, 1))), f5, 3125)
    assert exponent_set(two_powers_of_five, 3125) == expected
    assert 3126 not in expected


@pytest.mark.slow
def test_exponent_set_matches_enumeration_with_multiplicities(power_plus_double_power_of_seven):
    f7 = PrimeModulus(7)
    expected = pset_enumerate(PSet(((1, 1), (2, 1))), f7, 7**4)
    assert exponent_set(power_plus_double_power_of_seven, 7**4) == expected


@pytest.mark.slow
@pytest.mark.parametrize("u", [Lrs((-1, -1), (0, 1)), Lrs((3, -4), (-1, 1))], ids=["fibonacci", "three_pow_minus_two"])
def test_orbit_returns_match_exponential_equation(u, f5):
    instance = dml_instance(u, f5, (1, 1))
    solutions = [n for n, _ in pexp_solve(PexpInstance(u, f5, ((1, 1), (1, 1))), 40)]
    assert instance.lifted_return_set(40) == solutions

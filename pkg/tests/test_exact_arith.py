import pytest
from hypothesis import given, settings, strategies as st

from backend_operations.errors import DomainError, ParseError, ResourceCapError, UsageError
from backend_operations.exact_arith import (
    PrimeModulus,
    format_ratfunc,
    frobenius_power,
    parse_ratfunc,
    poly_divmod,
    poly_gcd,
    poly_int_pow,
    ratfunc_int_pow,
    ratfunc_normalize,
    set_degree_cap,
)


def test_prime_modulus_rejects_composites():
    with pytest.raises(DomainError):
        PrimeModulus(6)
    with pytest.raises(DomainError):
        PrimeModulus(1)


def test_field_operations(f5):
    assert f5.element(2).inverse() == f5.element(3)
    assert PrimeModulus(7).element(3) ** 6 == PrimeModulus(7).element(1)
    assert f5.element(4) + f5.element(4) == f5.element(3)


def test_zero_has_no_inverse(f5):
    with pytest.raises(DomainError):
        f5.element(0).inverse()


def test_mixed_moduli_are_rejected(f3, f5):
    with pytest.raises(UsageError):
        f5.element(1) + f3.element(1)
    with pytest.raises(UsageError):
        f5.poly([1, 1]) * f3.poly([1, 1])


def test_gcd_is_monic(f5):
    assert poly_gcd(f5.poly([-1, 0, 1]), f5.poly([-1, 1])) == f5.poly([4, 1])
    assert poly_gcd(f5.poly([-2, 0, 2]), f5.poly([-3, 3])).leading() == 1


def test_poly_product_and_division():
    f3 = PrimeModulus(3)
    assert f3.poly([1, 1]) * f3.poly([2, 1]) == f3.poly([2, 0, 1])
    f2 = PrimeModulus(2)
    quot, rem = poly_divmod(f2.poly([0, 0, 0, 1]), f2.poly([1, 1]))
    assert quot == f2.poly([1, 1, 1])
    assert rem == f2.poly([1])


def test_division_by_zero_polynomial(f5):
    with pytest.raises(DomainError):
        divmod(f5.poly([1, 1]), f5.poly([]))


def test_normalize_cancels_and_makes_monic(f5, f3):
    assert ratfunc_normalize(f5.poly([2, 2]), f5.poly([1, 1])) == f5.ratfunc([2])
    x = ratfunc_normalize(f5.poly([-1, 0, 1]), f5.poly([-2, 2]))
    assert x.num == f5.poly([3, 3])
    assert x.den.is_one()
    assert ratfunc_normalize(f3.poly([0, 1]), f3.poly([0, 2])) == f3.ratfunc([2])


def test_zero_denominator(f5):
    with pytest.raises(DomainError):
        ratfunc_normalize(f5.poly([1]), f5.poly([0]))


def test_frobenius_power(f5, f3):
    image = frobenius_power(f5.ratfunc([1, 1]), 2)
    assert image == f5.ratfunc([1] + [0] * 24 + [1])
    x = f5.ratfunc([3, 1], [1, 0, 1])
    assert frobenius_power(x, 0) == x
    assert frobenius_power(f3.ratfunc([1, 2]), 1) == f3.ratfunc([1, 0, 0, 2])


def test_frobenius_power_matches_plain_power(f3):
    x = f3.ratfunc([1, 2, 1], [2, 1])
    assert frobenius_power(x, 2) == ratfunc_int_pow(x, 9, strategy="binary")


def test_powers(f5):
    base = f5.ratfunc([1, 1])
    expected = f5.ratfunc([1, 1]) * f5.ratfunc([1] + [0] * 24 + [1])
    assert ratfunc_int_pow(base, 26) == expected
    assert ratfunc_int_pow(base, 26, strategy="binary") == expected
    assert ratfunc_int_pow(base, 0).is_one()
    assert ratfunc_int_pow(base, -1) == f5.ratfunc([1], [1, 1])


def test_zero_to_negative_power(f5):
    with pytest.raises(DomainError):
        ratfunc_int_pow(f5.constant(0), -2)


def test_degree_cap_is_enforced(f5):
    set_degree_cap(10)
    with pytest.raises(ResourceCapError):
        poly_int_pow(f5.poly([1, 1]), 20)


def test_ratfunc_text_format(f5):
    x = f5.ratfunc([3, 1], [1, 0, 1])
    assert format_ratfunc(x) == "3,1/1,0,1"
    assert parse_ratfunc("3,1/1,0,1", f5) == x
    assert parse_ratfunc("2", f5) == f5.constant(2)
    with pytest.raises(ParseError):
        parse_ratfunc("1/0", f5)
    with pytest.raises(ParseError):
        parse_ratfunc("1,,2", f5)


polys = st.lists(st.integers(min_value=0, max_value=6), min_size=1, max_size=4)


@settings(max_examples=40)
@given(p=st.sampled_from([2, 3, 5, 7]), num=polys, den=polys, m=st.integers(min_value=-12, max_value=40))
def test_power_strategies_agree(p, num, den, m):
    modulus = PrimeModulus(p)
    if not any(c % p for c in den) or not any(c % p for c in num):
        return
    x = modulus.ratfunc(num, den)
    assert ratfunc_int_pow(x, m) == ratfunc_int_pow(x, m, strategy="binary")


@settings(max_examples=40)
@given(p=st.sampled_from([3, 5, 7]), a=polys, b=polys, c=polys)
def test_field_laws(p, a, b, c):
    modulus = PrimeModulus(p)
    x, y, z = modulus.ratfunc(a), modulus.ratfunc(b), modulus.ratfunc(c, [1, 1])
    assert (x + y) * z == x * z + y * z
    assert x * y == y * x
    if not y.is_zero():
        assert (x / y) * y == x

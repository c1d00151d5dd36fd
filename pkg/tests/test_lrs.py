import pytest
from hypothesis import given, settings, strategies as st

from backend_operations.errors import DomainError, ParseError, UnsupportedError
from backend_operations.exact_arith import PrimeModulus
from backend_operations.lrs import (
    Lrs,
    format_lrs,
    lrs_char_roots,
    lrs_eval,
    lrs_nondegenerate_split,
    lrs_root_p_dependence,
    lrs_subsequence,
    lrs_terms,
    lrs_zero_progression_certify,
    parse_lrs,
)


def test_evaluation(fibonacci, three_pow_minus_two):
    assert lrs_eval(fibonacci, 10) == 55
    assert lrs_eval(three_pow_minus_two, 3) == 25
    assert all(lrs_eval(Lrs((-1,), (7,)), n) == 7 for n in range(20))


def test_large_index_uses_matrix_power(fibonacci):
    terms = lrs_terms(fibonacci, 401)
    assert lrs_eval(fibonacci, 400) == terms[400]


def test_initial_terms_must_match_order():
    with pytest.raises(DomainError):
        Lrs((1, 2), (0,))
    with pytest.raises(DomainError):
        lrs_eval(Lrs((-1,), (1,)), -1)


def test_subsequence_examples(fibonacci):
    even = lrs_subsequence(fibonacci, 2, 0)
    assert even.rec_coeffs == (1, -3)
    assert even.initial == (0, 1)
    assert lrs_eval(even, 3) == 8
    assert lrs_eval(even, 3) == lrs_eval(fibonacci, 6)
    assert lrs_subsequence(fibonacci, 1, 0) == fibonacci
    twos = Lrs((-2,), (1,))
    sub = lrs_subsequence(twos, 3, 1)
    assert sub.rec_coeffs == (-8,)
    assert sub.initial == (2,)
    assert [lrs_eval(sub, k) for k in range(5)] == [2 * 8**k for k in range(5)]


def test_zero_progression_certificate():
    alternating = Lrs((-1, 0), (0, 2))
    assert lrs_zero_progression_certify(alternating, 2, 0)
    assert not lrs_zero_progression_certify(alternating, 2, 1)
    zero = Lrs((1, -3), (0, 0))
    assert lrs_zero_progression_certify(zero, 5, 3)


def test_char_roots(fibonacci, three_pow_minus_two):
    roots = lrs_char_roots(three_pow_minus_two)
    assert roots.integer_roots == ((1, 1), (3, 1))
    assert roots.is_fully_resolved()
    fib_roots = lrs_char_roots(fibonacci)
    assert fib_roots.integer_roots == ()
    assert fib_roots.unresolved_factor == (-1, -1, 1)
    square = lrs_char_roots(Lrs((4, -4), (1, 2)))
    assert square.integer_roots == ((2, 2),)
    assert square.reconstruct() == (4, -4, 1)


def test_nondegenerate_split():
    u = Lrs((-4, 0), (2, 0))
    pieces = lrs_nondegenerate_split(u)
    assert [(m, l) for m, l, _ in pieces] == [(2, 0), (2, 1)]
    even = pieces[0][2]
    assert lrs_terms(even, 5) == [2 * 4**k for k in range(5)]
    assert lrs_zero_progression_certify(u, 2, 1)
    assert [(m, l) for m, l, _ in lrs_nondegenerate_split(Lrs((3, -4), (-1, 1)))] == [(1, 0)]
    assert [(m, l) for m, l, _ in lrs_nondegenerate_split(Lrs((-1,), (4,)))] == [(1, 0)]


def test_split_separates_parity_for_a_minus_one_root():
    # 2^n + (-1)^n
    u = Lrs((-2, -1), (2, 1))
    pieces = lrs_nondegenerate_split(u)
    assert [(m, l) for m, l, _ in pieces] == [(2, 0), (2, 1)]
    assert lrs_terms(pieces[0][2], 4) == [4**k + 1 for k in range(4)]
    assert lrs_terms(pieces[1][2], 4) == [2 * 4**k - 1 for k in range(4)]

    alternating = lrs_nondegenerate_split(Lrs((1,), (1,)))
    assert [(m, l) for m, l, _ in alternating] == [(2, 0), (2, 1)]
    assert [lrs_terms(sub, 3) for _, _, sub in alternating] == [[1, 1, 1], [-1, -1, -1]]


def test_split_handles_cyclotomic_factors():
    # 0, 1, 2 repeating; characteristic x^3 - 1
    u = Lrs((-1, 0, 0), (0, 1, 2))
    pieces = lrs_nondegenerate_split(u)
    assert [m for m, _, _ in pieces] == [3, 3, 3]
    assert [lrs_terms(sub, 4) for _, _, sub in pieces] == [[0] * 4, [1] * 4, [2] * 4]


def test_split_rejects_irrational_roots(fibonacci):
    with pytest.raises(UnsupportedError):
        lrs_nondegenerate_split(fibonacci)


def test_root_p_dependence():
    f5 = PrimeModulus(5)
    roots = lrs_char_roots(Lrs((75, -28), (0, 1)))  # (x - 3)(x - 25)
    verdicts = {v.root: v for v in lrs_root_p_dependence(roots, f5)}
    assert verdicts[3].status == "independent"
    assert verdicts[25].status == "dependent"
    assert verdicts[25].exponent == 2
    negative = lrs_root_p_dependence(lrs_char_roots(Lrs((5,), (1,))), f5)
    assert negative[0].status == "dependent"
    assert negative[0].sign == -1
    assert lrs_root_p_dependence(lrs_char_roots(Lrs((-1, -1), (0, 1))), f5)[-1].status == "unknown"


def test_text_format(fibonacci):
    assert format_lrs(fibonacci) == "2;-1,-1;0,1"
    assert parse_lrs("2;-1,-1;0,1") == fibonacci
    with pytest.raises(ParseError):
        parse_lrs("3;-1,-1;0,1")
    with pytest.raises(ParseError):
        parse_lrs("2;a,b;0,1")


recurrences = st.integers(min_value=1, max_value=4).flatmap(
    lambda d: st.tuples(
        st.lists(st.integers(min_value=-3, max_value=3), min_size=d, max_size=d),
        st.lists(st.integers(min_value=-5, max_value=5), min_size=d, max_size=d),
    )
)


@settings(max_examples=60)
@given(
    recurrence=recurrences,
    a=st.integers(min_value=1, max_value=5),
    b=st.integers(min_value=0, max_value=6),
)
def test_subsequence_agrees_with_direct_evaluation(recurrence, a, b):
    rec, initial = recurrence
    u = Lrs(rec, initial)
    sub = lrs_subsequence(u, a, b)
    terms = lrs_terms(u, a * 12 + b + 1)
    assert lrs_terms(sub, 12) == [terms[a * k + b] for k in range(12)]

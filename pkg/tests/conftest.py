import pytest
from hypothesis import HealthCheck, settings

from backend_operations.exact_arith import DEFAULT_DEGREE_CAP, PrimeModulus, set_degree_cap
from backend_operations.lrs import Lrs

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def restore_degree_cap():
    yield
    set_degree_cap(DEFAULT_DEGREE_CAP)


@pytest.fixture
def f5():
    return PrimeModulus(5)


@pytest.fixture
def f3():
    return PrimeModulus(3)


@pytest.fixture
def fibonacci():
    return Lrs((-1, -1), (0, 1))


@pytest.fixture
def three_pow_minus_two():
    """u_n = 3^n - 2, characteristic polynomial (x - 3)(x - 1)."""
    return Lrs((3, -4), (-1, 1))


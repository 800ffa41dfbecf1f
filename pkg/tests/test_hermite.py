import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import eval_hermitenorm

from hermite_sde.errors import ConfigurationError, DomainError
from hermite_sde.hermite import GaussianWeight, HermiteEval, eval_hermite, eval_hermite_row, generating_partial_sum

reals = st.floats(-4, 4, allow_nan=False)
times = st.floats(0, 3, allow_nan=False)


@pytest.mark.parametrize(
    "n, x, t, expected",
    [(2, 1.0, 1.0, 0.0), (3, 2.0, 1.0, 1 / 3), (4, 2.0, 0.0, 2 / 3), (0, 17.3, 5.0, 1.0)],
)
def test_eval_examples(n, x, t, expected):
    assert eval_hermite(n, x, t) == pytest.approx(expected, abs=1e-15)


def test_listed_low_orders(rng):
    x, t = rng.normal(size=20), rng.uniform(0, 2, 20)
    row = eval_hermite_row(4, x, t)
    np.testing.assert_allclose(row[2], x**2 / 2 - t / 2, atol=1e-14)
    np.testing.assert_allclose(row[3], x**3 / 6 - t * x / 2, atol=1e-14)
    np.testing.assert_allclose(row[4], x**4 / 24 - t * x**2 / 4 + t**2 / 8, atol=1e-14)


@pytest.mark.parametrize(
    "N, x, t, expected",
    [(2, 1.0, 1.0, [1, 1, 0]), (1, 0.0, 3.0, [1, 0]), (4, 2.0, 0.0, [1, 2, 2, 4 / 3, 2 / 3])],
)
def test_row_examples(N, x, t, expected):
    np.testing.assert_allclose(eval_hermite_row(N, x, t), expected, atol=1e-15)


def test_row_matches_scalar_eval():
    row = eval_hermite_row(10, 0.7, 0.3)
    assert all(row[n] == eval_hermite(n, 0.7, 0.3) for n in range(11))


@pytest.mark.parametrize(
    "lam, x, t, N, expected",
    [(0.0, 5.0, 2.0, 10, 1.0), (0.5, 1.0, 1.0, 30, math.exp(0.375)), (1.0, 0.0, 1.0, 30, math.exp(-0.5))],
)
def test_generating_function(lam, x, t, N, expected):
    assert generating_partial_sum(lam, x, t, N) == pytest.approx(expected, abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(x=reals, t=times)
def test_recursion_residual(x, t):
    N = 12
    r = eval_hermite_row(N, x, t)
    for n in range(1, N):
        resid = (n + 1) * r[n + 1] - x * r[n] + t * r[n - 1]
        scale = max(abs((n + 1) * r[n + 1]), abs(x * r[n]), abs(t * r[n - 1]), 1e-300)
        assert abs(resid) <= 1e-12 * scale + 1e-300


@settings(max_examples=200, deadline=None)
@given(x=reals, t=st.floats(0.01, 3))
def test_classical_scaling_identity(x, t):
    r = eval_hermite_row(12, x, t)
    for n in range(13):
        ref = t ** (n / 2) / math.factorial(n) * eval_hermitenorm(n, x / math.sqrt(t))
        assert r[n] == pytest.approx(ref, rel=1e-10, abs=1e-13)


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-2, 2), t=st.floats(0.2, 2))
def test_heat_equation_structure(x, t):
    d = 1e-4
    h = lambda n, xx, tt: eval_hermite(n, xx, tt)
    for n in range(12):
        dx = (h(n + 1, x + d, t) - h(n + 1, x - d, t)) / (2 * d)
        assert dx == pytest.approx(h(n, x, t), abs=1e-6)
        dt = (h(n, x, t + d) - h(n, x, t - d)) / (2 * d)
        dxx = (h(n, x + d, t) - 2 * h(n, x, t) + h(n, x - d, t)) / d**2
        assert dt == pytest.approx(-0.5 * dxx, abs=1e-6)


@pytest.mark.parametrize("x", [-1.5, 0.3, 2.0])
def test_small_time_continuity(x):
    for n in range(13):
        assert eval_hermite(n, x, 1e-12) == pytest.approx(x**n / math.factorial(n), rel=1e-9, abs=1e-15)


def test_vectorized_broadcast():
    out = eval_hermite_row(3, np.array([0.0, 1.0, 2.0]), 0.5)
    assert out.shape == (4, 3)


def test_domain_errors():
    ev = HermiteEval(5)
    with pytest.raises(DomainError):
        ev.eval(6, 0.0, 1.0)
    with pytest.raises(DomainError):
        ev.eval(2, 0.0, -0.1)
    with pytest.raises(DomainError):
        ev.eval(-1, 0.0, 1.0)


@pytest.mark.parametrize("bad", [-1, 41, 2.5, True])
def test_max_order_rejected(bad):
    with pytest.raises(ConfigurationError):
        HermiteEval(bad)


def test_default_max_order():
    assert HermiteEval().max_order == 32
    assert HermiteEval(40).max_order == 40


def test_gaussian_weight():
    w = GaussianWeight(0.7)
    x = np.linspace(-12, 12, 20001)
    assert np.trapezoid(w.density(x), x) == pytest.approx(1.0, abs=1e-10)
    assert GaussianWeight(0).is_point_mass
    with pytest.raises(DomainError):
        GaussianWeight(0).density(0.0)
    with pytest.raises(DomainError):
        GaussianWeight(-1)

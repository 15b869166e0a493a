import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from attnrmt import freeprob
from attnrmt.errors import InvalidInputError
from attnrmt.freeprob import MPFactor


@pytest.mark.parametrize("ell", [1, 2, 3, 7])
def test_fuss_catalan_k0(ell):
    assert freeprob.fuss_catalan(ell, 0) == 1


def test_catalan_numbers():
    assert [freeprob.fuss_catalan(1, k) for k in range(8)] == [1, 1, 2, 5, 14, 42, 132, 429]


def test_fuss_catalan_examples():
    assert freeprob.fuss_catalan(2, 2) == 3
    assert freeprob.fuss_catalan(2, 3) == 12
    for ell in range(1, 10):
        assert freeprob.fuss_catalan(ell, 2) == ell + 1


def test_fuss_catalan_is_exact_int_at_large_sizes():
    v = freeprob.fuss_catalan(5, 10)
    assert isinstance(v, int)
    assert v == math.comb(60, 10) // 51


def test_fuss_catalan_rejects_bad_args():
    with pytest.raises(InvalidInputError):
        freeprob.fuss_catalan(0, 2)
    with pytest.raises(InvalidInputError):
        freeprob.fuss_catalan(1, -1)


def test_single_mp_factor():
    p = freeprob.free_conv_moments([MPFactor(1.0, 1.0)])
    assert (p.mean, p.variance) == (1.0, 1.0)
    p = freeprob.free_conv_moments([MPFactor(0.3, 2.0)])
    assert p.mean == pytest.approx(4.0)
    assert p.variance == pytest.approx(0.3 * 16)


def test_factor_order_matters():
    a = freeprob.free_conv_moments([MPFactor(0.5, 1.0), MPFactor(1.0, 1.0)])
    b = freeprob.free_conv_moments([MPFactor(1.0, 1.0), MPFactor(0.5, 1.0)])
    assert a.variance == pytest.approx(1.0)
    assert b.variance == pytest.approx(1.5)


def test_empty_factors_and_bad_factor():
    with pytest.raises(InvalidInputError):
        freeprob.free_conv_moments([])
    with pytest.raises(InvalidInputError):
        MPFactor(1.5, 1.0)
    with pytest.raises(InvalidInputError):
        MPFactor(0.5, 0.0)


@pytest.mark.parametrize("ell,expected", [(1, (1.0, 2.0)), (2, (1.0, 4.0))])
def test_covariance_prediction_examples(ell, expected):
    p = freeprob.covariance_prediction(ell, 1.0, 1.0, 1.0)
    assert (p.mean, p.variance) == pytest.approx(expected)


@settings(max_examples=100, deadline=None)
@given(
    ell=st.integers(1, 5),
    sa=st.floats(0.2, 2.0),
    sv=st.floats(0.2, 2.0),
    gamma=st.floats(0.05, 1.0),
)
def test_covariance_agrees_with_free_product(ell, sa, sv, gamma):
    direct = freeprob.covariance_prediction(ell, sa, sv, gamma)
    conv = freeprob.free_conv_moments(freeprob.covariance_factors(ell, sa, sv, gamma))
    assert conv.mean == pytest.approx(direct.mean, rel=1e-12)
    assert conv.variance == pytest.approx(direct.variance, rel=1e-12)


def test_covariance_prediction_rejects_gamma():
    with pytest.raises(InvalidInputError):
        freeprob.covariance_prediction(1, 1.0, 1.0, 1.2)


@pytest.mark.parametrize("ell,expected", [(1, (1.0, 3.0)), (2, (1.0, 8.0))])
def test_jacobian_prediction_examples(ell, expected):
    p = freeprob.jacobian_prediction(ell, 1.0, 1.0)
    assert (p.mean, p.variance) == pytest.approx(expected)


@pytest.mark.parametrize("ell", range(1, 7))
@pytest.mark.parametrize("s", [0.7, 1.0, 1.3])
def test_jacobian_variance_from_moments(ell, s):
    m1 = freeprob.jacobian_moment(ell, s, 1.0, 1)
    m2 = freeprob.jacobian_moment(ell, s, 1.0, 2)
    pred = freeprob.jacobian_prediction(ell, s, 1.0)
    assert m1 == pytest.approx(pred.mean, rel=1e-12)
    assert m2 - m1 * m1 == pytest.approx(pred.variance, rel=1e-12)


def test_quartercircle_support():
    assert freeprob.quartercircle_cdf(-1.0) == 0.0
    assert freeprob.quartercircle_cdf(0.0) == 0.0
    assert freeprob.quartercircle_cdf(2.0) == 1.0
    assert freeprob.quartercircle_cdf(5.0, 2.0) == 1.0
    assert freeprob.quartercircle_pdf(2.5) == 0.0


def test_quartercircle_sqrt2_point():
    assert freeprob.quartercircle_cdf(math.sqrt(2)) == pytest.approx(0.5 + 1 / math.pi, abs=1e-14)
    quad, _ = integrate.quad(freeprob.quartercircle_pdf, 0, math.sqrt(2))
    assert quad == pytest.approx(0.5 + 1 / math.pi, abs=1e-10)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 3.0])
def test_quartercircle_cdf_matches_quadrature(sigma):
    for x in np.linspace(0, 2 * sigma, 21):
        quad, _ = integrate.quad(freeprob.quartercircle_pdf, 0, x, args=(sigma,))
        assert freeprob.quartercircle_cdf(x, sigma) == pytest.approx(quad, abs=1e-9)


def test_quartercircle_derivative_is_density():
    h = 1e-6
    for x in np.linspace(0.01, 1.99, 1000):
        deriv = (freeprob.quartercircle_cdf(x + h) - freeprob.quartercircle_cdf(x - h)) / (2 * h)
        assert abs(deriv - freeprob.quartercircle_pdf(x)) < 1e-6


def test_quartercircle_median():
    # root of the quadrature CDF, computed independently of the closed form
    from scipy.optimize import brentq

    oracle = brentq(lambda x: integrate.quad(freeprob.quartercircle_pdf, 0, x)[0] - 0.5, 0, 2)
    assert oracle == pytest.approx(0.80795, abs=1e-5)
    for sigma in (1.0, 2.5):
        assert freeprob.quartercircle_quantile(0.5, sigma) == pytest.approx(oracle * sigma, abs=1e-9)


def test_quartercircle_bad_sigma():
    with pytest.raises(InvalidInputError):
        freeprob.quartercircle_cdf(1.0, 0.0)


@settings(max_examples=50, deadline=None)
@given(p=st.floats(0.0, 1.0))
def test_quantile_inverts_cdf(p):
    x = freeprob.quartercircle_quantile(p)
    assert freeprob.quartercircle_cdf(x) == pytest.approx(p, abs=1e-10)

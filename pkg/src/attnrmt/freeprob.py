"""Closed-form moment predictions from free probability.

Marchenko-Pastur factors are consumed in the exact order given; the variance
formula for a free product of MP laws is written with left-to-right partial
products of the aspect ratios and this module never reorders them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .errors import InvalidInputError


@dataclass(frozen=True)
class MPFactor:
    gamma: float
    sigma: float

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise InvalidInputError(f"MP ratio must lie in (0, 1], got {self.gamma}")
        if self.sigma <= 0:
            raise InvalidInputError("MP sigma must be positive")


@dataclass(frozen=True)
class MomentPrediction:
    mean: float
    variance: float
    context: str = ""

    def as_dict(self):
        return {"mean": self.mean, "variance": self.variance, "context": self.context}


def fuss_catalan(ell: int, k: int) -> int:
    """FC_ell(k) = C(ell*k + k, k) / (ell*k + 1), exact."""
    if ell < 1 or k < 0:
        raise InvalidInputError(f"need ell >= 1 and k >= 0, got ell={ell}, k={k}")
    num = math.comb(ell * k + k, k)
    q, r = divmod(num, ell * k + 1)
    assert r == 0
    return q


def free_conv_moments(factors) -> MomentPrediction:
    factors = list(factors)
    if not factors:
        raise InvalidInputError("need at least one MP factor")
    mean = math.prod(f.sigma ** 2 for f in factors)
    partial, acc = 1.0, 0.0
    for f in factors:
        partial *= f.gamma
        acc += partial
    return MomentPrediction(mean, mean * mean * acc, f"free product of {len(factors)} MP laws")


def covariance_factors(ell: int, sigma_a: float, sigma_v: float, gamma: float) -> list[MPFactor]:
    """MP factor list for the squared singular values of the gap-removed signal."""
    if ell < 1:
        raise InvalidInputError("ell must be >= 1")
    sv = sigma_v / math.sqrt(gamma)
    return (
        [MPFactor(1.0, sigma_a)] * ell
        + [MPFactor(gamma, sv)]
        + [MPFactor(1.0, sv)] * (ell - 1)
    )


def covariance_prediction(ell: int, sigma_a: float, sigma_v: float, gamma: float) -> MomentPrediction:
    if not 0 < gamma <= 1:
        raise InvalidInputError(f"gamma must lie in (0, 1], got {gamma}")
    if ell < 1:
        raise InvalidInputError("ell must be >= 1")
    base = (sigma_a * sigma_v / math.sqrt(gamma)) ** (2 * ell)
    return MomentPrediction(
        base, ell * (1 + gamma) * base * base, f"covariance bulk, ell={ell}, gamma={gamma}"
    )


def jacobian_moment(ell: int, sigma_a: float, sigma_v: float, k: int) -> float:
    """k-th moment (sigma_a sigma_v)^(2 ell k) * FC_ell(k)^2 of the Jacobian bulk."""
    return (sigma_a * sigma_v) ** (2 * ell * k) * fuss_catalan(ell, k) ** 2


def jacobian_prediction(ell: int, sigma_a: float, sigma_v: float) -> MomentPrediction:
    if ell < 1:
        raise InvalidInputError("ell must be >= 1")
    base = (sigma_a * sigma_v) ** (2 * ell)
    return MomentPrediction(
        base, ell * (ell + 2) * base * base, f"Jacobian bulk, ell={ell}"
    )


def quartercircle_pdf(x: float, sigma: float = 1.0) -> float:
    if sigma <= 0:
        raise InvalidInputError("sigma must be positive")
    if x < 0 or x > 2 * sigma:
        return 0.0
    return math.sqrt(4 * sigma * sigma - x * x) / (math.pi * sigma * sigma)


def quartercircle_cdf(x: float, sigma: float = 1.0) -> float:
    if sigma <= 0:
        raise InvalidInputError("sigma must be positive")
    if x <= 0:
        return 0.0
    if x >= 2 * sigma:
        return 1.0
    u = x / (2 * sigma)
    val = (2 / math.pi) * (u * math.sqrt(1 - u * u) + math.asin(u))
    return min(1.0, max(0.0, val))


def quartercircle_quantile(p: float, sigma: float = 1.0) -> float:
    if not 0 <= p <= 1:
        raise InvalidInputError("p must lie in [0, 1]")
    if p == 0:
        return 0.0
    if p == 1:
        return 2 * sigma
    return brentq(lambda x: quartercircle_cdf(x, sigma) - p, 0.0, 2 * sigma, xtol=1e-14)

"""Derived spectral statistics: stable rank, gaps, outliers, moments, KS."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import InvalidInputError, ShapeError
from .freeprob import quartercircle_cdf
from .linalg import Spectrum, as_matrix, eigenvalues, singular_values, trace_power

DEFAULT_OUTLIER_THRESHOLD = 0.5


@dataclass(frozen=True)
class SpectralSummary:
    s1: float
    s2: float
    gap_ratio: float
    stable_rank: float
    eigen_outlier_count: int | None
    singular_values: np.ndarray

    def as_dict(self, include_values=True):
        out = {
            "s1": self.s1,
            "s2": self.s2,
            "gap_ratio": self.gap_ratio if math.isfinite(self.gap_ratio) else "inf",
            "stable_rank": self.stable_rank,
            "eigen_outlier_count": self.eigen_outlier_count,
        }
        if include_values:
            out["singular_values"] = [float(s) for s in self.singular_values]
        return out


def _svals(x) -> np.ndarray:
    if isinstance(x, Spectrum):
        return np.asarray(x.singular_values, dtype=float)
    return np.asarray(x, dtype=float).ravel()


def stable_rank(m) -> float:
    s = singular_values(m).singular_values
    if s[0] == 0.0:
        raise InvalidInputError("stable rank of the zero matrix is undefined")
    return float(np.sum((s / s[0]) ** 2))


def summarize(m, outlier_threshold: float = DEFAULT_OUTLIER_THRESHOLD) -> SpectralSummary:
    if outlier_threshold <= 0:
        raise InvalidInputError("outlier_threshold must be positive")
    a = as_matrix(m)
    if a.shape[0] == a.shape[1]:
        spec = eigenvalues(a)
        outliers = int(np.sum(np.abs(spec.eigenvalues) > outlier_threshold))
    else:
        spec = singular_values(a)
        outliers = None
    s = spec.singular_values.copy()
    # values below the numerical-rank tolerance are rounding noise
    s[s <= max(a.shape) * np.finfo(float).eps * s[0]] = 0.0
    s1, s2 = float(s[0]), float(s[1]) if len(s) > 1 else 0.0
    sr = float(np.sum((s / s1) ** 2)) if s1 > 0 else float("nan")
    gap = s1 / s2 if s2 > 0 else math.inf
    return SpectralSummary(s1, s2, gap, sr, outliers, s)


def empirical_moments(svals, k_max: int, rescale: float = 1.0, mode: str = "squared") -> list[float]:
    """Moments of rescaled singular values.

    mode="squared": (1/n) sum (c s_i)^(2k), moments of squared singular values.
    mode="plain":   (1/n) sum (c s_i)^k, e.g. for singular values of a covariance.
    """
    s = _svals(svals)
    if s.size == 0:
        raise InvalidInputError("empty spectrum")
    if k_max < 1:
        raise InvalidInputError("k_max must be >= 1")
    if rescale <= 0:
        raise InvalidInputError("rescale must be positive")
    if mode not in ("squared", "plain"):
        raise InvalidInputError(f"mode must be 'squared' or 'plain', got {mode!r}")
    base = (rescale * s) ** 2 if mode == "squared" else rescale * s
    return [float(np.mean(base ** k)) for k in range(1, k_max + 1)]


def ks_distance_quartercircle(svals, sigma: float = 1.0) -> float:
    if sigma <= 0:
        raise InvalidInputError("sigma must be positive")
    s = _svals(svals)
    cdf = np.vectorize(lambda x: quartercircle_cdf(x, sigma))
    return float(stats.kstest(s, cdf).statistic)


def jacobian_moment_estimate(a_prod, w_prod, k: int, ell: int = 1) -> float:
    """k-th moment of the squared singular values of the normalised Jacobian.

    The Jacobian is (sqrt(T)^ell a_prod) (x) (d^(-ell/2) w_prod), where ``a_prod``
    is a product of ``ell`` gap-removed attentions and ``w_prod`` a product of
    ``ell`` value matrices. Computed factor-wise as
    [T^(ell k) tr((a a^T)^k) / T] * [d^(-ell k) tr((w w^T)^k) / d].
    """
    a = as_matrix(a_prod)
    w = as_matrix(w_prod)
    if a.shape[0] != a.shape[1] or w.shape[0] != w.shape[1]:
        raise ShapeError("a_prod and w_prod must be square")
    if ell < 1:
        raise InvalidInputError("ell must be >= 1")
    T, d = a.shape[0], w.shape[0]
    a_part = trace_power(math.sqrt(T) ** ell * a, k) / T
    w_part = trace_power(w / math.sqrt(d) ** ell, k) / d
    return a_part * w_part

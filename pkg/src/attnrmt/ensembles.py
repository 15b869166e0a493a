"""Samplers for the random matrices used to model attention at initialisation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .errors import InvalidInputError, PreconditionError, ShapeError
from .linalg import as_matrix
from .rng import RngStream, as_generator

KINDS = (
    "gaussian_iid",
    "random_markov",
    "random_markov_softmax",
    "key_query_attention",
    "uniform_attention",
    "identity_attention",
    "orthonormal_rows",
)

ROW_SUM_TOL = 1e-8


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    rows: int
    cols: int
    sigma: float = 1.0
    d_qk: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown ensemble kind {self.kind!r}")
        if self.rows < 1 or self.cols < 1:
            raise ShapeError("rows and cols must be positive")
        if self.sigma < 0:
            raise InvalidInputError("sigma must be non-negative")
        square = ("random_markov", "random_markov_softmax", "uniform_attention",
                  "identity_attention", "key_query_attention")
        if self.kind in square and self.rows != self.cols:
            raise ShapeError(f"{self.kind} needs rows == cols")
        if self.kind == "orthonormal_rows" and self.rows > self.cols:
            raise ShapeError("orthonormal_rows needs rows <= cols")


def sample(spec: EnsembleSpec, rng: RngStream | None = None) -> np.ndarray:
    """Draw one matrix described by ``spec`` (stream defaults to ``(spec.seed, 0)``)."""
    gen = as_generator(rng if rng is not None else RngStream(spec.seed))
    T = spec.rows
    if spec.kind == "gaussian_iid":
        return sample_gaussian(spec.rows, spec.cols, spec.sigma, gen)
    if spec.kind == "random_markov":
        return sample_markov(T, spec.sigma, gen)
    if spec.kind == "random_markov_softmax":
        return sample_markov(T, spec.sigma, gen, method="softmax")
    if spec.kind == "uniform_attention":
        return uniform_attention(T)
    if spec.kind == "identity_attention":
        return identity_attention(T)
    if spec.kind == "orthonormal_rows":
        return orthonormal_input(spec.rows, spec.cols, gen)
    # key-query attention on an orthonormal input of width d = d_qk = T
    d_qk = spec.d_qk or T
    x0 = orthonormal_input(T, T, gen)
    return key_query_attention(x0, spec.sigma, d_qk, gen)


def sample_gaussian(rows: int, cols: int, sigma: float, rng) -> np.ndarray:
    if sigma < 0:
        raise InvalidInputError("sigma must be non-negative")
    gen = as_generator(rng)
    return sigma * gen.standard_normal((rows, cols))


def lognormal_params(sigma_a: float) -> tuple[float, float]:
    """(mu, s) of the lognormal with mean 1 and variance sigma_a**2."""
    s2 = math.log1p(sigma_a * sigma_a)
    return -0.5 * s2, math.sqrt(s2)


def _normalize_rows(z: np.ndarray) -> np.ndarray:
    a = z / z.sum(axis=1, keepdims=True)
    # second pass brings row sums to 1 up to a single rounding
    return a / a.sum(axis=1, keepdims=True)


def sample_markov(T: int, sigma_a: float, rng, method: str = "lognormal") -> np.ndarray:
    """Row-normalised i.i.d. positive table.

    ``method="lognormal"`` draws Z lognormal(mean 1, var sigma_a**2) and divides
    by row sums. ``method="softmax"`` applies a row softmax to Gaussian logits
    log Z, which is the same matrix law computed the way a softmax layer would.
    """
    if T < 2:
        raise InvalidInputError(f"T must be >= 2, got {T}")
    if sigma_a <= 0:
        raise InvalidInputError("sigma_a must be positive")
    gen = as_generator(rng)
    mu, s = lognormal_params(sigma_a)
    if method == "lognormal":
        z = gen.lognormal(mu, s, size=(T, T))
        return _normalize_rows(z)
    if method == "softmax":
        logits = mu + s * gen.standard_normal((T, T))
        return _normalize_rows(softmax(logits, axis=1))
    raise InvalidInputError(f"unknown Markov sampling method {method!r}")


def orthonormal_input(T: int, d: int, rng) -> np.ndarray:
    """T x d matrix with orthonormal rows, Haar distributed."""
    if T > d:
        raise ShapeError(f"orthonormal rows need T <= d, got T={T}, d={d}")
    gen = as_generator(rng)
    q, r = np.linalg.qr(gen.standard_normal((d, T)))
    q *= np.sign(np.diag(r))
    return np.ascontiguousarray(q.T)


def key_query_attention(x, sigma_qk: float, d_qk: int, rng) -> np.ndarray:
    """softmax(X W_Q W_K^T X^T / sqrt(d_qk)) with fresh Gaussian W_Q, W_K."""
    x = as_matrix(x)
    if d_qk < 1:
        raise InvalidInputError("d_qk must be positive")
    gen = as_generator(rng)
    d = x.shape[1]
    wq = sample_gaussian(d, d_qk, sigma_qk, gen)
    wk = sample_gaussian(d, d_qk, sigma_qk, gen)
    return attention_from_weights(x, wq, wk)


def attention_from_weights(x: np.ndarray, wq: np.ndarray, wk: np.ndarray) -> np.ndarray:
    logits = (x @ wq) @ (x @ wk).T / math.sqrt(wq.shape[1])
    if not np.all(np.isfinite(logits)):
        raise InvalidInputError("attention logits are not finite")
    return _normalize_rows(softmax(logits, axis=1))


def remove_gap(a) -> np.ndarray:
    """Subtract the rank-one mean (1/T) * ones from a row-stochastic matrix."""
    a = as_matrix(a)
    T, cols = a.shape
    if T != cols:
        raise ShapeError("remove_gap needs a square matrix")
    dev = np.max(np.abs(a.sum(axis=1) - 1.0))
    if dev > ROW_SUM_TOL:
        raise PreconditionError(f"rows do not sum to 1 (max deviation {dev:.3g})")
    return a - 1.0 / T


def uniform_attention(T: int) -> np.ndarray:
    if T < 1:
        raise InvalidInputError("T must be positive")
    return np.full((T, T), 1.0 / T)


def identity_attention(T: int) -> np.ndarray:
    if T < 1:
        raise InvalidInputError("T must be positive")
    return np.eye(T)

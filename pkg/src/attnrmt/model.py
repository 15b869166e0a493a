"""Attention-only forward model with optional gap removal, skip and LayerNorm."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import ensembles
from .errors import (
    DivergenceError,
    InvalidInputError,
    ShapeError,
    UnsupportedConfigError,
)
from .linalg import as_matrix, frobenius_norm_sq
from .rng import RngStream, as_generator

ATTENTION_KINDS = ("random_markov", "key_query", "uniform", "identity")
VALUE_SCALINGS = ("unit_variance", "he")

LAYERNORM_EPS = 1e-5
NORM_CEILING = 1e150
NORM_FLOOR = 1e-150


@dataclass(frozen=True)
class ModelConfig:
    T: int
    d: int
    d_qk: int | None = None
    L: int = 1
    sigma_a: float = 1.0
    sigma_v: float = 1.0
    sigma_qk: float = 1.0
    attention: str = "random_markov"
    remove_gap: bool = False
    skip: bool = False
    layernorm: bool = False
    skip_value_scaling: str = "unit_variance"
    seed: int = 0

    def __post_init__(self):
        if self.T < 1 or self.d < 1:
            raise InvalidInputError("T and d must be positive")
        if self.T > self.d:
            raise InvalidInputError(f"gamma = T/d = {self.T / self.d:.4g} exceeds 1")
        if self.d_qk is None:
            object.__setattr__(self, "d_qk", self.d)
        if self.d_qk < 1:
            raise InvalidInputError("d_qk must be positive")
        if self.L < 1:
            raise InvalidInputError("depth L must be >= 1")
        if self.sigma_a <= 0 or self.sigma_v <= 0 or self.sigma_qk < 0:
            raise InvalidInputError("sigma_a, sigma_v must be positive and sigma_qk >= 0")
        if self.attention not in ATTENTION_KINDS:
            raise InvalidInputError(f"unknown attention kind {self.attention!r}")
        if self.skip_value_scaling not in VALUE_SCALINGS:
            raise InvalidInputError(f"unknown value scaling {self.skip_value_scaling!r}")
        if self.attention == "random_markov" and self.T < 2:
            raise InvalidInputError("random_markov attention needs T >= 2")

    @property
    def gamma(self) -> float:
        return self.T / self.d

    @property
    def pure_product(self) -> bool:
        return not (self.skip or self.layernorm)

    def with_(self, **changes) -> "ModelConfig":
        return replace(self, **changes)


@dataclass
class Parameters:
    """All random draws of one network; propagation is deterministic given these.

    ``attention_weights[l]`` is either a fixed T x T matrix or a ``(W_Q, W_K)``
    pair for content-dependent key-query attention.
    """

    attention_weights: list
    values: list[np.ndarray]


@dataclass
class ForwardTrace:
    config: ModelConfig
    signals: list[np.ndarray]
    attentions: list[np.ndarray]
    values: list[np.ndarray]
    branches: list[np.ndarray] = field(default_factory=list)


def default_stream(cfg: ModelConfig) -> RngStream:
    return RngStream(cfg.seed, 0)


def value_std(cfg: ModelConfig) -> float:
    if cfg.skip_value_scaling == "he":
        return cfg.sigma_v / math.sqrt(cfg.d)
    return cfg.sigma_v


def sample_parameters(cfg: ModelConfig, rng=None) -> Parameters:
    gen = as_generator(rng if rng is not None else default_stream(cfg))
    att, vals = [], []
    std = value_std(cfg)
    for _ in range(cfg.L):
        if cfg.attention == "random_markov":
            att.append(ensembles.sample_markov(cfg.T, cfg.sigma_a, gen))
        elif cfg.attention == "key_query":
            wq = ensembles.sample_gaussian(cfg.d, cfg.d_qk, cfg.sigma_qk, gen)
            wk = ensembles.sample_gaussian(cfg.d, cfg.d_qk, cfg.sigma_qk, gen)
            att.append((wq, wk))
        elif cfg.attention == "uniform":
            att.append(ensembles.uniform_attention(cfg.T))
        else:
            att.append(ensembles.identity_attention(cfg.T))
        vals.append(ensembles.sample_gaussian(cfg.d, cfg.d, std, gen))
    return Parameters(att, vals)


def layernorm_rows(x: np.ndarray, eps: float = LAYERNORM_EPS) -> np.ndarray:
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps)


def _check_scale(x: np.ndarray, layer: int):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"non-finite signal at layer {layer}")
    norm = float(np.linalg.norm(x))
    if norm > NORM_CEILING or 0.0 < norm < NORM_FLOOR:
        raise DivergenceError(f"signal norm {norm:.3e} out of range at layer {layer}")


def propagate(cfg: ModelConfig, x0, params: Parameters) -> ForwardTrace:
    x = as_matrix(x0)
    if x.shape != (cfg.T, cfg.d):
        raise ShapeError(f"x0 must be {cfg.T}x{cfg.d}, got {x.shape}")
    if len(params.values) != cfg.L or len(params.attention_weights) != cfg.L:
        raise ShapeError("parameter count does not match depth")
    signals, attentions, branches = [x], [], []
    for layer, (aw, w) in enumerate(zip(params.attention_weights, params.values), start=1):
        if isinstance(aw, tuple):
            try:
                a = ensembles.attention_from_weights(x, *aw)
            except InvalidInputError as exc:
                raise DivergenceError(f"layer {layer}: {exc}") from exc
        else:
            a = aw
        if cfg.remove_gap:
            a = ensembles.remove_gap(a)
        branch = a @ x @ w
        out = branch + x if cfg.skip else branch
        if cfg.layernorm:
            out = layernorm_rows(out)
        _check_scale(out, layer)
        attentions.append(a)
        branches.append(branch)
        signals.append(out)
        x = out
    return ForwardTrace(cfg, signals, attentions, list(params.values), branches)


def forward(cfg: ModelConfig, x0, rng=None, values=None) -> ForwardTrace:
    """Sample a network from ``rng`` and push ``x0`` through it.

    ``values`` replaces the sampled value matrices (used to pin W^V in tests).
    """
    params = sample_parameters(cfg, rng)
    if values is not None:
        params.values = [as_matrix(v) for v in values]
    return propagate(cfg, x0, params)


def covariance(trace: ForwardTrace, layer: int) -> np.ndarray:
    if not 0 <= layer < len(trace.signals):
        raise InvalidInputError(f"layer {layer} outside 0..{len(trace.signals) - 1}")
    x = trace.signals[layer]
    s = x @ x.T
    return 0.5 * (s + s.T)


def _chain(mats, size):
    out = np.eye(size)
    for m in mats:
        out = out @ m
    return out


def gradient_factors(trace: ForwardTrace, x0, layer: int) -> tuple[np.ndarray, np.ndarray]:
    """Kronecker factors (P1, P2) with dX_L/dW_layer = P1 (x) P2."""
    cfg = trace.config
    if not cfg.pure_product:
        raise UnsupportedConfigError("closed-form gradient needs a model without skip/LayerNorm")
    if not 1 <= layer <= cfg.L:
        raise InvalidInputError(f"layer must be in 1..{cfg.L}")
    if cfg.attention == "key_query" and layer < cfg.L:
        raise UnsupportedConfigError(
            "key-query attention above the differentiated layer depends on W^V; use Hutchinson"
        )
    x0 = as_matrix(x0)
    a_prod = np.eye(cfg.T)
    for a in trace.attentions:
        a_prod = a @ a_prod
    p1 = a_prod @ x0
    for w in trace.values[: layer - 1]:
        p1 = p1 @ w
    p2 = _chain(trace.values[layer:], cfg.d)
    return p1, p2


def gradient_frob_sq_closed_form(trace: ForwardTrace, x0, layer: int) -> float:
    p1, p2 = gradient_factors(trace, x0, layer)
    return frobenius_norm_sq(p1) * frobenius_norm_sq(p2)


@dataclass(frozen=True)
class HutchinsonEstimate:
    estimate: float
    stderr: float
    probes: int


def gradient_frob_sq_hutchinson(
    cfg: ModelConfig,
    x0,
    layer: int,
    probes: int = 64,
    fd_eps: float = 1e-4,
    rng=None,
    probe_rng=None,
    params: Parameters | None = None,
) -> HutchinsonEstimate:
    """Estimate ||dX_L/dW^V_layer||_F^2 as the mean of ||J v||^2 over Gaussian v.

    Each J v is a central finite difference of the forward pass along v, with
    every other random draw held fixed. ``params`` reuses an existing draw
    instead of sampling from ``rng``.
    """
    if probes < 1:
        raise InvalidInputError("probes must be >= 1")
    if fd_eps <= 0:
        raise InvalidInputError("fd_eps must be positive")
    if not 1 <= layer <= cfg.L:
        raise InvalidInputError(f"layer must be in 1..{cfg.L}")
    if params is None:
        params = sample_parameters(cfg, rng)
    params = Parameters(list(params.attention_weights), list(params.values))
    pgen = as_generator(probe_rng if probe_rng is not None else RngStream(cfg.seed, 1))
    w0 = params.values[layer - 1]
    samples = np.empty(probes)
    for i in range(probes):
        v = pgen.standard_normal(w0.shape)
        params.values[layer - 1] = w0 + fd_eps * v
        plus = propagate(cfg, x0, params).signals[-1]
        params.values[layer - 1] = w0 - fd_eps * v
        minus = propagate(cfg, x0, params).signals[-1]
        jv = (plus - minus) / (2.0 * fd_eps)
        samples[i] = frobenius_norm_sq(jv)
    stderr = float(samples.std(ddof=1) / math.sqrt(probes)) if probes > 1 else float("nan")
    return HutchinsonEstimate(float(samples.mean()), stderr, probes)

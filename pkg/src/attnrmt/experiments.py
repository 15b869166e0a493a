"""Seeded scenario sweeps writing long-format CSV, JSON summaries and figures."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, ensembles, freeprob
from .config import ExperimentSpec
from .errors import DivergenceError, InvalidInputError
from .linalg import eigenvalues, singular_values
from .model import (
    ModelConfig,
    covariance,
    gradient_frob_sq_closed_form,
    gradient_frob_sq_hutchinson,
    propagate,
    sample_parameters,
)
from .rng import PRNG_ALGORITHM, RngStream, derive_stream_id
from .spectra import (
    empirical_moments,
    jacobian_moment_estimate,
    ks_distance_quartercircle,
    stable_rank,
    summarize,
)

CSV_FIELDS = ("scenario", "param", "value", "trial", "seed", "metric", "metric_value", "status", "wall_ms")
HUTCHINSON_PROBES = 16
HUTCHINSON_EPS = 1e-4


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    param: str
    value: float
    trial: int
    seed: int
    metric: str
    metric_value: float
    status: str = "ok"
    wall_ms: float = 0.0

    def as_tuple(self):
        return (self.scenario, self.param, self.value, self.trial, self.seed,
                self.metric, self.metric_value, self.status, self.wall_ms)


@dataclass
class TrialResult:
    value: float
    trial: int
    seed: int
    metrics: list[tuple[str, float]]
    status: str
    wall_ms: float
    figure_data: dict = field(default_factory=dict)


def fit_loglog_slope(xs, ys) -> tuple[float, float, float]:
    """OLS fit of log y = slope * log x + intercept; returns (slope, intercept, max |residual|)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise InvalidInputError("need at least 3 paired points")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise InvalidInputError("log-log fit needs strictly positive finite values")
    lx, ly = np.log(x), np.log(y)
    design = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(intercept), float(np.max(np.abs(resid)))


def trial_stream(spec: ExperimentSpec, value, trial: int) -> RngStream:
    return RngStream(spec.base_seed, derive_stream_id(spec.sweep_param, value, trial))


# -- scenarios ---------------------------------------------------------------
# Each takes (spec, cfg, gen, keep_figure) and returns (metrics, figure_data).


def _attention_sample(cfg: ModelConfig, gen, x0=None):
    if cfg.attention == "random_markov":
        return ensembles.sample_markov(cfg.T, cfg.sigma_a, gen)
    if cfg.attention == "key_query":
        if x0 is None:
            x0 = ensembles.orthonormal_input(cfg.T, cfg.d, gen)
        return ensembles.key_query_attention(x0, cfg.sigma_qk, cfg.d_qk, gen)
    if cfg.attention == "uniform":
        return ensembles.uniform_attention(cfg.T)
    return ensembles.identity_attention(cfg.T)


def _forward(cfg, gen):
    x0 = ensembles.orthonormal_input(cfg.T, cfg.d, gen)
    params = sample_parameters(cfg, gen)
    return x0, params, propagate(cfg, x0, params)


def _bulk_histogram(spec, cfg, gen, keep):
    a = _attention_sample(cfg, gen)
    T = cfg.T
    summ = summarize(a, spec.outlier_threshold)
    ev = eigenvalues(a).eigenvalues
    a_perp = ensembles.remove_gap(a)
    perp_svals = math.sqrt(T) * singular_values(a_perp).singular_values
    perp_summ = summarize(a_perp, spec.outlier_threshold)
    metrics = [
        ("s1", summ.s1),
        ("s2_sqrtT", math.sqrt(T) * summ.s2),
        ("gap_ratio", summ.gap_ratio),
        ("lambda1_abs", float(abs(ev[0]))),
        ("lambda2_abs_sqrtT", float(abs(ev[1]) * math.sqrt(T))),
        ("eigen_outliers", float(summ.eigen_outlier_count)),
        ("eigen_outliers_perp", float(perp_summ.eigen_outlier_count)),
        ("s1_perp_sqrtT", float(perp_svals[0])),
        ("ks_quartercircle_perp", ks_distance_quartercircle(perp_svals, cfg.sigma_a)),
    ]
    fig = {}
    if keep:
        fig = {"perp_svals": perp_svals.tolist(), "eig_re": ev.real.tolist(),
               "eig_im": ev.imag.tolist(), "T": T, "sigma": cfg.sigma_a}
    return metrics, fig


def _rank_width(spec, cfg, gen, keep):
    _, _, tr = _forward(cfg, gen)
    sr = stable_rank(covariance(tr, cfg.L))
    return [("stable_rank", sr), ("sr_minus_1", sr - 1.0), ("sr_over_T", sr / cfg.T)], {}


def _rank_depth(spec, cfg, gen, keep):
    _, _, tr = _forward(cfg, gen)
    metrics = []
    for layer in range(1, cfg.L + 1):
        metrics.append((f"stable_rank_layer{layer}", stable_rank(covariance(tr, layer))))
    sr = metrics[-1][1]
    metrics += [("stable_rank", sr), ("sr_over_T", sr / cfg.T)]
    return metrics, {}


def _grad(spec, cfg, gen, keep):
    layer = 1
    x0 = ensembles.orthonormal_input(cfg.T, cfg.d, gen)
    params = sample_parameters(cfg, gen)
    metrics = []
    if cfg.pure_product and (cfg.attention != "key_query" or cfg.L == layer):
        tr = propagate(cfg, x0, params)
        g = gradient_frob_sq_closed_form(tr, x0, layer)
    else:
        probe = RngStream(int(gen.integers(0, 2**63)), 1)
        est = gradient_frob_sq_hutchinson(
            cfg, x0, layer, HUTCHINSON_PROBES, HUTCHINSON_EPS, probe_rng=probe, params=params
        )
        g = est.estimate
        metrics.append(("grad_sq_stderr", est.stderr))
    metrics += [
        ("grad_sq", g),
        ("grad_sq_over_T_pow_L_minus_1", g / cfg.T ** (cfg.L - 1)),
        ("grad_sq_over_d", g / cfg.d),
        ("log_grad_over_log_T", math.log(g) / math.log(cfg.T)),
    ]
    return metrics, {}


def _moment_cov(spec, cfg, gen, keep):
    _, _, tr = _forward(cfg, gen)
    sv = singular_values(covariance(tr, cfg.L))
    m1, m2 = empirical_moments(sv, 2, mode="plain")
    var = m2 - m1 * m1
    pred = freeprob.covariance_prediction(cfg.L, cfg.sigma_a, cfg.sigma_v, cfg.gamma)
    return [
        ("mean", m1), ("variance", var),
        ("pred_mean", pred.mean), ("pred_variance", pred.variance),
        ("rel_err_mean", abs(m1 - pred.mean) / pred.mean),
        ("rel_err_variance", abs(var - pred.variance) / pred.variance),
    ], {}


def _moment_jac(spec, cfg, gen, keep):
    _, _, tr = _forward(cfg, gen)
    a = np.eye(cfg.T)
    for att in tr.attentions:
        a = att @ a
    w = np.eye(cfg.d)
    for v in tr.values:
        w = w @ v
    metrics = []
    for k in (1, 2):
        est = jacobian_moment_estimate(a, w, k, ell=cfg.L)
        pred = freeprob.jacobian_moment(cfg.L, cfg.sigma_a, cfg.sigma_v, k)
        metrics += [(f"moment_k{k}", est), (f"pred_moment_k{k}", pred),
                    (f"rel_err_k{k}", abs(est - pred) / pred)]
    return metrics, {}


def _xavier(spec, cfg, gen, keep):
    x0 = ensembles.orthonormal_input(cfg.T, cfg.d, gen)
    a = ensembles.key_query_attention(x0, 1.0 / math.sqrt(cfg.d), cfg.d_qk, gen)
    dev = float(np.max(np.abs(cfg.T * a - 1.0)))
    return [("max_abs_TA_minus_1", dev), ("bound_5_over_sqrt_d", 5.0 / math.sqrt(cfg.d))], {}


def _outlier_count(spec, cfg, gen, keep):
    _, _, tr = _forward(cfg, gen)
    metrics = []
    fig = {"layers": []} if keep else {}
    for layer, a in enumerate(tr.attentions, start=1):
        ev = eigenvalues(a).eigenvalues
        n = int(np.sum(np.abs(ev) > spec.outlier_threshold))
        metrics.append((f"outliers_layer{layer}", float(n)))
        if keep:
            fig["layers"].append({"eig_re": ev.real.tolist(), "eig_im": ev.imag.tolist()})
    if keep:
        fig["threshold"] = spec.outlier_threshold
    return metrics, fig


def _skip_scaling(spec, cfg, gen, keep):
    cfg = cfg.with_(skip=True)
    _, _, tr = _forward(cfg, gen)
    metrics = []
    for layer, branch in enumerate(tr.branches, start=1):
        prev = tr.signals[layer - 1]
        ratio = float(np.linalg.norm(branch) / np.linalg.norm(prev))
        metrics.append((f"branch_ratio_layer{layer}", ratio))
    metrics.append(("stable_rank", stable_rank(covariance(tr, cfg.L))))
    return metrics, {}


SCENARIO_FUNCS = {
    "bulk_histogram": _bulk_histogram,
    "rank_width": _rank_width,
    "rank_depth": _rank_depth,
    "grad_width": _grad,
    "grad_depth": _grad,
    "moment_check_cov": _moment_cov,
    "moment_check_jac": _moment_jac,
    "xavier_degeneracy": _xavier,
    "outlier_count": _outlier_count,
    "skip_scaling_isometry": _skip_scaling,
}


def run_trial(spec: ExperimentSpec, value, trial: int, keep_figure: bool = False) -> TrialResult:
    """Run one (sweep value, trial) pair; replaying the same arguments is bitwise identical."""
    return _execute(spec, value, trial, trial_stream(spec, value, trial), keep_figure)


def replay(spec: ExperimentSpec, value, seed: int, trial: int = -1) -> TrialResult:
    """Recompute a trial from the ``seed`` column of its CSV row alone."""
    return _execute(spec, value, trial, RngStream(spec.base_seed, seed), False)


def _execute(spec, value, trial, stream, keep_figure) -> TrialResult:
    cfg = spec.config_for(value)
    start = time.perf_counter()
    with threadpool_limits(limits=1):
        try:
            metrics, fig = SCENARIO_FUNCS[spec.scenario](spec, cfg, stream.generator(), keep_figure)
            status = "ok"
        except (DivergenceError, FloatingPointError, OverflowError) as exc:
            metrics, fig, status = [("diverged", float("nan"))], {"error": str(exc)}, "diverged"
    wall = (time.perf_counter() - start) * 1000.0
    return TrialResult(value, trial, stream.stream_id, metrics, status, wall, fig)


def _run_task(args):
    spec, value, trial, keep = args
    return run_trial(spec, value, trial, keep)


def file_header(spec: ExperimentSpec) -> dict:
    return {"spec": spec.echo(), "prng": PRNG_ALGORITHM, "version": f"attnrmt {__version__}"}


def rows_from(spec: ExperimentSpec, results) -> list[ResultRow]:
    rows = []
    for r in results:
        for name, val in r.metrics:
            rows.append(ResultRow(spec.scenario, spec.sweep_param, r.value, r.trial,
                                  r.seed, name, val, r.status, round(r.wall_ms, 3)))
    return rows


def write_csv(path: Path, spec: ExperimentSpec, rows) -> None:
    buf = io.StringIO()
    header = file_header(spec)
    buf.write(f"# spec: {json.dumps(header['spec'], sort_keys=True)}\n")
    buf.write(f"# prng: {header['prng']}\n")
    buf.write(f"# version: {header['version']}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for row in rows:
        w.writerow([_fmt(x) for x in row.as_tuple()])
    path.write_text(buf.getvalue())


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def summarize_rows(spec: ExperimentSpec, results) -> dict:
    per_value = {}
    for v in spec.sweep_values:
        trials = [r for r in results if r.value == v]
        ok = [r for r in trials if r.status == "ok"]
        metrics = {}
        names = [m for m, _ in ok[0].metrics] if ok else []
        for name in names:
            vals = np.array([dict(r.metrics)[name] for r in ok], dtype=float)
            metrics[name] = {
                "mean": float(np.mean(vals)),
                "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
                "n": int(len(vals)),
            }
        per_value[str(v)] = {"trials": len(trials), "diverged": len(trials) - len(ok),
                             "metrics": metrics}
    fits = {}
    xs = [float(v) for v in spec.sweep_values]
    if len(xs) >= 3 and all(x > 0 for x in xs):
        names = set.intersection(*(set(pv["metrics"]) for pv in per_value.values())) \
            if per_value else set()
        for name in sorted(names):
            ys = [per_value[str(v)]["metrics"][name]["mean"] for v in spec.sweep_values]
            if all(math.isfinite(y) and y > 0 for y in ys) and len(set(ys)) > 1:
                slope, intercept, resid = fit_loglog_slope(xs, ys)
                fits[name] = {"slope": slope, "intercept": intercept, "max_residual": resid}
    return {**file_header(spec), "per_value": per_value, "loglog_fits": fits}


@dataclass
class RunOutcome:
    rows: list[ResultRow]
    summary: dict
    files: list[Path]
    all_diverged: bool


def run(spec: ExperimentSpec, workers: int = 1, figures: bool = True) -> RunOutcome:
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(spec, v, t, figures and t == 0) for v in spec.sweep_values for t in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    order = {v: i for i, v in enumerate(spec.sweep_values)}
    results.sort(key=lambda r: (order[r.value], r.trial))

    rows = rows_from(spec, results)
    csv_path = out / f"{spec.scenario}.csv"
    write_csv(csv_path, spec, rows)
    summary = summarize_rows(spec, results)
    json_path = out / f"{spec.scenario}.json"
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True))
    files = [csv_path, json_path]
    if figures:
        from . import plotting

        files += plotting.render_scenario(spec, results, summary, out)
    all_div = all(r.status == "diverged" for r in results)
    return RunOutcome(rows, summary, files, all_div)

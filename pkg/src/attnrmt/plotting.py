"""SVG figures written next to the CSV/JSON results."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .freeprob import quartercircle_pdf  # noqa: E402

plt.rcParams.update({
    "figure.figsize": (5.5, 4.0),
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
    "svg.hashsalt": "attnrmt",
})


def _save(fig, path: Path, header: dict) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg",
                metadata={"Description": json.dumps(header, sort_keys=True), "Date": None})
    plt.close(fig)
    return path


def singular_value_histogram(svals, sigma, path, header, title=""):
    fig, ax = plt.subplots()
    ax.hist(svals, bins=50, density=True, color="0.7", edgecolor="white", label="empirical")
    xs = np.linspace(0.0, 2 * sigma, 400)
    ax.plot(xs, [quartercircle_pdf(x, sigma) for x in xs], color="C3", lw=1.5,
            label="quartercircle")
    ax.set_xlabel("singular value")
    ax.set_ylabel("density")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    return _save(fig, path, header)


def eigenvalue_scatter(re, im, T, sigma, path, header, threshold=None, title=""):
    re, im = np.asarray(re), np.asarray(im)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.scatter(re[1:], im[1:], s=4, color="C0", alpha=0.6)
    ax.scatter(re[:1], im[:1], s=30, color="black", zorder=3, label="leading eigenvalue")
    theta = np.linspace(0, 2 * np.pi, 300)
    if T:
        r = 2 * sigma / np.sqrt(T)
        ax.plot(r * np.cos(theta), r * np.sin(theta), color="C3", lw=1,
                label=r"radius $2\sigma_A/\sqrt{T}$")
    if threshold:
        ax.plot(threshold * np.cos(theta), threshold * np.sin(theta), "--", color="0.5", lw=0.8,
                label=f"threshold {threshold}")
    ax.set_aspect("equal")
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8, loc="upper left")
    return _save(fig, path, header)


def sweep_plot(summary: dict, param: str, metric: str, path, header):
    per = summary["per_value"]
    xs = [float(v) for v in per]
    means = [per[v]["metrics"][metric]["mean"] for v in per]
    stds = [per[v]["metrics"][metric]["std"] for v in per]
    fig, ax = plt.subplots()
    ax.errorbar(xs, means, yerr=stds, fmt="o", color="C0", capsize=3)
    fit = summary["loglog_fits"].get(metric)
    if fit:
        grid = np.geomspace(min(xs), max(xs), 50)
        ax.plot(grid, np.exp(fit["intercept"]) * grid ** fit["slope"], color="C3", lw=1,
                label=f"slope {fit['slope']:.2f}")
        ax.legend(frameon=False)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(param)
    ax.set_ylabel(metric)
    return _save(fig, path, header)


def render_scenario(spec, results, summary, out: Path) -> list[Path]:
    from .experiments import file_header

    header = file_header(spec)
    files = []
    for r in results:
        fd = r.figure_data
        if r.status != "ok" or not fd:
            continue
        tag = f"{spec.sweep_param}{r.value}"
        if spec.scenario == "bulk_histogram":
            files.append(singular_value_histogram(
                fd["perp_svals"], fd["sigma"], out / f"bulk_histogram_svals_{tag}.svg", header,
                title=f"gap-removed attention, T={fd['T']}"))
            files.append(eigenvalue_scatter(
                fd["eig_re"], fd["eig_im"], fd["T"], fd["sigma"],
                out / f"bulk_histogram_eigs_{tag}.svg", header,
                threshold=spec.outlier_threshold, title=f"attention eigenvalues, T={fd['T']}"))
        elif spec.scenario == "outlier_count":
            for layer, ev in enumerate(fd["layers"], start=1):
                files.append(eigenvalue_scatter(
                    ev["eig_re"], ev["eig_im"], None, None,
                    out / f"outlier_count_{tag}_layer{layer}.svg", header,
                    threshold=fd["threshold"], title=f"layer {layer}"))
    for metric in summary["loglog_fits"]:
        files.append(sweep_plot(summary, spec.sweep_param, metric,
                                out / f"{spec.scenario}_{metric}.svg", header))
    return files

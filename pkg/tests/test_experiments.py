import csv
import json

import numpy as np
import pytest

from attnrmt import experiments
from attnrmt.config import parse_config
from attnrmt.errors import InvalidInputError


def make_spec(tmp_path, body, name="out"):
    return parse_config(body + f"\nout = {tmp_path / name}\n")


def read_rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_fit_examples():
    xs = np.array([1.0, 2.0, 5.0, 10.0])
    slope, _, resid = experiments.fit_loglog_slope(xs, xs ** 2)
    assert abs(slope - 2) < 1e-10 and resid < 1e-10
    assert abs(experiments.fit_loglog_slope(xs, np.full(4, 3.0))[0]) < 1e-12
    assert abs(experiments.fit_loglog_slope(xs, 7 / xs ** 3)[0] + 3) < 1e-10


def test_fit_rejects_bad_points():
    with pytest.raises(InvalidInputError):
        experiments.fit_loglog_slope([1, 2, 3], [1, 0, 2])
    with pytest.raises(InvalidInputError):
        experiments.fit_loglog_slope([1, 2], [1, 2])


def test_trial_streams_are_distinct(tmp_path):
    spec = make_spec(tmp_path, "scenario = rank_width\nT = 20\nsweep_values = 20, 40")
    ids = {experiments.trial_stream(spec, v, t).stream_id for v in (20, 40) for t in range(5)}
    assert len(ids) == 10


def test_run_writes_files_with_headers(tmp_path):
    spec = make_spec(tmp_path, "scenario = bulk_histogram\nT = 60\ntrials = 2\nseed = 3")
    out = experiments.run(spec)
    names = sorted(p.name for p in out.files)
    assert "bulk_histogram.csv" in names and "bulk_histogram.json" in names
    assert any(n.endswith(".svg") and "svals" in n for n in names)
    assert any(n.endswith(".svg") and "eigs" in n for n in names)
    for p in out.files:
        text = p.read_text()
        assert "random_markov" in text
        assert "Philox" in text
        assert "attnrmt 0.1.0" in text
    csv_text = (tmp_path / "out" / "bulk_histogram.csv").read_text().splitlines()
    header = [l for l in csv_text if not l.startswith("#")][0]
    assert header == "scenario,param,value,trial,seed,metric,metric_value,status,wall_ms"


def test_replay_from_row_is_bitwise(tmp_path):
    spec = make_spec(tmp_path, "scenario = moment_check_cov\nT = 30\nd = 40\ntrials = 3\nseed = 9")
    experiments.run(spec, figures=False)
    rows = read_rows(tmp_path / "out" / "moment_check_cov.csv")
    for row in rows:
        again = dict(experiments.replay(spec, int(row["value"]), int(row["seed"])).metrics)
        assert repr(again[row["metric"]]) == row["metric_value"]


def test_worker_count_does_not_change_results(tmp_path):
    body = "scenario = rank_width\nT = 20\nsweep_values = 20, 30, 40\ntrials = 3\nseed = 5"
    experiments.run(make_spec(tmp_path, body, "a"), workers=1, figures=False)
    experiments.run(make_spec(tmp_path, body, "b"), workers=3, figures=False)

    def content(name):
        rows = read_rows(tmp_path / name / "rank_width.csv")
        return sorted(tuple(v for k, v in r.items() if k != "wall_ms") for r in rows)

    assert content("a") == content("b")


def test_summary_has_fits(tmp_path):
    spec = make_spec(tmp_path, "scenario = rank_width\nT = 50\nsweep_values = 50, 100, 200\ntrials = 2")
    out = experiments.run(spec, figures=False)
    summ = json.loads((tmp_path / "out" / "rank_width.json").read_text())
    assert summ == json.loads(json.dumps(out.summary, sort_keys=True))
    fit = summ["loglog_fits"]["sr_minus_1"]
    assert fit["slope"] < 0 and fit["max_residual"] >= 0
    assert summ["per_value"]["100"]["metrics"]["stable_rank"]["n"] == 2


def test_diverged_rows_recorded(tmp_path):
    spec = make_spec(tmp_path, "scenario = rank_depth\nT = 10\nL = 6\nsigma_v = 1e40\nskip = true\ntrials = 2")
    out = experiments.run(spec, figures=False)
    assert out.all_diverged
    assert {r.status for r in out.rows} == {"diverged"}


@pytest.mark.parametrize("scenario", ["rank_depth", "grad_width", "moment_check_jac",
                                      "xavier_degeneracy", "outlier_count",
                                      "skip_scaling_isometry"])
def test_scenarios_run(tmp_path, scenario):
    spec = make_spec(tmp_path, f"scenario = {scenario}\nT = 16\nL = 2\ntrials = 1")
    out = experiments.run(spec)
    assert not out.all_diverged
    assert all(np.isfinite(r.metric_value) for r in out.rows)


def test_grad_with_layernorm_uses_hutchinson(tmp_path):
    spec = make_spec(tmp_path, "scenario = grad_width\nT = 12\nL = 2\nlayernorm = true\ntrials = 1")
    res = experiments.run_trial(spec, 12, 0)
    assert "grad_sq_stderr" in dict(res.metrics)


def test_xavier_scenario_decreasing(tmp_path):
    spec = make_spec(tmp_path, "scenario = xavier_degeneracy\nT = 125\nsweep_param = d\n"
                               "sweep_values = 125, 250, 500\ntrials = 3")
    out = experiments.run(spec, figures=False)
    means = [out.summary["per_value"][str(v)]["metrics"]["max_abs_TA_minus_1"]["mean"]
             for v in (125, 250, 500)]
    assert means[0] > means[1] > means[2]
    assert means[2] < 5 / np.sqrt(500)


def test_grad_depth_growth(tmp_path):
    spec = make_spec(tmp_path, "scenario = grad_depth\nT = 200\nsweep_param = L\n"
                               "sweep_values = 2, 3, 4, 5\ntrials = 2")
    out = experiments.run(spec, figures=False)
    per = out.summary["per_value"]
    r = [per[str(L)]["metrics"]["log_grad_over_log_T"]["mean"] for L in (2, 3, 4, 5)]
    for L, val in zip((2, 3, 4, 5), r):
        assert val >= (L - 1) - 0.3
    assert all(b - a >= 0.7 for a, b in zip(r, r[1:]))

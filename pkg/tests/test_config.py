from pathlib import Path

import pytest

from attnrmt.config import KEYS, ExperimentSpec, load_config, parse_config
from attnrmt.errors import ConfigParseError
from attnrmt.model import ModelConfig

MINIMAL = "scenario = bulk_histogram\nT = 500\nseed = 1\nout = .\n"


def test_minimal_config_defaults():
    spec = parse_config(MINIMAL)
    m = spec.model
    assert (m.T, m.d, m.d_qk, m.L) == (500, 500, 500, 1)
    assert (m.sigma_a, m.sigma_v, m.sigma_qk) == (1.0, 1.0, 1.0)
    assert m.attention == "random_markov" and m.skip_value_scaling == "unit_variance"
    assert not (m.remove_gap or m.skip or m.layernorm)
    assert spec.trials == 10 and spec.base_seed == 1 and spec.output_dir == Path(".")
    assert spec.sweep_param == "T" and spec.sweep_values == (500,)
    assert spec.outlier_threshold == 0.5


def test_full_config_roundtrip():
    text = """
    # every key
    scenario = rank_width
    T = 100
    d = 200
    d_qk = 50
    L = 2
    sigma_a = 0.5
    sigma_v = 2
    sigma_qk = 0.1
    attention = key_query
    remove_gap = true
    skip = yes
    layernorm = off
    skip_value_scaling = he
    sweep_param = T
    sweep_values = 100, 200   # trailing comment
    trials = 3
    seed = 42
    outlier_threshold = 0.25
    out = results
    """
    spec = parse_config(text)
    echo = spec.echo()
    assert set(echo) == set(KEYS)
    assert echo["sweep_values"] == [100, 200]
    assert spec.model.skip and not spec.model.layernorm and spec.model.remove_gap
    assert spec.model.d_qk == 50
    assert spec.config_for(200).d == 400


def test_sweep_T_keeps_gamma():
    spec = parse_config("scenario = rank_width\nT = 100\nd = 200\nsweep_values = 100, 400\n")
    cfg = spec.config_for(400)
    assert (cfg.T, cfg.d, cfg.d_qk) == (400, 800, 800)


def test_sweep_float_param():
    spec = parse_config("scenario = rank_width\nT = 10\nsweep_param = sigma_a\nsweep_values = 0.5, 1.5\n")
    assert spec.config_for(1.5).sigma_a == 1.5


def test_wide_ratio_rejected():
    with pytest.raises(ConfigParseError, match="gamma"):
        parse_config("scenario = rank_width\nT = 200\nd = 100\n")


def test_unknown_key_has_line_number():
    with pytest.raises(ConfigParseError, match="line 2"):
        parse_config("scenario = rank_width\ngamma = 2\nT = 4\n")


def test_duplicate_key_names_both_lines():
    with pytest.raises(ConfigParseError) as exc:
        parse_config("scenario = rank_width\nT = 4\n\nT = 5\n")
    msg = str(exc.value)
    assert "line 4" in msg and "line 2" in msg


@pytest.mark.parametrize("text,line", [
    ("scenario = rank_width\nT = four\n", 2),
    ("scenario = rank_width\nT = 4\nskip = maybe\n", 3),
    ("scenario = rank_width\nT = 4\nsigma_a = nan\n", 3),
    ("scenario = rank_width\nT = 4\nsweep_values = 4, x\n", 3),
    ("scenario = rank_width\nT 4\n", 2),
    ("scenario =\nT = 4\n", 1),
])
def test_malformed_values(text, line):
    with pytest.raises(ConfigParseError, match=f"line {line}"):
        parse_config(text)


def test_missing_required_and_bad_scenario():
    with pytest.raises(ConfigParseError):
        parse_config("T = 4\n")
    with pytest.raises(ConfigParseError):
        parse_config("scenario = nope\nT = 4\n")
    with pytest.raises(ConfigParseError):
        parse_config("scenario = rank_width\nT = 4\nsweep_param = attention\n")


def test_bad_sweep_value_rejected():
    with pytest.raises(ConfigParseError):
        parse_config("scenario = rank_width\nT = 10\nsweep_param = L\nsweep_values = 1, 0\n")


def test_spec_validation():
    with pytest.raises(ConfigParseError):
        ExperimentSpec("rank_width", ModelConfig(T=4, d=4), trials=0)


def test_load_config(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text(MINIMAL)
    assert load_config(p).scenario == "bulk_histogram"

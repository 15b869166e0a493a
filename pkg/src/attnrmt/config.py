"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import AttnRMTError, ConfigParseError
from .model import ModelConfig

SCENARIOS = (
    "bulk_histogram",
    "rank_width",
    "rank_depth",
    "grad_width",
    "grad_depth",
    "moment_check_cov",
    "moment_check_jac",
    "xavier_degeneracy",
    "outlier_count",
    "skip_scaling_isometry",
)

KEYS = (
    "scenario", "T", "d", "d_qk", "L", "sigma_a", "sigma_v", "sigma_qk",
    "attention", "remove_gap", "skip", "layernorm", "skip_value_scaling",
    "sweep_param", "sweep_values", "trials", "seed", "outlier_threshold", "out",
)

SWEEPABLE = ("T", "d", "d_qk", "L", "sigma_a", "sigma_v", "sigma_qk")
INT_PARAMS = ("T", "d", "d_qk", "L")

DEFAULT_TRIALS = 10


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str
    model: ModelConfig
    sweep_param: str = "T"
    sweep_values: tuple = ()
    trials: int = DEFAULT_TRIALS
    base_seed: int = 0
    output_dir: Path = Path(".")
    outlier_threshold: float = 0.5

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigParseError(f"unknown scenario {self.scenario!r}")
        if self.sweep_param not in SWEEPABLE:
            raise ConfigParseError(f"sweep_param must be one of {SWEEPABLE}")
        if self.trials < 1:
            raise ConfigParseError("trials must be >= 1")
        if not self.sweep_values:
            object.__setattr__(
                self, "sweep_values", (getattr(self.model, self.sweep_param),)
            )
        for v in self.sweep_values:
            self.config_for(v)

    def config_for(self, value) -> ModelConfig:
        """Template model with the sweep parameter set.

        Sweeping T (or d) keeps gamma = T/d fixed; d_qk follows d when the
        template has d_qk == d.
        """
        m = self.model
        p = self.sweep_param
        changes = {p: value}
        if p in ("T", "d"):
            gamma = m.T / m.d
            if p == "T":
                d = int(round(value / gamma))
                changes["d"] = d
            else:
                d = int(value)
                changes["T"] = max(1, int(round(value * gamma)))
            if m.d_qk == m.d:
                changes["d_qk"] = d
        elif p == "d_qk":
            changes["d_qk"] = int(value)
        try:
            return replace(m, **changes)
        except AttnRMTError as exc:
            raise ConfigParseError(f"sweep value {p}={value}: {exc}") from exc

    def echo(self) -> dict:
        m = self.model
        return {
            "scenario": self.scenario,
            "T": m.T, "d": m.d, "d_qk": m.d_qk, "L": m.L,
            "sigma_a": m.sigma_a, "sigma_v": m.sigma_v, "sigma_qk": m.sigma_qk,
            "attention": m.attention, "remove_gap": m.remove_gap, "skip": m.skip,
            "layernorm": m.layernorm, "skip_value_scaling": m.skip_value_scaling,
            "sweep_param": self.sweep_param, "sweep_values": list(self.sweep_values),
            "trials": self.trials, "seed": self.base_seed,
            "outlier_threshold": self.outlier_threshold, "out": str(self.output_dir),
        }


def _parse_bool(s):
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_int(s):
    v = int(s, 10)
    return v


def _parse_float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError(f"not a finite number: {s!r}")
    return v


def _parse_sweep_value(param, s):
    return _parse_int(s) if param in INT_PARAMS else _parse_float(s)


_CONVERTERS = {
    "T": _parse_int, "d": _parse_int, "d_qk": _parse_int, "L": _parse_int,
    "sigma_a": _parse_float, "sigma_v": _parse_float, "sigma_qk": _parse_float,
    "remove_gap": _parse_bool, "skip": _parse_bool, "layernorm": _parse_bool,
    "trials": _parse_int, "seed": _parse_int, "outlier_threshold": _parse_float,
    "scenario": str, "attention": str, "skip_value_scaling": str,
    "sweep_param": str, "out": str, "sweep_values": str,
}


def parse_config(text: str) -> ExperimentSpec:
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigParseError(f"unknown key {key!r}", lineno)
        if key in raw:
            raise ConfigParseError(
                f"duplicate key {key!r} (first set on line {raw[key][1]})", lineno
            )
        if not value:
            raise ConfigParseError(f"empty value for {key!r}", lineno)
        raw[key] = (value, lineno)

    vals = {}
    for key, (value, lineno) in raw.items():
        if key == "sweep_values":
            continue
        try:
            vals[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigParseError(f"bad value for {key!r}: {exc}", lineno) from None

    for req in ("scenario", "T"):
        if req not in vals:
            raise ConfigParseError(f"missing required key {req!r}")
    sweep_param = vals.get("sweep_param", "T")
    if sweep_param not in SWEEPABLE:
        line = raw["sweep_param"][1]
        raise ConfigParseError(f"sweep_param must be one of {SWEEPABLE}", line)
    sweep_values = ()
    if "sweep_values" in raw:
        value, lineno = raw["sweep_values"]
        try:
            sweep_values = tuple(
                _parse_sweep_value(sweep_param, v.strip()) for v in value.split(",") if v.strip()
            )
        except ValueError as exc:
            raise ConfigParseError(f"bad sweep value: {exc}", lineno) from None

    T = vals["T"]
    d = vals.get("d", T)
    try:
        model = ModelConfig(
            T=T,
            d=d,
            d_qk=vals.get("d_qk", d),
            L=vals.get("L", 1),
            sigma_a=vals.get("sigma_a", 1.0),
            sigma_v=vals.get("sigma_v", 1.0),
            sigma_qk=vals.get("sigma_qk", 1.0),
            attention=vals.get("attention", "random_markov"),
            remove_gap=vals.get("remove_gap", False),
            skip=vals.get("skip", False),
            layernorm=vals.get("layernorm", False),
            skip_value_scaling=vals.get("skip_value_scaling", "unit_variance"),
            seed=vals.get("seed", 0),
        )
    except AttnRMTError as exc:
        raise ConfigParseError(str(exc)) from None
    return ExperimentSpec(
        scenario=vals["scenario"],
        model=model,
        sweep_param=sweep_param,
        sweep_values=sweep_values,
        trials=vals.get("trials", DEFAULT_TRIALS),
        base_seed=vals.get("seed", 0),
        output_dir=Path(vals.get("out", ".")),
        outlier_threshold=vals.get("outlier_threshold", 0.5),
    )


def load_config(path) -> ExperimentSpec:
    return parse_config(Path(path).read_text())

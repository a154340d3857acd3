"""Experiment configuration: a flat ``key = value`` text format.

Blank lines and ``#`` comments are ignored. Every key is optional and
unknown keys are rejected. Validation collects all problems before raising
a single :class:`ConfigError`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError

TASKS = ("return", "volatility", "level")
FORECASTERS = ("garch", "ar", "oracle-gaussian")
CONTROLLERS = ("aci", "bci", "naive")
SYNTH_MODELS = ("garch", "ar")


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "volatility"
    forecaster: str = "garch"
    controller: str = "bci"
    alpha_bar: float = 0.1
    T: int = 3
    B: int = 100
    c: float = 0.5
    lambda_max: Optional[float] = None
    lambda_max_scale: float = 10.0
    lambda_init: float = 0.5
    gamma_aci: float = 0.1
    refit_every: int = 1
    fit_window: Optional[int] = None
    fit_end: Optional[int] = None
    start: Optional[int] = None
    ar_order: int = 1
    window: int = 500
    c_grid: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    workers: int = 1
    seed: int = 0
    data: Optional[str] = None
    n: int = 2000
    synth_model: str = "garch"
    synth_mu: float = 0.0
    synth_omega: float = 1e-5
    synth_a: float = 0.1
    synth_b: float = 0.85
    synth_phi: tuple = (0.5,)
    synth_intercept: float = 0.0
    synth_sd: float = 1.0

    def replace(self, **changes) -> "ExperimentConfig":
        return validate(dataclasses.replace(self, **changes))

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_OPTIONAL = {"lambda_max", "fit_window", "fit_end", "start", "data"}
_INT = {"T", "B", "refit_every", "fit_window", "fit_end", "start", "ar_order", "window", "workers", "seed", "n"}
_TUPLE = {"c_grid", "synth_phi"}
_STR = {"task", "forecaster", "controller", "data", "synth_model"}


def _convert(key: str, text: str):
    if key in _OPTIONAL and text.lower() in ("", "none"):
        return None
    if key in _STR:
        return text
    if key in _TUPLE:
        parts = [p.strip() for p in text.split(",") if p.strip()]
        return tuple(float(p) for p in parts)
    if key in _INT:
        return int(text)
    return float(text)


def parse_config(text: str) -> ExperimentConfig:
    problems = []
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _FIELDS:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            values[key] = _convert(key, value)
        except ValueError:
            problems.append(f"line {lineno}: bad value {value!r} for {key}")
    cfg = ExperimentConfig(**values)
    problems += _problems(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def _problems(cfg: ExperimentConfig) -> list:
    out = []

    def need(ok, message):
        if not ok:
            out.append(message)

    need(cfg.task in TASKS, f"task must be one of {TASKS}")
    need(cfg.forecaster in FORECASTERS, f"forecaster must be one of {FORECASTERS}")
    need(cfg.controller in CONTROLLERS, f"controller must be one of {CONTROLLERS}")
    need(cfg.synth_model in SYNTH_MODELS, f"synth_model must be one of {SYNTH_MODELS}")
    need(0 < cfg.alpha_bar < 1, "alpha_bar must lie in (0, 1)")
    need(cfg.T >= 1, "T must be >= 1")
    need(cfg.B >= 1, "B must be >= 1")
    need(0 < cfg.c < 1, "c must lie in (0, 1)")
    need(cfg.lambda_max is None or cfg.lambda_max > 0, "lambda_max must be > 0")
    need(cfg.lambda_max_scale > 0, "lambda_max_scale must be > 0")
    need(0 <= cfg.lambda_init <= 1, "lambda_init must lie in [0, 1]")
    need(cfg.gamma_aci > 0, "gamma_aci must be > 0")
    need(cfg.refit_every >= 1, "refit_every must be >= 1")
    need(cfg.fit_window is None or cfg.fit_window >= 50, "fit_window must be >= 50")
    need(cfg.fit_end is None or cfg.fit_end >= 50, "fit_end must be >= 50")
    need(cfg.start is None or cfg.start >= 0, "start must be >= 0")
    need(cfg.ar_order >= 1, "ar_order must be >= 1")
    need(cfg.window >= 2 and cfg.window % 2 == 0, "window must be a positive even integer")
    need(len(cfg.c_grid) > 0 and all(0 < c < 1 for c in cfg.c_grid), "c_grid values must lie in (0, 1)")
    need(cfg.workers >= 1, "workers must be >= 1")
    need(cfg.seed >= 0, "seed must be >= 0")
    need(cfg.n >= 2, "n must be >= 2")
    need(cfg.synth_omega > 0, "synth_omega must be > 0")
    need(cfg.synth_a >= 0 and cfg.synth_b >= 0, "synth_a and synth_b must be >= 0")
    need(cfg.synth_a + cfg.synth_b < 1, "synth_a + synth_b must be < 1")
    need(len(cfg.synth_phi) >= 1, "synth_phi needs at least one coefficient")
    need(cfg.synth_sd >= 0, "synth_sd must be >= 0")
    if cfg.forecaster == "garch":
        need(cfg.task != "level", "forecaster garch needs task return or volatility")
    if cfg.forecaster == "oracle-gaussian":
        want = "ar" if cfg.task == "level" else "garch"
        need(cfg.synth_model == want, f"oracle-gaussian for task {cfg.task} needs synth_model = {want}")
    return out


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    problems = _problems(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for name, value in cfg.as_dict().items():
        if value is None:
            value = "none"
        elif isinstance(value, tuple):
            value = ", ".join(repr(v) for v in value)
        lines.append(f"{name} = {value}")
    return "\n".join(lines) + "\n"

"""Flat ``key = value`` experiment configuration files.

Blank lines and ``#`` comments are ignored. Unknown keys are errors, so a
typo never silently falls back to a default.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .protocol import ALGORITHMS
from .simnet import PRESETS


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ExperimentConfig:
    algorithm: str = "fedhp"
    workers: int = 16
    rounds: int = 150
    # data
    classes: int = 10
    features: int = 32
    samples_per_class: int = 200
    cluster_spread: float = 1.0
    class_sep: float = 0.7
    p: float = 0.6
    # model
    model: str = "softmax"
    hidden: int = 16
    # heterogeneity
    heterogeneity: str = "severe"
    base_compute_time: float = 0.005
    # topology: full | ring | path to an edge-list file
    base_topology: str = "full"
    # optimisation
    eta: float = 0.1
    eta_decay: float = 0.993
    batch_size: int = 32
    sigma_probes: int = 8
    # control
    beta1: float = 0.5
    beta2: float = 0.1
    tau_cap: int = 64
    tau: str = "auto"
    ld_i1: int = 4
    ld_i2: int = 1
    # run
    seed: int = 1
    eval_every: int = 1
    target_accuracy: float | None = None
    output: str = "metrics.csv"
    verbose: bool = False
    ledger_csv: str | None = None
    shards_csv: str | None = None

    def validate(self, base_dir: Path | None = None) -> "ExperimentConfig":
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(key, msg)

        need(self.algorithm in ALGORITHMS, "algorithm", f"must be one of {', '.join(ALGORITHMS)}")
        need(self.workers >= 2, "workers", "must be >= 2")
        need(self.rounds >= 0, "rounds", "must be >= 0")
        need(self.classes >= 2, "classes", "must be >= 2")
        need(self.features >= 1, "features", "must be >= 1")
        need(self.samples_per_class >= 2, "samples_per_class", "must be >= 2")
        need(self.cluster_spread >= 0, "cluster_spread", "must be >= 0")
        need(self.class_sep > 0, "class_sep", "must be > 0")
        need(0.0 <= self.p <= 1.0, "p", "must lie in [0, 1]")
        need(self.model in ("softmax", "mlp"), "model", "must be softmax or mlp")
        need(self.hidden >= 1, "hidden", "must be >= 1")
        need(self.heterogeneity in PRESETS, "heterogeneity", f"must be one of {', '.join(PRESETS)}")
        need(self.base_compute_time > 0, "base_compute_time", "must be > 0")
        need(self.eta > 0 and math.isfinite(self.eta), "eta", "must be a positive number")
        need(0 < self.eta_decay <= 1, "eta_decay", "must lie in (0, 1]")
        need(self.batch_size >= 1, "batch_size", "must be >= 1")
        need(self.sigma_probes >= 1, "sigma_probes", "must be >= 1")
        need(0 <= self.beta1 <= 1, "beta1", "must lie in [0, 1]")
        need(0 <= self.beta2 <= 1, "beta2", "must lie in [0, 1]")
        need(self.tau_cap >= 1, "tau_cap", "must be >= 1")
        need(self.tau == "auto" or (self.tau.isdigit() and int(self.tau) >= 1), "tau",
             "must be 'auto' or a positive integer")
        need(self.ld_i1 >= 1, "ld_i1", "must be >= 1")
        need(self.ld_i2 >= 0, "ld_i2", "must be >= 0")
        need(0 <= self.seed < 2**64, "seed", "must be a 64-bit unsigned integer")
        need(self.eval_every >= 1, "eval_every", "must be >= 1")
        need(self.target_accuracy is None or 0 < self.target_accuracy <= 1, "target_accuracy",
             "must lie in (0, 1]")
        if self.base_topology not in ("full", "ring"):
            path = Path(self.base_topology)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            need(path.is_file(), "base_topology", f"edge-list file {path} does not exist")
            self.base_topology = str(path)
        return self

    @property
    def fixed_tau(self) -> int | None:
        return None if self.tau == "auto" else int(self.tau)

    def items(self):
        for f in fields(self):
            yield f.name, getattr(self, f.name)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_BOOL = {"true": True, "yes": True, "1": True, "on": True,
         "false": False, "no": False, "0": False, "off": False}


def _coerce(key: str, raw: str, kind):
    text = raw.strip()
    optional = "None" in str(kind)
    if optional and text.lower() in ("", "none"):
        return None
    try:
        if "bool" in str(kind):
            return _BOOL[text.lower()]
        if "int" in str(kind):
            return int(text)
        if "float" in str(kind):
            return float(text)
    except (KeyError, ValueError):
        raise ConfigError(key, f"cannot parse {text!r} as {kind}") from None
    return text


def parse_config_text(text: str) -> ExperimentConfig:
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in kinds:
            raise ConfigError(key, "unknown configuration key")
        values[key] = _coerce(key, value, kinds[key])
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file {path} does not exist")
    return parse_config_text(path.read_text()).validate(base_dir=path.parent)


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    return "\n".join(f"{k} = {format_value(v)}" for k, v in cfg.items()) + "\n"

"""Experiment configuration and the flat key=value config-file format.

Files contain one ``key = value`` pair per line; blank lines and lines
starting with ``#`` are ignored.  Unknown keys are a hard error so typos
cannot silently change an experiment.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

EXPERIMENTS = ("mlp-mnist", "toy1d", "verify-kernels", "quadratic-oracle", "sweep")
ESTIMATORS = ("ste", "nspsa", "fogzo")
SURROGATES = ("identity", "hardtanh", "tanh", "approxsign", "cgm")
SWEEP_PARAMETERS = ("beta_min", "n", "eps_scale")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "mlp-mnist"
    estimator: str = "ste"
    surrogate: str = "identity"
    cgm_threshold: float = 0.25
    bits: int = 2          # 0 disables quantization
    epochs: int = 10
    batch_size: int = 512
    lr: float = 0.0        # <= 0: auto, 2e-3 * batch_size / 32
    seed: int = 0
    eps_scale: float = 1.0
    data_dir: str = "data"
    out_path: str = "out.csv"
    # estimator sub-config
    n: int = 1
    beta_min: float = 0.999
    beta_constant: bool = False
    r_percent: float = 0.0
    use_sign_flip: bool = True
    dist: str = ""         # empty: use the surrogate's implicit kernel
    # toy1d
    theta0: float = 0.2
    steps: int = 200
    # verification sample budgets
    mc_samples: int = 1_000_000
    oracle_samples: int = 100_000
    # sweep
    sweep_parameter: str = ""
    sweep_values: str = ""

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}; choose from {ESTIMATORS}")
        if self.surrogate not in SURROGATES:
            raise ConfigError(f"unknown surrogate {self.surrogate!r}; choose from {SURROGATES}")
        if self.bits < 0:
            raise ConfigError(f"bits must be >= 0, got {self.bits}")
        if self.sweep_parameter and self.sweep_parameter not in SWEEP_PARAMETERS:
            raise ConfigError(
                f"unknown sweep parameter {self.sweep_parameter!r}; choose from {SWEEP_PARAMETERS}"
            )

    @property
    def effective_lr(self) -> float:
        if self.lr > 0:
            return self.lr
        return 2e-3 * self.batch_size / 32.0

    def sweep_value_list(self) -> list[float]:
        if not self.sweep_values:
            raise ConfigError("sweep requires sweep_values (comma-separated numbers)")
        return [float(v) for v in self.sweep_values.split(",")]


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _parse_value(key: str, raw: str):
    ftype = _FIELD_TYPES[key]
    raw = raw.strip()
    if ftype == "bool":
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"invalid boolean for {key}: {raw!r}")
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    return raw


def parse_config_text(text: str, **overrides) -> ExperimentConfig:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _parse_value(key, raw)
    values.update(overrides)
    return ExperimentConfig(**values)


def load_config(path, **overrides) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(), **overrides)

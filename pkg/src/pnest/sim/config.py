"""
Experiment configuration: a flat ``key = value`` text file.

Lines starting with ``#`` (and trailing ``# ...``) are comments. Unknown keys
are an error. Supported keys and defaults::

    experiment            = mse            # mse | mse_vs_bcrb | ser
    block_length          = 101
    constellation_order   = 16             # 4 | 16 | 64
    pilot_density         = 1.0            # (0, 1]
    increment_model       = ar1            # white | ar1 | ar | table
    increment_variance    = 1e-3           # R(0) for white / ar1
    ar_alpha              = 0.9            # ar1 only
    ar_coeffs             = 0.5, 0.2       # ar only
    innovation_variance   = 7.5e-4         # ar only
    increment_table       = path/to/file   # table only, relative to the config file
    tail_rule             = zero           # zero | geometric (table only)
    theta1_variance       = 1e4
    truth_theta1_variance = <theta1_variance>
    snr_grid_db           = 0, 5, 10, 15, 20, 25, 30
    estimators            = map, eks:1, white_eks, dct
    map_tolerance         = 1e-6
    map_max_iterations    = 50
    map_backtracking      = true
    dct_coefficients      = auto
    n_trials              = 500            # ser default: enough for 2e5 data symbols
    n_detection_iterations = 3
    master_seed           = 1
    wrap_errors           = false
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..baselines import DctOptions
from ..errors import ConfigError, PhaseNoiseError
from ..estimators import estimator_label, parse_estimator_spec
from ..increments import PhaseIncrementModel, TailRule
from ..map import MapOptions, StepDamping
from ..signal import gray_qam, uniform_pilots

SER_TARGET_SYMBOLS = 200_000


class Experiment(str, enum.Enum):
    MSE = "mse"
    MSE_VS_BCRB = "mse_vs_bcrb"
    SER = "ser"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment = Experiment.MSE
    block_length: int = 101
    constellation_order: int = 16
    pilot_density: float = 1.0
    increment_model: str = "ar1"
    increment_variance: float = 1e-3
    ar_alpha: float = 0.9
    ar_coeffs: tuple[float, ...] = ()
    innovation_variance: float | None = None
    increment_table: str | None = None
    tail_rule: TailRule = TailRule.ZERO_BEYOND_TABLE
    theta1_variance: float = 1e4
    truth_theta1_variance: float | None = None
    snr_grid_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    estimators: tuple[str, ...] = ("map", "eks:1", "white_eks", "dct")
    map_tolerance: float = 1e-6
    map_max_iterations: int = 50
    map_backtracking: bool = True
    dct_coefficients: int | None = None
    n_trials: int | None = None
    n_detection_iterations: int = 3
    master_seed: int = 1
    wrap_errors: bool = False
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    # -- derived objects ---------------------------------------------------

    @property
    def data_aided(self) -> bool:
        return self.pilot_density >= 1.0

    @property
    def trials(self) -> int:
        if self.n_trials is not None:
            return self.n_trials
        if self.experiment is Experiment.SER:
            pattern = uniform_pilots(self.block_length, self.pilot_density)
            data = self.block_length - len(pattern.pilot_indices)
            return math.ceil(SER_TARGET_SYMBOLS / max(data, 1))
        return 500

    @property
    def sampling_theta1_variance(self) -> float:
        if self.truth_theta1_variance is None:
            return self.theta1_variance
        return self.truth_theta1_variance

    def increments(self) -> PhaseIncrementModel:
        kind = self.increment_model
        if kind == "white":
            return PhaseIncrementModel.white(self.increment_variance)
        if kind == "ar1":
            return PhaseIncrementModel.ar1(self.increment_variance, self.ar_alpha)
        if kind == "ar":
            return PhaseIncrementModel.autoregressive(self.ar_coeffs, self.innovation_variance)
        path = Path(self.increment_table)
        if not path.is_absolute():
            path = self.base_dir / path
        return PhaseIncrementModel.from_file(path, self.tail_rule)

    def map_options(self) -> MapOptions:
        damping = StepDamping.BACKTRACKING if self.map_backtracking else StepDamping.NONE
        return MapOptions(self.map_tolerance, self.map_max_iterations, damping)

    def dct_options(self) -> DctOptions:
        return DctOptions(self.dct_coefficients)

    def estimator_labels(self) -> list[str]:
        return [estimator_label(e) for e in self.estimators]

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        cfg = replace(self, **{k: v for k, v in kwargs.items() if v is not None})
        validate(cfg)
        return cfg


# ---------------------------------------------------------------------------
# Parsing


def _float(v):
    return float(v)


def _int(v):
    f = float(v)
    if not f.is_integer():
        raise ValueError(f"expected an integer, got {v!r}")
    return int(f)


def _bool(v):
    low = v.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _float_list(v):
    return tuple(float(x) for x in v.split(",") if x.strip())


def _name_list(v):
    return tuple(x.strip().lower() for x in v.split(",") if x.strip())


def _optional_int(v):
    return None if v.lower() in ("auto", "none") else _int(v)


def _optional_float(v):
    return None if v.lower() in ("auto", "none") else float(v)


def _choice(*options):
    def parse(v):
        low = v.lower()
        if low not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {v!r}")
        return low

    return parse


_PARSERS = {
    "experiment": lambda v: Experiment(_choice("mse", "mse_vs_bcrb", "ser")(v)),
    "block_length": _int,
    "constellation_order": _int,
    "pilot_density": _float,
    "increment_model": _choice("white", "ar1", "ar", "table"),
    "increment_variance": _float,
    "ar_alpha": _float,
    "ar_coeffs": _float_list,
    "innovation_variance": _float,
    "increment_table": str,
    "tail_rule": lambda v: TailRule(_choice("zero", "geometric")(v)),
    "theta1_variance": _float,
    "truth_theta1_variance": _optional_float,
    "snr_grid_db": _float_list,
    "estimators": _name_list,
    "map_tolerance": _float,
    "map_max_iterations": _int,
    "map_backtracking": _bool,
    "dct_coefficients": _optional_int,
    "n_trials": _int,
    "n_detection_iterations": _int,
    "master_seed": _int,
    "wrap_errors": _bool,
}

CONFIG_KEYS = tuple(_PARSERS)


def parse_config(text: str, base_dir: Path | str = ".") -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError("unknown key", line=lineno, field=key)
        if key in values:
            raise ConfigError("duplicate key", line=lineno, field=key)
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(str(exc), line=lineno, field=key) from None
    cfg = ExperimentConfig(base_dir=Path(base_dir), **values)
    validate(cfg)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent)


def validate(cfg: ExperimentConfig) -> None:
    def check(ok, field_name, message):
        if not ok:
            raise ConfigError(message, field=field_name)

    check(cfg.block_length >= 2, "block_length", "must be at least 2")
    check(0 < cfg.pilot_density <= 1, "pilot_density", "must lie in (0, 1]")
    check(len(cfg.snr_grid_db) > 0, "snr_grid_db", "must not be empty")
    check(len(cfg.estimators) > 0, "estimators", "must not be empty")
    check(cfg.n_trials is None or cfg.n_trials >= 1, "n_trials", "must be at least 1")
    check(cfg.n_detection_iterations >= 1, "n_detection_iterations", "must be at least 1")
    check(cfg.theta1_variance > 0, "theta1_variance", "must be positive")
    check(
        cfg.truth_theta1_variance is None or cfg.truth_theta1_variance > 0,
        "truth_theta1_variance",
        "must be positive",
    )
    check(cfg.master_seed >= 0, "master_seed", "must be non-negative")
    for spec in cfg.estimators:
        try:
            parse_estimator_spec(spec)
        except ValueError as exc:
            raise ConfigError(str(exc), field="estimators") from None
    labels = cfg.estimator_labels()
    check(len(set(labels)) == len(labels), "estimators", "duplicate estimator")
    if cfg.experiment is Experiment.MSE_VS_BCRB:
        check("map" in labels, "estimators", "mse_vs_bcrb needs the map estimator")
    if cfg.increment_model == "ar":
        check(len(cfg.ar_coeffs) > 0, "ar_coeffs", "required for increment_model = ar")
        check(cfg.innovation_variance is not None, "innovation_variance", "required for ar")
    if cfg.increment_model == "table":
        check(cfg.increment_table is not None, "increment_table", "required for table")
    try:
        gray_qam(cfg.constellation_order)
    except PhaseNoiseError as exc:
        raise ConfigError(str(exc), field="constellation_order") from None
    try:
        cfg.increments()
    except (PhaseNoiseError, OSError, TypeError) as exc:
        raise ConfigError(str(exc), field="increment_model") from None
    try:
        cfg.map_options()
    except ValueError as exc:
        raise ConfigError(str(exc), field="map_tolerance") from None

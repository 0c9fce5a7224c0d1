"""Experiment configuration and the flat `key = value` config file format.

One pair per line, `#` starts a comment, unknown keys are hard errors.
Penalty settings live on the same flat level as the trainer settings.
"""

from dataclasses import dataclass, field, fields, replace

from .archs import ARCHS
from .datasets import DATASETS
from .errors import ConfigError
from .penalties import PenaltyConfig

_PENALTY_KEYS = {f.name: f.type for f in fields(PenaltyConfig)}


@dataclass(frozen=True)
class ExperimentConfig:
    arch: str = "toycnn"
    dataset: str = "synthetic"
    data_dir: str = ""
    epochs: int = 30
    batch: int = 32
    seed: int = 0
    lr_max: float = 0.05
    lr_min: float = 0.001
    momentum: float = 0.9
    phase1_fraction: float = 0.6
    beta_phase2_scale: float = 0.5
    tau: float = 0.1
    finetune_epochs: int = 0
    augment: bool = False
    n_train: int = 256
    n_test: int = 128
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ConfigError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        if self.dataset not in DATASETS:
            raise ConfigError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.epochs < 2:
            raise ConfigError(f"epochs must be >= 2 (one per phase), got {self.epochs}")
        if not 0 < self.lr_min <= self.lr_max:
            raise ConfigError(f"need lr_max >= lr_min > 0, got "
                              f"{self.lr_max} / {self.lr_min}")
        if not 0 < self.phase1_fraction < 1:
            raise ConfigError(f"phase1_fraction must be in (0, 1), got "
                              f"{self.phase1_fraction}")
        if not 0 <= self.beta_phase2_scale <= 1:
            raise ConfigError(f"beta_phase2_scale must be in [0, 1], got "
                              f"{self.beta_phase2_scale}")
        if not 0 <= self.tau < 1:
            raise ConfigError(f"tau must be in [0, 1), got {self.tau}")
        if self.batch < 1 or self.finetune_epochs < 0:
            raise ConfigError("batch must be >= 1 and finetune_epochs >= 0")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")

    @property
    def phase1_epochs(self):
        """At least one epoch in each of the two training phases."""
        return min(max(int(round(self.phase1_fraction * self.epochs)), 1),
                   self.epochs - 1)

    def with_seed(self, seed):
        return replace(self, seed=seed)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)
             if f.name != "penalty"}
        d.update({name: getattr(self.penalty, name) for name in _PENALTY_KEYS})
        return d


def _convert(key, raw, typ):
    raw = raw.strip()
    try:
        if typ is bool or typ == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if typ is int or typ == "int":
            return int(raw)
        if typ is float or typ == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {typ}")


def parse_config_text(text):
    """Parse `key = value` lines into an ExperimentConfig."""
    exp_fields = {f.name: f.type for f in fields(ExperimentConfig)
                  if f.name != "penalty"}
    exp_kwargs, pen_kwargs = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key in exp_fields:
            exp_kwargs[key] = _convert(key, raw, exp_fields[key])
        elif key in _PENALTY_KEYS:
            pen_kwargs[key] = _convert(key, raw, _PENALTY_KEYS[key])
        else:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
    return ExperimentConfig(penalty=PenaltyConfig(**pen_kwargs), **exp_kwargs)


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")


def config_to_text(cfg):
    lines = [f"{key} = {value}" for key, value in cfg.to_dict().items()]
    return "\n".join(lines) + "\n"

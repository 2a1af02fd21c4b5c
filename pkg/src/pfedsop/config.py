"""Flat ``key = value`` experiment configuration.

Nested settings use dotted keys (``partition.alpha``).  Lines starting with
``#`` are comments.  Any key can be overridden from the environment as
``PFEDSOP_<KEY>`` with dots written as double underscores, e.g.
``PFEDSOP_PARTITION__ALPHA=0.5``.  A ``#`` preceded by whitespace starts a
trailing comment.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, fields

from .errors import ConfigError
from .fedcore import EVAL_POINTS, METHODS, HyperParams, participant_count
from .models import KINDS

ENV_PREFIX = "PFEDSOP_"
REQUIRED = ("method", "dataset", "clients", "rounds")
AUTO = "auto"
_TRAILING_COMMENT = re.compile(r"\s+#.*$")


@dataclass
class ExperimentConfig:
    method: str
    dataset: str
    clients: int
    rounds: int
    dataset_path: str = ""
    dataset_num_classes: int = 10
    dataset_input_dim: int = 20
    dataset_samples_per_class: int = 200
    dataset_class_separation: float = 2.0
    partition: str = "dirichlet"
    partition_alpha: float = 0.07
    partition_shard_size: int | None = None  # None: N // (clients * shards_per_client)
    partition_shards_per_client: int = 2
    participation_fraction: float = 0.2
    model: str = "mlp"
    model_hidden_dim: int = 32
    eta1: float = 1.0
    eta2: float = 0.1
    rho: float = 1.0
    lam: float = 1.0
    mu: float = 0.1
    ft_epochs: int = 1
    batch_size: int = 50
    local_epochs: int = 1
    eval_point: str = "personalized"
    seed: int = 0
    output_dir: str = "pfedsop-out"

    def hyperparams(self) -> HyperParams:
        return HyperParams(
            eta1=self.eta1, eta2=self.eta2, rho=self.rho, lam=self.lam, mu=self.mu,
            local_epochs=self.local_epochs, batch_size=self.batch_size,
            participation_fraction=self.participation_fraction, rounds=self.rounds,
            seed=self.seed, method=self.method, ft_epochs=self.ft_epochs,
            eval_point=self.eval_point,
        )

    def replace(self, **changes) -> "ExperimentConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        cfg = ExperimentConfig(**values)
        validate(cfg)
        return cfg


def _key_for(field_name):
    if field_name == "lam":
        return "lambda"
    for prefix in ("dataset_", "partition_", "model_"):
        if field_name.startswith(prefix):
            return prefix[:-1] + "." + field_name[len(prefix):]
    return field_name


FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
KEYS = {_key_for(name): name for name in FIELD_TYPES}


def _convert(key, field_name, text):
    kind = FIELD_TYPES[field_name]
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "int | None":
            return None if text == AUTO else int(text)
        if kind == "float":
            value = float(text)
            if not math.isfinite(value):
                raise ValueError("not finite")
            return value
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {kind}") from None
    return text


def _format(value) -> str:
    if value is None:
        return AUTO
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _check(cond, key, message):
    if not cond:
        raise ConfigError(key, message)


def validate(cfg: ExperimentConfig) -> None:
    _check(cfg.method in METHODS, "method", f"must be one of {', '.join(METHODS)}")
    _check(cfg.dataset in ("synthetic", "csv"), "dataset", "must be synthetic or csv")
    _check(cfg.dataset != "csv" or cfg.dataset_path, "dataset.path", "required when dataset = csv")
    _check(cfg.clients >= 1, "clients", "must be >= 1")
    _check(cfg.rounds >= 1, "rounds", "must be >= 1")
    _check(cfg.dataset_num_classes >= 2, "dataset.num_classes", "must be >= 2")
    _check(cfg.dataset_input_dim >= 1, "dataset.input_dim", "must be >= 1")
    _check(cfg.dataset_samples_per_class >= 1, "dataset.samples_per_class", "must be >= 1")
    _check(cfg.dataset_class_separation >= 0, "dataset.class_separation", "must be >= 0")
    _check(cfg.partition in ("dirichlet", "pathological"), "partition", "must be dirichlet or pathological")
    _check(cfg.partition_alpha > 0, "partition.alpha", "must be > 0")
    _check(cfg.partition_shard_size is None or cfg.partition_shard_size >= 1,
           "partition.shard_size", "must be >= 1 or auto")
    _check(cfg.partition_shards_per_client >= 1, "partition.shards_per_client", "must be >= 1")
    _check(0 < cfg.participation_fraction <= 1, "participation_fraction", "must lie in (0, 1]")
    _check(participant_count(cfg.clients, cfg.participation_fraction) >= 1, "participation_fraction",
           "selects no clients")
    _check(cfg.model in KINDS, "model", f"must be one of {', '.join(KINDS)}")
    _check(cfg.model != "mlp" or cfg.model_hidden_dim >= 1, "model.hidden_dim", "must be >= 1")
    for key in ("eta1", "eta2", "rho"):
        _check(getattr(cfg, key) > 0, key, "must be > 0")
    _check(cfg.lam > 0, "lambda", "must be > 0")
    _check(cfg.mu >= 0, "mu", "must be >= 0")
    _check(cfg.ft_epochs >= 0, "ft_epochs", "must be >= 0")
    _check(cfg.batch_size >= 1, "batch_size", "must be >= 1")
    _check(cfg.local_epochs >= 1, "local_epochs", "must be >= 1")
    _check(cfg.eval_point in EVAL_POINTS, "eval_point", f"must be one of {', '.join(EVAL_POINTS)}")


def parse_config(source, env=None) -> ExperimentConfig:
    """Parse a config file path or inline config text.

    ``env`` (default ``os.environ``) supplies ``PFEDSOP_*`` overrides.
    """
    text = str(source)
    if "\n" not in text and os.path.isfile(text):
        with open(text) as fh:
            text = fh.read()
    elif "=" not in text:
        raise ConfigError("config", f"no such file: {text}")
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = _TRAILING_COMMENT.sub("", line.strip())
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        raw[key] = value
    env = os.environ if env is None else env
    for key in KEYS:
        name = ENV_PREFIX + key.upper().replace(".", "__")
        if name in env:
            raw[key] = env[name]
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(key, "missing required key")
    cfg = ExperimentConfig(**{KEYS[k]: _convert(k, KEYS[k], v) for k, v in raw.items()})
    validate(cfg)
    return cfg


def serialize_config(cfg: ExperimentConfig) -> str:
    """Every key with its resolved value, one ``key = value`` per line."""
    return "".join(f"{key} = {_format(getattr(cfg, name))}\n" for key, name in KEYS.items())

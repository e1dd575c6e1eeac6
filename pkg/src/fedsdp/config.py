"""Experiment configuration: defaults, parsing, validation, serialization.

Configs are flat ``key = value`` text files (``#`` starts a comment).
Every field can also be overridden from the command line. Defaults are a
desk-scale profile (20 clients, 100 rounds) that finishes in seconds; the
paper-scale profile (100 clients, 400 rounds, clip bound 20) is available
through ``paper_profile``.
"""

import dataclasses
import hashlib
from dataclasses import dataclass

from .errors import ConfigurationError
from .noise import POLICIES


@dataclass(frozen=True)
class ExperimentConfig:
    # federation
    n_clients: int = 20
    n_hbc: int = 2
    rounds: int = 100
    activation: float = 0.1
    # local training
    local_epochs: int = 2
    learning_rate: float = 0.1
    batch_size: int = 50
    clip_bound: float = 1.0
    # privacy
    epsilon: float = 0.2
    delta: float | None = None  # None: 1 / batch_size
    alpha: float = 2.0
    beta: float = 0.1
    noise_policy: str = "fedsdp"
    rho_decay: float = 0.997
    # model
    hidden_layers: tuple[int, ...] = (32,)
    # data (synthetic unless data_dir is set)
    samples_per_client: int = 800
    n_features: int = 12
    private_dim: int = 4
    n_classes: int = 4
    class_separation: float = 3.0
    private_separation: float = 6.0
    general_attenuation: float = 0.4
    feature_noise: float = 1.0
    private_fraction: float | None = None
    validation_fraction: float = 0.2
    test_fraction: float = 0.1
    data_dir: str | None = None
    # run control
    master_seed: int = 42
    output_dir: str | None = None
    n_workers: int = 1

    @property
    def delta_value(self) -> float:
        return self.delta if self.delta is not None else 1.0 / self.batch_size

    @property
    def clients_per_round(self) -> int:
        return max(1, int(round(self.activation * self.n_clients)))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _parse_hidden(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigurationError(f"hidden_layers must be comma-separated integers, got {text!r}") from None


def _parse_optional(cast):
    def parse(text: str):
        return None if text.strip().lower() in ("", "none") else cast(text)
    return parse


_PARSERS = {
    "n_clients": int, "n_hbc": int, "rounds": int, "activation": float,
    "local_epochs": int, "learning_rate": float, "batch_size": int,
    "clip_bound": float, "epsilon": float, "delta": _parse_optional(float),
    "alpha": float, "beta": float, "noise_policy": str.strip, "rho_decay": float,
    "hidden_layers": _parse_hidden,
    "samples_per_client": int, "n_features": int, "private_dim": int,
    "n_classes": int, "class_separation": float, "private_separation": float,
    "general_attenuation": float, "feature_noise": float,
    "private_fraction": _parse_optional(float), "validation_fraction": float,
    "test_fraction": float, "data_dir": _parse_optional(str.strip),
    "master_seed": int, "output_dir": _parse_optional(str.strip), "n_workers": int,
}

FIELD_NAMES = tuple(f.name for f in dataclasses.fields(ExperimentConfig))
assert set(_PARSERS) == set(FIELD_NAMES)


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check every field constraint; errors name the offending field."""
    checks = [
        (cfg.n_clients >= 1, "n_clients", ">= 1"),
        (0 <= cfg.n_hbc <= cfg.n_clients, "n_hbc", "in [0, n_clients]"),
        (cfg.rounds >= 0, "rounds", ">= 0"),
        (0.0 < cfg.activation <= 1.0, "activation", "in (0, 1]"),
        (cfg.local_epochs >= 1, "local_epochs", ">= 1"),
        (cfg.learning_rate > 0, "learning_rate", "> 0"),
        (cfg.batch_size >= 1, "batch_size", ">= 1"),
        (cfg.clip_bound > 0, "clip_bound", "> 0"),
        (cfg.epsilon > 0, "epsilon", "> 0"),
        (0.0 < cfg.delta_value < 1.0, "delta", "in (0, 1)"),
        (cfg.alpha > 0, "alpha", "> 0"),
        (cfg.beta > 0, "beta", "> 0"),
        (cfg.noise_policy in POLICIES, "noise_policy", f"one of {sorted(POLICIES)}"),
        (0.0 < cfg.rho_decay < 1.0, "rho_decay", "in (0, 1)"),
        (all(h >= 1 for h in cfg.hidden_layers), "hidden_layers", "all >= 1"),
        (cfg.samples_per_client >= 10, "samples_per_client", ">= 10"),
        (cfg.n_classes >= 2, "n_classes", ">= 2"),
        (cfg.private_dim >= cfg.n_classes, "private_dim", ">= n_classes"),
        (cfg.n_features - cfg.private_dim >= cfg.n_classes,
         "n_features", ">= private_dim + n_classes"),
        (cfg.class_separation > 0, "class_separation", "> 0"),
        (cfg.private_separation >= 0, "private_separation", ">= 0"),
        (0.0 <= cfg.general_attenuation <= 1.0, "general_attenuation", "in [0, 1]"),
        (cfg.feature_noise > 0, "feature_noise", "> 0"),
        (cfg.private_fraction is None or 0.0 <= cfg.private_fraction <= 1.0,
         "private_fraction", "in [0, 1]"),
        (0.0 < cfg.validation_fraction < 1.0, "validation_fraction", "in (0, 1)"),
        (0.0 <= cfg.test_fraction < 1.0, "test_fraction", "in [0, 1)"),
        (cfg.n_workers >= 1, "n_workers", ">= 1"),
    ]
    for ok, name, constraint in checks:
        if not ok:
            raise ConfigurationError(
                f"config field {name!r} must be {constraint}, got {getattr(cfg, name)}"
            )
    if cfg.clients_per_round > cfg.n_clients:
        raise ConfigurationError(
            f"config field 'activation' selects {cfg.clients_per_round} of "
            f"{cfg.n_clients} clients"
        )
    return cfg


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines over the defaults (or a base config)."""
    cfg = base or ExperimentConfig()
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _PARSERS:
            raise ConfigurationError(f"line {line_no}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](value.strip())
        except ConfigurationError:
            raise
        except ValueError:
            raise ConfigurationError(
                f"line {line_no}: could not parse value for {key!r}: {value.strip()!r}"
            ) from None
    return validate_config(cfg.replace(**values))


def parse_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse a config file (missing file is an IO error, not a config error)."""
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base=base)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) round-trips exactly."""
    lines = []
    for name in FIELD_NAMES:
        value = getattr(cfg, name)
        if name == "hidden_layers":
            value = ",".join(str(h) for h in value)
        elif value is None:
            value = "none"
        elif isinstance(value, float):
            value = f"{value:.17g}"
        lines.append(f"{name} = {value}")
    return "\n".join(lines) + "\n"


def config_digest(cfg: ExperimentConfig) -> str:
    """Short hash of the config, excluding seed and output location."""
    canonical = serialize_config(cfg.replace(master_seed=0, output_dir=None))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def run_dir_name(cfg: ExperimentConfig) -> str:
    return f"{config_digest(cfg)}-s{cfg.master_seed}"


def paper_profile(cfg: ExperimentConfig | None = None) -> ExperimentConfig:
    """Full-scale settings: 100 clients (10 honest-but-curious), 400 rounds,
    10% activation, 2 local epochs, learning rate 0.1, clip bound 20."""
    base = cfg or ExperimentConfig()
    return base.replace(
        n_clients=100, n_hbc=10, rounds=400, activation=0.1,
        local_epochs=2, learning_rate=0.1, clip_bound=20.0,
    )

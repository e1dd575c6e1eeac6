"""Privacy estimation: Shapley attribution over {private, general} attributes.

Each round a client trains three models from the current global parameters:
one on its private rows, one on its general rows, and one on everything.
Validation accuracy of the three gives a two-player cooperative game with
value v(empty) = 0, v({p}) = c_private, v({u}) = c_general,
v({p, u}) = c_full, whose exact Shapley split is

    gamma_private = (c_full - c_general + c_private) / 2
    gamma_general = (c_full - c_private + c_general) / 2

The private attribute's share gamma_private / (gamma_private + gamma_general)
is the contribution ratio consumed by the noise scheduler.
"""

from dataclasses import dataclass

import numpy as np

from .data import ClientDataBundle
from .errors import ConfigurationError, DegenerateContributionError, EmptyDataError
from .model import ModelParams, TrainConfig, evaluate, train_epochs


@dataclass(frozen=True)
class ContributionTriple:
    """Validation accuracies of the full-data, private-only, and
    general-only models."""

    c_full: float
    c_private: float
    c_general: float

    def __post_init__(self):
        for name, v in (("c_full", self.c_full), ("c_private", self.c_private),
                        ("c_general", self.c_general)):
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class ShapleyPair:
    gamma_private: float
    gamma_general: float


def shapley_two_player(c: ContributionTriple) -> ShapleyPair:
    """Exact Shapley values of the two-attribute game described above."""
    return ShapleyPair(
        gamma_private=0.5 * (c.c_full - c.c_general + c.c_private),
        gamma_general=0.5 * (c.c_full - c.c_private + c.c_general),
    )


def contribution_ratio(s: ShapleyPair) -> float:
    """Private share of the total attribution.

    Raises DegenerateContributionError when both values are zero; callers
    apply their own fallback (the scheduler pins the ratio to 1).
    """
    total = s.gamma_private + s.gamma_general
    if total == 0.0:
        raise DegenerateContributionError(
            "both Shapley values are zero; contribution ratio is undefined"
        )
    return s.gamma_private / total


def estimate_round(bundle: ClientDataBundle, global_params: ModelParams,
                   cfg: TrainConfig, rng: np.random.Generator,
                   ) -> tuple[ModelParams, ContributionTriple]:
    """Train the three per-round models and measure their contributions.

    All three start from global_params and train for cfg.local_epochs. The
    full-data model consumes the generator passed in (so a plain training
    loop can reproduce it exactly); the private-only and general-only models
    use spawned child streams. The full-data model is the one returned for
    upload. A client without private rows gets c_private = 0.

    Raises EmptyDataError when the general training set is empty.
    """
    if bundle.general_train.n == 0:
        raise EmptyDataError("general training set is empty")
    private_rng, general_rng = rng.spawn(2)

    full_model = train_epochs(global_params, bundle.train_all(), cfg, rng)
    c_full = evaluate(full_model, bundle.validation)

    if bundle.private_train.n > 0:
        private_model = train_epochs(global_params, bundle.private_train, cfg, private_rng)
        c_private = evaluate(private_model, bundle.validation)
    else:
        c_private = 0.0

    general_model = train_epochs(global_params, bundle.general_train, cfg, general_rng)
    c_general = evaluate(general_model, bundle.validation)

    return full_model, ContributionTriple(c_full, c_private, c_general)

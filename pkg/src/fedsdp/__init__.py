"""fedsdp: a deterministic federated-learning simulator whose per-client,
per-round differential-privacy noise is scheduled by the Shapley-measured
contribution of private attributes to local training."""

from .bounds import ConvergenceConstants, bound_series, convergence_bound
from .config import (ExperimentConfig, config_digest, paper_profile, parse_config,
                     parse_config_text, serialize_config, validate_config)
from .data import (ClientDataBundle, CsvSchema, LabeledDataset, SyntheticSpec,
                   generate_federation, generate_synthetic, load_csv, split_private)
from .errors import (ConfigurationError, ConstraintError, DataFormatError,
                     DegenerateContributionError, EmptyDataError, FedSdpError,
                     ProtocolError)
from .metrics import (RunSummary, read_privacy_csv, read_rounds_csv, summarize,
                      write_privacy_csv, write_rounds_csv, write_run)
from .model import (ModelParams, TrainConfig, add_gaussian_noise, clip,
                    cross_entropy, evaluate, forward, init_params, mlp_layout,
                    predict_proba, sgd_epoch, train_epochs)
from .noise import (ConstantPolicy, DpParams, FedSdpPolicy, NoisePolicy,
                    NoProtection, RoundContext, SensitivityPolicy,
                    TimeVaryingPolicy, clamp_ratio, fedsdp_sigma, make_policy,
                    policy_sigma, privacy_tolerance, protect_upload, sensitivity)
from .seeding import derive_rng
from .shapley import (ContributionTriple, ShapleyPair, contribution_ratio,
                      estimate_round, shapley_two_player)
from .simulation import (ClientState, PrivacyReport, RoundLog, ServerState,
                         aggregate, build_federation, client_round,
                         recompute_report, run_simulation, select_clients)

__version__ = "0.1.0"

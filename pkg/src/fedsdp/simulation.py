"""The federated simulation loop.

Each round the server samples K = round(phi * N) clients, every selected
client measures its private/general contributions, trains its upload,
draws a noise scale from the active policy, and releases a clipped, noised
parameter vector. The server averages uploads weighted by training-set
size, evaluates the new global model on a pooled test set, and broadcasts.

Determinism: every stochastic step draws from a stream keyed by
(master_seed, stream tag, round, client id), so runs are bit-reproducible
at any level of intra-round parallelism, and repeated runs with equal
configs produce byte-identical metric files.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig, run_dir_name, serialize_config, validate_config
from .data import (ClientDataBundle, CsvSchema, LabeledDataset, SyntheticSpec,
                   concat, generate_federation, load_csv, load_csv_with_mask,
                   split_private)
from .errors import ConfigurationError, DegenerateContributionError, ProtocolError
from .model import (ModelParams, TrainConfig, cross_entropy, evaluate,
                    init_params, mlp_layout)
from .noise import (DpParams, NoisePolicy, RoundContext, clamp_ratio,
                    fedsdp_sigma, make_policy, privacy_tolerance, protect_upload)
from .seeding import STREAM_CLIENT, STREAM_DATA, STREAM_INIT, STREAM_SELECT, derive_rng
from .shapley import (ContributionTriple, ShapleyPair, contribution_ratio,
                      estimate_round, shapley_two_player)

log = logging.getLogger(__name__)


@dataclass
class ClientState:
    id: int
    bundle: ClientDataBundle
    dp: DpParams
    local_params: ModelParams
    prev_delta_norm: float = 0.0
    is_hbc: bool = False


@dataclass(frozen=True)
class ServerState:
    global_params: ModelParams
    round_index: int
    activation_rate: float
    n_clients: int

    @property
    def clients_per_round(self) -> int:
        k = max(1, int(round(self.activation_rate * self.n_clients)))
        if k > self.n_clients:
            raise ConfigurationError(
                f"activation rate {self.activation_rate} selects {k} of "
                f"{self.n_clients} clients"
            )
        return k


@dataclass(frozen=True)
class PrivacyReport:
    """Per-(client, round) record of the estimation and noising pipeline."""

    client_id: int
    c_full: float
    c_private: float
    c_general: float
    gamma_private: float
    gamma_general: float
    ratio: float
    tolerance: float
    sigma: float
    dataset_size: int


@dataclass(frozen=True)
class RoundLog:
    round_index: int
    selected_ids: tuple[int, ...]
    global_accuracy: float
    global_loss: float
    per_client: tuple[PrivacyReport, ...]
    total_sigma: float
    cumulative_sigma: float


def safe_ratio(pair: ShapleyPair) -> float:
    """Contribution ratio with the degenerate-case fallback: a client whose
    total attribution is zero gets R = 1 (maximal caution)."""
    try:
        return contribution_ratio(pair)
    except DegenerateContributionError:
        return 1.0


def recompute_report(report: PrivacyReport, dp: DpParams) -> tuple[float, float, float]:
    """Recompute (ratio, tolerance, scheduler sigma) from the report's own
    contribution triple, for self-consistency checks."""
    pair = shapley_two_player(ContributionTriple(report.c_full, report.c_private,
                                                 report.c_general))
    ratio = safe_ratio(pair)
    tolerance = privacy_tolerance(clamp_ratio(ratio), dp)
    return ratio, tolerance, fedsdp_sigma(tolerance, dp, report.dataset_size)


def select_clients(server: ServerState, n_clients: int,
                   rng: np.random.Generator) -> list[int]:
    """K distinct ids, uniform without replacement, ascending."""
    k = server.clients_per_round
    if k > n_clients:
        raise ConfigurationError(f"cannot select {k} of {n_clients} clients")
    if k == n_clients:
        return list(range(n_clients))
    return sorted(int(i) for i in rng.choice(n_clients, size=k, replace=False))


def client_round(client: ClientState, global_params: ModelParams,
                 policy: NoisePolicy, cfg: TrainConfig, rng: np.random.Generator,
                 round_index: int = 0, total_rounds: int = 1,
                 ) -> tuple[ModelParams, PrivacyReport]:
    """One client's round: estimate contributions, train, noise, upload.

    The full-data model trains on the generator passed in; the noise draw
    also comes from it, after training. Updates the client's
    prev_delta_norm in place (the orchestrator owns client state).
    """
    full_model, triple = estimate_round(client.bundle, global_params, cfg, rng)
    pair = shapley_two_player(triple)
    ratio = safe_ratio(pair)

    ctx = RoundContext(
        dp=client.dp,
        dataset_size=client.bundle.train_size,
        ratio=ratio,
        round_index=round_index,
        total_rounds=total_rounds,
        prev_delta_norm=client.prev_delta_norm,
    )
    sigma = policy.sigma(ctx)
    if policy.protects:
        upload = protect_upload(full_model, sigma, client.dp.clip_bound, rng)
    else:
        upload = full_model

    report = PrivacyReport(
        client_id=client.id,
        c_full=triple.c_full,
        c_private=triple.c_private,
        c_general=triple.c_general,
        gamma_private=pair.gamma_private,
        gamma_general=pair.gamma_general,
        ratio=ratio,
        tolerance=privacy_tolerance(clamp_ratio(ratio), client.dp),
        sigma=sigma,
        dataset_size=client.bundle.train_size,
    )
    client.local_params = full_model
    client.prev_delta_norm = float(np.linalg.norm(full_model.values - global_params.values))
    return upload, report


def aggregate(uploads: list[tuple[ModelParams, float]]) -> ModelParams:
    """Weighted average of parameter vectors (federated averaging)."""
    if not uploads:
        raise ProtocolError("nothing to aggregate")
    first, _ = uploads[0]
    for params, _ in uploads[1:]:
        if params.layout != first.layout:
            raise ProtocolError(
                f"upload layout {params.layout} does not match {first.layout}"
            )
    total = 0.0
    acc = np.zeros_like(first.values)
    for params, weight in uploads:
        if weight <= 0:
            raise ProtocolError(f"aggregation weight must be > 0, got {weight}")
        acc += weight * params.values
        total += weight
    return first.with_values(acc / total)


def build_federation(config: ExperimentConfig,
                     ) -> tuple[list[ClientDataBundle], LabeledDataset]:
    """Materialize client bundles and the pooled test set for a config."""
    if config.data_dir is not None:
        return load_federation_dir(config)
    spec = SyntheticSpec(
        samples_per_client=config.samples_per_client,
        n_features=config.n_features,
        private_dim=config.private_dim,
        n_classes=config.n_classes,
        class_separation=config.class_separation,
        private_separation=config.private_separation,
        general_attenuation=config.general_attenuation,
        feature_noise=config.feature_noise,
        private_fraction=config.private_fraction,
        validation_fraction=config.validation_fraction,
    )
    rng = derive_rng(config.master_seed, STREAM_DATA)
    return generate_federation(config.n_clients, spec, rng,
                               n_hbc=config.n_hbc, test_fraction=config.test_fraction)


def load_federation_dir(config: ExperimentConfig,
                        ) -> tuple[list[ClientDataBundle], LabeledDataset]:
    """Load client_XXX.csv files plus test.csv from config.data_dir."""
    schema = CsvSchema(label="y", private_flag="private", n_classes=config.n_classes)
    rng = derive_rng(config.master_seed, STREAM_DATA)
    bundles = []
    for i in range(config.n_clients):
        path = os.path.join(config.data_dir, f"client_{i:03d}.csv")
        data, mask = load_csv_with_mask(path, schema)
        bundles.append(split_private(data, mask, config.validation_fraction, rng))
    test_pool = load_csv(os.path.join(config.data_dir, "test.csv"),
                         CsvSchema(label="y", n_classes=config.n_classes))
    return bundles, test_pool


def run_simulation(config: ExperimentConfig,
                   federation: tuple[list[ClientDataBundle], LabeledDataset] | None = None,
                   ) -> list[RoundLog]:
    """Run the full loop and return one log per round.

    When config.output_dir is set, rounds.csv, privacy.csv, and
    summary.json are written under a run directory named by the config
    digest and seed.
    """
    validate_config(config)
    bundles, test_pool = federation if federation is not None else build_federation(config)
    if len(bundles) != config.n_clients:
        raise ConfigurationError(
            f"federation has {len(bundles)} bundles for {config.n_clients} clients"
        )

    layout = mlp_layout(config.n_features, config.hidden_layers, config.n_classes)
    global_params = init_params(layout, derive_rng(config.master_seed, STREAM_INIT))
    dp = DpParams(
        epsilon=config.epsilon, delta=config.delta_value, alpha=config.alpha,
        beta=config.beta, clip_bound=config.clip_bound,
    )
    clients = [
        ClientState(id=i, bundle=b, dp=dp, local_params=global_params,
                    is_hbc=i < config.n_hbc)
        for i, b in enumerate(bundles)
    ]
    policy = make_policy(config.noise_policy, rho_decay=config.rho_decay)
    train_cfg = TrainConfig(
        learning_rate=config.learning_rate, local_epochs=config.local_epochs,
        batch_size=config.batch_size, clip_bound=config.clip_bound,
    )

    logs: list[RoundLog] = []
    cumulative_sigma = 0.0
    for t in range(config.rounds):
        server = ServerState(global_params, t, config.activation, config.n_clients)
        selected = select_clients(server, config.n_clients,
                                  derive_rng(config.master_seed, STREAM_SELECT, t))

        def one(cid: int):
            return client_round(
                clients[cid], global_params, policy, train_cfg,
                derive_rng(config.master_seed, STREAM_CLIENT, t, cid),
                round_index=t, total_rounds=config.rounds,
            )

        if config.n_workers > 1:
            with ThreadPoolExecutor(max_workers=config.n_workers) as pool:
                results = dict(zip(selected, pool.map(one, selected)))
        else:
            results = {cid: one(cid) for cid in selected}

        uploads, reports = [], []
        for cid in selected:  # ascending id order regardless of execution order
            upload, report = results[cid]
            if not upload.is_finite():
                log.warning("round %d: client %d diverged (non-finite upload); dropped",
                            t, cid)
                continue
            uploads.append((upload, float(clients[cid].bundle.train_size)))
            reports.append(report)

        if uploads:
            global_params = aggregate(uploads)
        total_sigma = sum(r.sigma for r in reports)
        cumulative_sigma += total_sigma
        logs.append(RoundLog(
            round_index=t,
            selected_ids=tuple(selected),
            global_accuracy=evaluate(global_params, test_pool),
            global_loss=cross_entropy(global_params, test_pool),
            per_client=tuple(reports),
            total_sigma=total_sigma,
            cumulative_sigma=cumulative_sigma,
        ))

    if config.output_dir is not None:
        from .metrics import write_run

        write_run(logs, config, os.path.join(config.output_dir, run_dir_name(config)))
    return logs

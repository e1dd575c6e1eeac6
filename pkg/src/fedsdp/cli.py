"""Command-line driver: single runs, policy comparisons, the convergence
bound calculator, and synthetic-data export.

Exit codes: 0 on success, 1 on configuration errors, 2 on runtime errors.
"""

import os
import sys
from dataclasses import dataclass

import click
import numpy as np

from .bounds import ConvergenceConstants, bound_series
from .config import (ExperimentConfig, FIELD_NAMES, paper_profile, parse_config,
                     run_dir_name, validate_config)
from .data import SyntheticSpec, concat, generate_federation, write_csv
from .errors import ConfigurationError, FedSdpError
from .metrics import RunSummary, summarize, write_run
from .seeding import STREAM_DATA, derive_rng
from .simulation import build_federation, run_simulation


@dataclass(frozen=True)
class PolicyResult:
    """One row of a comparison report."""

    policy: str
    ordinal: int
    summary: RunSummary


def run_compare(config: ExperimentConfig, policies: list[str]) -> list[PolicyResult]:
    """Run each policy on identical data, seeds, and client selections.

    The federation is generated once and shared, so every policy sees
    byte-identical bundles; selection streams depend only on the master
    seed and round, so the selection sequences match as well.
    """
    if len(policies) < 2:
        raise ConfigurationError("compare needs at least 2 policies")
    federation = build_federation(config)
    results = []
    for ordinal, policy in enumerate(policies):
        cfg = validate_config(config.replace(noise_policy=policy))
        logs = run_simulation(cfg, federation=federation)
        results.append(PolicyResult(policy, ordinal, summarize(logs)))
    return results


def _apply_overrides(cfg: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    changes = {k: v for k, v in overrides.items() if v is not None}
    if "hidden_layers" in changes:
        text = changes["hidden_layers"]
        changes["hidden_layers"] = tuple(int(h) for h in text.split(",")) if text else ()
    return validate_config(cfg.replace(**changes))


def _config_options(fn):
    """Attach one CLI flag per experiment-config field."""
    flag_types = {
        "delta": float, "private_fraction": float, "data_dir": str,
        "output_dir": str, "hidden_layers": str, "noise_policy": str,
    }
    for name in reversed(FIELD_NAMES):
        default_type = type(getattr(ExperimentConfig(), name))
        opt_type = flag_types.get(name, default_type)
        fn = click.option(f"--{name.replace('_', '-')}", name, type=opt_type,
                          default=None, help=f"override config field {name}")(fn)
    return fn


def _load_config(config_path: str | None, use_paper_profile: bool,
                 overrides: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if use_paper_profile:
        cfg = paper_profile(cfg)
    if config_path:
        cfg = parse_config(config_path, base=cfg)
    return _apply_overrides(cfg, overrides)


@click.group()
def main():
    """Federated-learning simulator with contribution-driven noise scheduling."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="flat key=value config file")
@click.option("--paper-profile", "use_paper_profile", is_flag=True,
              help="full-scale profile (100 clients, 400 rounds, clip bound 20)")
@_config_options
def run(config_path, use_paper_profile, **overrides):
    """Run one simulation and print the summary."""
    try:
        cfg = _load_config(config_path, use_paper_profile, overrides)
    except (ConfigurationError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    try:
        if cfg.alpha == 2.0:
            click.echo("alpha = 2: noise calibration targets the standard "
                       "(epsilon, delta) differential-privacy regime")
        logs = run_simulation(cfg)
        summary = summarize(logs)
        click.echo(f"policy={cfg.noise_policy} rounds={len(logs)} "
                   f"best_acc={summary.best_accuracy:.4f} "
                   f"final{summary.final_window}_mean={summary.final5_mean:.4f} "
                   f"total_noise={summary.total_noise:.4f}")
        if cfg.output_dir:
            click.echo(f"wrote {os.path.join(cfg.output_dir, run_dir_name(cfg))}")
    except FedSdpError as exc:
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(2)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--paper-profile", "use_paper_profile", is_flag=True)
@click.option("--policies", default="fedsdp,constant",
              help="comma-separated policy list (duplicates allowed)")
@_config_options
def compare(config_path, use_paper_profile, policies, **overrides):
    """Run several policies on identical data and print a side-by-side table."""
    try:
        cfg = _load_config(config_path, use_paper_profile, overrides)
        policy_list = [p.strip() for p in policies.split(",") if p.strip()]
        if len(policy_list) < 2:
            raise ConfigurationError("compare needs at least 2 policies")
    except (ConfigurationError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    try:
        results = run_compare(cfg, policy_list)
    except FedSdpError as exc:
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"{'policy':>14} {'#':>2} {'best_acc':>9} {'final5':>8} "
               f"{'f5_std':>8} {'total_noise':>12}")
    for r in results:
        s = r.summary
        click.echo(f"{r.policy:>14} {r.ordinal:>2} {s.best_accuracy:>9.4f} "
                   f"{s.final5_mean:>8.4f} {s.final5_std:>8.4f} {s.total_noise:>12.4f}")


@main.command()
@click.option("--smoothness", "-L", type=float, required=True)
@click.option("--weak-convexity", "-r", type=float, required=True)
@click.option("--learning-rate", "-e", type=float, required=True)
@click.option("--local-epochs", "-E", type=int, required=True)
@click.option("--gradient-bound", "-G", type=float, required=True)
@click.option("--noise-bound", "-N", type=float, required=True)
@click.option("--activation-rate", "-p", type=float, required=True)
@click.option("--active-clients", "-K", type=int, required=True)
@click.option("--initial-gap", "-d", type=float, required=True)
@click.option("--t-max", type=int, default=0, show_default=True)
def bound(smoothness, weak_convexity, learning_rate, local_epochs, gradient_bound,
          noise_bound, activation_rate, active_clients, initial_gap, t_max):
    """Print the convergence bound as CSV rows (t,bound)."""
    try:
        constants = ConvergenceConstants(
            smoothness=smoothness, weak_convexity=weak_convexity,
            learning_rate=learning_rate, local_epochs=local_epochs,
            gradient_bound=gradient_bound, noise_bound=noise_bound,
            activation_rate=activation_rate, active_clients=active_clients,
            initial_gap=initial_gap,
        )
    except FedSdpError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    click.echo("t,bound")
    for t, value in enumerate(bound_series(constants, t_max)):
        click.echo(f"{t},{value:.17g}")


@main.command(name="gen-data")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
@_config_options
def gen_data(out_dir, config_path, **overrides):
    """Emit the synthetic federation as CSV files (client_XXX.csv, test.csv)."""
    try:
        cfg = _load_config(config_path, False, overrides)
    except (ConfigurationError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    try:
        spec = SyntheticSpec(
            samples_per_client=cfg.samples_per_client, n_features=cfg.n_features,
            private_dim=cfg.private_dim, n_classes=cfg.n_classes,
            class_separation=cfg.class_separation,
            private_separation=cfg.private_separation,
            general_attenuation=cfg.general_attenuation,
            feature_noise=cfg.feature_noise, private_fraction=cfg.private_fraction,
            validation_fraction=cfg.validation_fraction,
        )
        rng = derive_rng(cfg.master_seed, STREAM_DATA)
        bundles, test_pool = generate_federation(
            cfg.n_clients, spec, rng, n_hbc=cfg.n_hbc, test_fraction=cfg.test_fraction)
        os.makedirs(out_dir, exist_ok=True)
        for i, bundle in enumerate(bundles):
            full = concat([bundle.train_all(), bundle.validation])
            mask = np.zeros(full.n, dtype=bool)
            mask[:bundle.private_train.n] = True
            write_csv(os.path.join(out_dir, f"client_{i:03d}.csv"), full, mask)
        write_csv(os.path.join(out_dir, "test.csv"), test_pool)
        click.echo(f"wrote {len(bundles)} client files and test.csv to {out_dir}")
    except FedSdpError as exc:
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()

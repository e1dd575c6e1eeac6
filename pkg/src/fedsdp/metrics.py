"""Metric sinks: per-round CSV emission, summaries, and JSON output.

Floats are rendered with 17 significant digits so a parsed file
reproduces every value bit-exactly and replayed runs are byte-identical.
"""

import csv
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .config import ExperimentConfig, config_digest, serialize_config
from .errors import EmptyDataError
from .simulation import PrivacyReport, RoundLog

ROUND_COLUMNS = ("round", "selected_ids", "global_accuracy", "global_loss",
                 "total_sigma", "cumulative_sigma")
PRIVACY_COLUMNS = ("round", "client_id", "c_full", "c_private", "c_general",
                   "gamma_private", "gamma_general", "ratio", "tolerance",
                   "sigma", "dataset_size")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass(frozen=True)
class RunSummary:
    """Headline statistics of one run, following the usual reporting
    conventions: best accuracy over all rounds and the mean/std of the
    final five rounds (final_window records the actual window when fewer
    than five rounds exist)."""

    best_accuracy: float
    final5_mean: float
    final5_std: float
    total_noise: float
    config_digest: str
    final_window: int = 5


def summarize(logs: list[RoundLog], digest: str = "") -> RunSummary:
    if not logs:
        raise EmptyDataError("cannot summarize an empty run")
    accuracies = [entry.global_accuracy for entry in logs]
    window = min(5, len(accuracies))
    tail = np.array(accuracies[-window:])
    return RunSummary(
        best_accuracy=float(max(accuracies)),
        final5_mean=float(tail.mean()),
        final5_std=float(tail.std()),
        total_noise=float(sum(entry.total_sigma for entry in logs)),
        config_digest=digest,
        final_window=window,
    )


def write_rounds_csv(logs: list[RoundLog], path) -> None:
    """One row per round with the global metrics."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ROUND_COLUMNS)
        for entry in logs:
            writer.writerow([
                entry.round_index,
                ";".join(str(i) for i in entry.selected_ids),
                _fmt(entry.global_accuracy),
                _fmt(entry.global_loss),
                _fmt(entry.total_sigma),
                _fmt(entry.cumulative_sigma),
            ])


def write_privacy_csv(logs: list[RoundLog], path) -> None:
    """One row per (round, selected client) with the full privacy report."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PRIVACY_COLUMNS)
        for entry in logs:
            for r in entry.per_client:
                writer.writerow([
                    entry.round_index, r.client_id,
                    _fmt(r.c_full), _fmt(r.c_private), _fmt(r.c_general),
                    _fmt(r.gamma_private), _fmt(r.gamma_general),
                    _fmt(r.ratio), _fmt(r.tolerance), _fmt(r.sigma),
                    r.dataset_size,
                ])


def read_rounds_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = []
        for row in csv.DictReader(fh):
            rows.append({
                "round": int(row["round"]),
                "selected_ids": tuple(int(i) for i in row["selected_ids"].split(";") if i),
                "global_accuracy": float(row["global_accuracy"]),
                "global_loss": float(row["global_loss"]),
                "total_sigma": float(row["total_sigma"]),
                "cumulative_sigma": float(row["cumulative_sigma"]),
            })
    return rows


def read_privacy_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = []
        for row in csv.DictReader(fh):
            parsed = {"round": int(row["round"])}
            parsed.update({
                name: (int(row[name]) if name in ("client_id", "dataset_size")
                       else float(row[name]))
                for name in PRIVACY_COLUMNS[1:]
            })
            rows.append(parsed)
    return rows


def write_summary_json(summary: RunSummary, path, extra: dict | None = None) -> None:
    payload = asdict(summary)
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_run(logs: list[RoundLog], config: ExperimentConfig, run_dir) -> dict:
    """Write rounds.csv, privacy.csv, summary.json (plus the resolved
    config) under run_dir; returns the file paths."""
    os.makedirs(run_dir, exist_ok=True)
    paths = {
        "rounds": os.path.join(run_dir, "rounds.csv"),
        "privacy": os.path.join(run_dir, "privacy.csv"),
        "summary": os.path.join(run_dir, "summary.json"),
        "config": os.path.join(run_dir, "config.txt"),
    }
    write_rounds_csv(logs, paths["rounds"])
    write_privacy_csv(logs, paths["privacy"])
    digest = config_digest(config)
    write_summary_json(
        summarize(logs, digest=digest), paths["summary"],
        extra={"seed": config.master_seed, "policy": config.noise_policy,
               "rounds": len(logs)},
    )
    with open(paths["config"], "w", encoding="utf-8") as fh:
        fh.write(serialize_config(config))
    return paths

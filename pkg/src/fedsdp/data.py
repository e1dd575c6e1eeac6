"""Dataset generation, CSV ingestion, and private/general partitioning.

Each client's data divides into a private-attribute subset, a
general-attribute subset, and a held-out validation slice. Synthetic data
encodes the private attribute as a reserved feature block: private samples
carry a strong label-correlated signal there, while general samples have
that block zeroed. Private samples see the shared (general) feature block
at reduced strength, so a model trained without them is measurably worse
on private-type inputs until the global model has learned the reserved
block.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataFormatError, EmptyDataError


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix (n x d, float64) with integer labels in [0, n_classes)."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)
        if f.ndim != 2:
            raise ConfigurationError(f"features must be a 2-d matrix, got shape {f.shape}")
        if y.shape != (f.shape[0],):
            raise ConfigurationError(
                f"got {f.shape[0]} feature rows but {y.shape[0]} labels"
            )
        if self.n_classes < 1:
            raise ConfigurationError(f"n_classes must be >= 1, got {self.n_classes}")
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise ConfigurationError(
                f"labels must lie in [0, {self.n_classes}), got range "
                f"[{y.min()}, {y.max()}]"
            )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.features[idx], self.labels[idx], self.n_classes)


def concat(parts: list[LabeledDataset]) -> LabeledDataset:
    parts = [p for p in parts if p.n > 0]
    if not parts:
        raise EmptyDataError("nothing to concatenate")
    k = max(p.n_classes for p in parts)
    return LabeledDataset(
        np.concatenate([p.features for p in parts]),
        np.concatenate([p.labels for p in parts]),
        k,
    )


@dataclass(frozen=True)
class ClientDataBundle:
    """One client's partitioned data: private vs general training rows plus
    a validation slice disjoint from both."""

    private_train: LabeledDataset
    general_train: LabeledDataset
    validation: LabeledDataset
    has_private: bool

    @property
    def train_size(self) -> int:
        return self.private_train.n + self.general_train.n

    def train_all(self) -> LabeledDataset:
        """Full training set: private rows first, then general rows."""
        if self.private_train.n == 0:
            return self.general_train
        return concat([self.private_train, self.general_train])


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs for the synthetic classification task.

    n_features splits into a shared block (first n_features - private_dim
    columns) and a reserved private block (last private_dim columns). Class
    means sit on scaled axis directions, so both blocks need at least
    n_classes dimensions.
    """

    samples_per_client: int = 800
    n_features: int = 12
    private_dim: int = 4
    n_classes: int = 4
    class_separation: float = 3.0
    private_separation: float = 6.0
    general_attenuation: float = 0.4
    feature_noise: float = 1.0
    private_fraction: float | None = None  # None: per-client uniform in [0.1, 0.5]
    validation_fraction: float = 0.2

    def __post_init__(self):
        if self.samples_per_client < 1:
            raise ConfigurationError("samples_per_client must be >= 1")
        general_dim = self.n_features - self.private_dim
        if self.private_dim < self.n_classes or general_dim < self.n_classes:
            raise ConfigurationError(
                f"both feature blocks need >= {self.n_classes} dimensions; got "
                f"general={general_dim}, private={self.private_dim}"
            )
        if self.private_fraction is not None and not 0.0 <= self.private_fraction <= 1.0:
            raise ConfigurationError(
                f"private_fraction must lie in [0, 1], got {self.private_fraction}"
            )
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigurationError(
                f"validation_fraction must lie in (0, 1), got {self.validation_fraction}"
            )

    @property
    def general_dim(self) -> int:
        return self.n_features - self.private_dim


def _sample_rows(spec: SyntheticSpec, n: int, p_frac: float,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw n rows; ceil(p_frac * n) of them carry the private signal."""
    k, d_g, d_p = spec.n_classes, spec.general_dim, spec.private_dim
    labels = rng.permutation(np.arange(n) % k)
    n_private = int(np.ceil(p_frac * n))
    mask = np.zeros(n, dtype=bool)
    mask[rng.permutation(n)[:n_private]] = True

    x = rng.normal(0.0, spec.feature_noise, size=(n, spec.n_features))
    # Shared block: full-strength class means for general rows, attenuated
    # for private rows.
    strength = np.where(mask, spec.general_attenuation, 1.0) * spec.class_separation
    x[np.arange(n), labels % d_g] += strength
    # Reserved block: strong class means for private rows, exact zeros
    # (signal and noise) for general rows.
    x[~mask, d_g:] = 0.0
    x[mask, d_g + (labels[mask] % d_p)] += spec.private_separation
    return x, labels, mask


def split_private(data: LabeledDataset, private_row_mask: np.ndarray,
                  validation_fraction: float,
                  rng: np.random.Generator) -> ClientDataBundle:
    """Partition rows into (private, general, validation).

    The validation slice is stratified by label and carved from the whole
    set first; the remaining rows follow the mask. The three outputs
    partition the input exactly.
    """
    mask = np.asarray(private_row_mask, dtype=bool)
    if mask.shape != (data.n,):
        raise ConfigurationError(
            f"mask length {mask.shape} does not match row count {data.n}"
        )
    if not 0.0 < validation_fraction < 1.0:
        raise ConfigurationError(
            f"validation_fraction must lie in (0, 1), got {validation_fraction}"
        )
    n_val = int(round(validation_fraction * data.n))
    if n_val == 0:
        raise ConfigurationError(
            f"validation_fraction {validation_fraction} yields an empty "
            f"validation set for {data.n} rows"
        )

    # Largest-remainder allocation of the validation quota across labels.
    label_groups = [np.flatnonzero(data.labels == c) for c in range(data.n_classes)]
    exact = np.array([validation_fraction * g.size for g in label_groups])
    counts = np.floor(exact).astype(int)
    remainder_order = np.argsort(-(exact - counts), kind="stable")
    for c in remainder_order:
        if counts.sum() >= n_val:
            break
        if counts[c] < label_groups[c].size:
            counts[c] += 1

    val_idx = []
    for c, group in enumerate(label_groups):
        take = rng.permutation(group.size)[:counts[c]]
        val_idx.append(group[take])
    val_idx = np.sort(np.concatenate(val_idx)) if val_idx else np.array([], dtype=int)

    in_val = np.zeros(data.n, dtype=bool)
    in_val[val_idx] = True
    private_idx = np.flatnonzero(mask & ~in_val)
    general_idx = np.flatnonzero(~mask & ~in_val)

    private = data.subset(private_idx)
    return ClientDataBundle(
        private_train=private,
        general_train=data.subset(general_idx),
        validation=data.subset(val_idx),
        has_private=private.n > 0,
    )


def generate_federation(n_clients: int, spec: SyntheticSpec, rng: np.random.Generator,
                        n_hbc: int = 0, test_fraction: float = 0.1,
                        ) -> tuple[list[ClientDataBundle], LabeledDataset]:
    """Generate per-client bundles plus a pooled held-out test set.

    The first n_hbc clients are honest-but-curious and hold no private
    data. Each remaining client's private fraction is spec.private_fraction
    when set, otherwise drawn uniformly from [0.1, 0.5]. The test pool is
    carved from every client's rows before partitioning.
    """
    if not 0 <= n_hbc <= n_clients:
        raise ConfigurationError(f"n_hbc must lie in [0, {n_clients}], got {n_hbc}")
    if not 0.0 <= test_fraction < 1.0:
        raise ConfigurationError(f"test_fraction must lie in [0, 1), got {test_fraction}")

    bundles = []
    test_parts = []
    n_test = int(round(test_fraction * spec.samples_per_client))
    for i in range(n_clients):
        if i < n_hbc:
            p_frac = 0.0
        elif spec.private_fraction is not None:
            p_frac = spec.private_fraction
        else:
            p_frac = float(rng.uniform(0.1, 0.5))
        x, y, mask = _sample_rows(spec, spec.samples_per_client, p_frac, rng)
        data = LabeledDataset(x, y, spec.n_classes)
        if n_test:
            test_parts.append(data.subset(np.arange(n_test)))
            keep = np.arange(n_test, data.n)
            data, mask = data.subset(keep), mask[keep]
        bundles.append(split_private(data, mask, spec.validation_fraction, rng))

    if test_parts:
        test_pool = concat(test_parts)
    else:
        test_pool = LabeledDataset(
            np.empty((0, spec.n_features)), np.empty(0, dtype=np.int64), spec.n_classes
        )
    return bundles, test_pool


def generate_synthetic(n_clients: int, spec: SyntheticSpec, rng: np.random.Generator,
                       n_hbc: int = 0) -> list[ClientDataBundle]:
    """Generate client bundles only (no pooled test split)."""
    bundles, _ = generate_federation(n_clients, spec, rng, n_hbc, test_fraction=0.0)
    return bundles


@dataclass(frozen=True)
class CsvSchema:
    """Column roles for CSV ingestion: the label column, an optional 0/1
    private-flag column, and everything else as features."""

    label: str
    private_flag: str | None = None
    n_classes: int | None = None  # inferred as max label + 1 when None


def load_csv(path, schema: CsvSchema) -> LabeledDataset:
    """Parse a headered CSV into float64 features and integer labels."""
    data, _ = _load_csv_with_mask(path, schema)
    return data


def load_csv_with_mask(path, schema: CsvSchema) -> tuple[LabeledDataset, np.ndarray]:
    """Like load_csv, but also return the private-flag column as a bool mask."""
    return _load_csv_with_mask(path, schema)


def _load_csv_with_mask(path, schema: CsvSchema) -> tuple[LabeledDataset, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataError(f"{path}: file is empty") from None
        if schema.label not in header:
            raise DataFormatError(f"{path}: no column named {schema.label!r} in header")
        label_col = header.index(schema.label)
        flag_col = None
        if schema.private_flag is not None:
            if schema.private_flag not in header:
                raise DataFormatError(
                    f"{path}: no column named {schema.private_flag!r} in header"
                )
            flag_col = header.index(schema.private_flag)
        feature_cols = [i for i in range(len(header)) if i not in (label_col, flag_col)]

        rows, labels, flags = [], [], []
        for row_no, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path}: row {row_no} has {len(row)} cells, expected {len(header)}"
                )
            try:
                rows.append([float(row[i]) for i in feature_cols])
            except ValueError:
                bad = next(i for i in feature_cols if not _is_float(row[i]))
                raise DataFormatError(
                    f"{path}: row {row_no}, column {header[bad]!r}: "
                    f"{row[bad]!r} is not numeric"
                ) from None
            try:
                labels.append(int(row[label_col]))
            except ValueError:
                raise DataFormatError(
                    f"{path}: row {row_no}, column {schema.label!r}: "
                    f"{row[label_col]!r} is not an integer label"
                ) from None
            if flag_col is not None:
                flags.append(row[flag_col].strip() not in ("0", "", "false", "False"))

    if not rows:
        raise EmptyDataError(f"{path}: no data rows after the header")
    y = np.array(labels, dtype=np.int64)
    k = schema.n_classes if schema.n_classes is not None else int(y.max()) + 1
    if y.min() < 0 or y.max() >= k:
        raise DataFormatError(
            f"{path}: label {y.min() if y.min() < 0 else y.max()} outside [0, {k})"
        )
    data = LabeledDataset(np.array(rows, dtype=np.float64), y, k)
    mask = np.array(flags, dtype=bool) if flag_col is not None else np.zeros(data.n, dtype=bool)
    return data, mask


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def write_csv(path, data: LabeledDataset, private_mask: np.ndarray | None = None) -> None:
    """Write a dataset as a headered CSV (x0..x{d-1}, y[, private])."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = [f"x{i}" for i in range(data.n_features)] + ["y"]
        if private_mask is not None:
            header.append("private")
        writer.writerow(header)
        for i in range(data.n):
            row = [f"{v:.17g}" for v in data.features[i]] + [str(int(data.labels[i]))]
            if private_mask is not None:
                row.append("1" if private_mask[i] else "0")
            writer.writerow(row)

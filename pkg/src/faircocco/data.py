"""Dataset manifests, CSV ingestion, encoding, and deterministic splits.

A manifest is a JSON file describing one CSV dataset:

    {
      "csv_path": "german.csv",          # relative to the manifest file
      "task": "classification",          # or "regression"
      "seed": 0,
      "split": [0.6, 0.2, 0.2],
      "columns": [
        {"name": "age",     "role": "feature",   "dtype": "continuous"},
        {"name": "foreign", "role": "sensitive", "dtype": "binary"},
        {"name": "risk",    "role": "target",    "dtype": "binary"}
      ]
    }

Encoding rules (deterministic by construction):
  * binary   -> {0, 1} by lexicographic order of the string labels
  * discrete -> integer codes 0..k-1 by lexicographic order of the labels
  * continuous -> float64, standardized to mean 0 / unit variance using
    statistics fitted on the training split only

Rows containing any missing cell are dropped (the count is logged).  Split
sizes use floor for train and validation with the remainder going to test,
so small datasets never end up with an empty test split by rounding.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError

__all__ = [
    "ColumnSpec",
    "DatasetManifest",
    "DatasetTable",
    "load_manifest",
    "ingest",
    "binarise_at_median",
]

logger = logging.getLogger(__name__)

ROLES = ("feature", "sensitive", "target")
DTYPES = ("binary", "discrete", "continuous")
TASKS = ("classification", "regression")


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    role: str
    dtype: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ConfigError(f"column {self.name!r}: unknown role {self.role!r}")
        if self.dtype not in DTYPES:
            raise ConfigError(f"column {self.name!r}: unknown dtype {self.dtype!r}")


@dataclass(frozen=True)
class DatasetManifest:
    csv_path: Path
    columns: tuple[ColumnSpec, ...]
    task: str
    split: tuple[float, float, float]
    seed: int

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if len(self.split) != 3:
            raise ConfigError(f"split must have 3 fractions, got {self.split!r}")
        for f in self.split:
            if not 0.0 < f < 1.0:
                raise ConfigError(f"split fractions must lie in (0,1), got {f!r}")
        total = sum(self.split)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"split fractions sum to {total!r}, expected 1")
        targets = [c for c in self.columns if c.role == "target"]
        if len(targets) != 1:
            raise ConfigError(f"exactly one target column required, found {len(targets)}")
        if not any(c.role == "sensitive" for c in self.columns):
            raise ConfigError("at least one sensitive column is required")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate column names in manifest")
        target = targets[0]
        if self.task == "classification" and target.dtype != "binary":
            raise ConfigError("classification target must have dtype binary")
        if self.task == "regression" and target.dtype != "continuous":
            raise ConfigError("regression target must have dtype continuous")

    @property
    def target(self) -> ColumnSpec:
        return next(c for c in self.columns if c.role == "target")

    @property
    def sensitive(self) -> tuple[ColumnSpec, ...]:
        return tuple(c for c in self.columns if c.role == "sensitive")

    @property
    def features(self) -> tuple[ColumnSpec, ...]:
        return tuple(c for c in self.columns if c.role == "feature")


@dataclass
class DatasetTable:
    """Encoded numeric views of one split: features X, sensitive A, target Y."""

    x: np.ndarray
    a: np.ndarray
    y: np.ndarray
    feature_specs: tuple[ColumnSpec, ...]
    sensitive_specs: tuple[ColumnSpec, ...]
    target_spec: ColumnSpec
    task: str
    split_name: str = ""
    # per-column (mean, std) fitted on train for continuous columns
    scalers: dict[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def sensitive_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.sensitive_specs)

    def sensitive_column(self, name: str) -> np.ndarray:
        for i, spec in enumerate(self.sensitive_specs):
            if spec.name == name:
                return self.a[:, i]
        raise DataError(f"no sensitive column named {name!r}")


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse and validate a manifest file, checking columns against the CSV header."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"manifest file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest is not valid JSON: {exc}") from exc
    required = {"csv_path", "task", "seed", "split", "columns"}
    missing = required - raw.keys()
    if missing:
        raise ConfigError(f"manifest missing keys: {sorted(missing)}")
    try:
        columns = tuple(
            ColumnSpec(name=str(c["name"]), role=str(c["role"]), dtype=str(c["dtype"]))
            for c in raw["columns"]
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed columns entry: {exc}") from exc
    csv_path = Path(raw["csv_path"])
    if not csv_path.is_absolute():
        csv_path = path.parent / csv_path
    if not csv_path.is_file():
        raise ConfigError(f"csv file not found: {csv_path}")
    manifest = DatasetManifest(
        csv_path=csv_path,
        columns=columns,
        task=str(raw["task"]),
        split=tuple(float(f) for f in raw["split"]),
        seed=int(raw["seed"]),
    )
    header = pd.read_csv(csv_path, nrows=0).columns
    unknown = [c.name for c in columns if c.name not in header]
    if unknown:
        raise ConfigError(f"columns not present in CSV header: {unknown}")
    return manifest


def _encode_column(values: pd.Series, spec: ColumnSpec) -> np.ndarray:
    if spec.dtype == "continuous":
        numeric = pd.to_numeric(values, errors="coerce")
        bad = numeric.isna() & values.notna()
        if bad.any():
            examples = values[bad].unique()[:3]
            raise DataError(
                f"column {spec.name!r}: unparseable numeric values, e.g. {list(examples)!r}"
            )
        return numeric.to_numpy(dtype=np.float64)
    labels = values.astype(str)
    order = sorted(labels.dropna().unique())
    if spec.dtype == "binary" and len(order) > 2:
        raise DataError(f"column {spec.name!r}: binary column has {len(order)} distinct values")
    codes = labels.map({lab: i for i, lab in enumerate(order)})
    return codes.to_numpy(dtype=np.float64)


def _split_sizes(n: int, split: tuple[float, float, float]) -> tuple[int, int, int]:
    n_train = int(np.floor(split[0] * n))
    n_val = int(np.floor(split[1] * n))
    n_test = n - n_train - n_val
    return n_train, n_val, n_test


def ingest(manifest: DatasetManifest) -> tuple[DatasetTable, DatasetTable, DatasetTable]:
    """Load, encode, split, and standardize a dataset per its manifest."""
    df = pd.read_csv(manifest.csv_path)
    names = [c.name for c in manifest.columns]
    df = df[names]
    before = len(df)
    df = df.dropna()
    dropped = before - len(df)
    if dropped:
        logger.warning("dropped %d rows with missing cells (%d remain)", dropped, len(df))
    n = len(df)
    if n < 2:
        raise DataError(f"need at least 2 complete rows, got {n}")

    encoded = {c.name: _encode_column(df[c.name], c) for c in manifest.columns}

    n_train, n_val, n_test = _split_sizes(n, manifest.split)
    if min(n_train, n_val, n_test) < 1:
        raise DataError(
            f"split {manifest.split} of {n} rows yields an empty split "
            f"({n_train}/{n_val}/{n_test})"
        )
    rng = np.random.default_rng(manifest.seed)
    perm = rng.permutation(n)
    idx = {
        "train": np.sort(perm[:n_train]),
        "val": np.sort(perm[n_train : n_train + n_val]),
        "test": np.sort(perm[n_train + n_val :]),
    }

    scalers: dict[str, tuple[float, float]] = {}
    for spec in manifest.columns:
        if spec.dtype != "continuous":
            continue
        train_vals = encoded[spec.name][idx["train"]]
        mean = float(train_vals.mean())
        std = float(train_vals.std())
        if std == 0.0:
            logger.warning("column %r is constant on the training split", spec.name)
            std = 1.0
        scalers[spec.name] = (mean, std)
        encoded[spec.name] = (encoded[spec.name] - mean) / std

    def build(split_name: str) -> DatasetTable:
        rows = idx[split_name]

        def stack(specs: tuple[ColumnSpec, ...]) -> np.ndarray:
            if not specs:
                return np.zeros((rows.size, 0))
            return np.column_stack([encoded[s.name][rows] for s in specs])

        return DatasetTable(
            x=stack(manifest.features),
            a=stack(manifest.sensitive),
            y=stack((manifest.target,)),
            feature_specs=manifest.features,
            sensitive_specs=manifest.sensitive,
            target_spec=manifest.target,
            task=manifest.task,
            split_name=split_name,
            scalers=scalers,
        )

    return build("train"), build("val"), build("test")


def binarise_at_median(values: np.ndarray) -> np.ndarray:
    """1 where the value exceeds the (lower) median, else 0.

    Uses the lower median for even lengths so the threshold is always an
    order statistic of the data; constant input maps to all zeros.
    """
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size < 1:
        raise DataError("binarise_at_median needs at least one value")
    srt = np.sort(arr)
    lower_median = srt[(arr.size - 1) // 2]
    return (arr > lower_median).astype(np.int64)

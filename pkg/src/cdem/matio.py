"""File formats and dataset assembly.

Feature matrices travel either as a small binary container or as plain CSV.
The binary container is magic ``CDM1``, two little-endian uint32 fields
(rows, cols), then rows*cols float64 values in row-major order.  Label files
hold one decimal integer per line.  Experiment configuration is a flat
``key=value`` text file; relative paths inside it resolve against the
directory containing the file.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, FormatError

MAGIC = b"CDM1"
_HEADER = struct.Struct("<4sII")

KNOWN_COMPONENTS = ("erm", "da", "cde", "dfl")


def _as_matrix(values, context: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise FormatError(f"{context}: expected a 2-d matrix, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise FormatError(f"{context}: empty matrix of shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DataError(f"{context}: matrix contains NaN or infinite entries")
    return arr


def _read_binary_matrix(raw: bytes, context: str) -> np.ndarray:
    if len(raw) < _HEADER.size:
        raise FormatError(f"{context}: truncated header ({len(raw)} bytes)")
    magic, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{context}: bad magic {magic!r}")
    expected = rows * cols * 8
    payload = len(raw) - _HEADER.size
    if payload != expected:
        raise FormatError(
            f"{context}: header says {rows}x{cols} ({expected} payload bytes), found {payload}"
        )
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if rows < 1 or cols < 1:
        raise FormatError(f"{context}: empty matrix of shape ({rows}, {cols})")
    return _as_matrix(data.reshape(rows, cols).copy(), context)


def _read_csv_matrix(raw: bytes, context: str) -> np.ndarray:
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{context}: not a CDM1 container and not UTF-8 text") from exc
    rows: list[list[float]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([float(tok) for tok in line.split(",")])
        except ValueError as exc:
            raise FormatError(f"{context}: line {lineno}: non-numeric entry") from exc
    if not rows:
        raise FormatError(f"{context}: no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError(f"{context}: ragged rows (first row has {width} columns)")
    return _as_matrix(rows, context)


def read_matrix(path: str | Path) -> np.ndarray:
    """Load a matrix, sniffing the binary container by its magic bytes."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == MAGIC:
        return _read_binary_matrix(raw, str(path))
    return _read_csv_matrix(raw, str(path))


def write_matrix(matrix, path: str | Path) -> None:
    """Write a matrix; ``.csv`` paths get text, everything else the binary container."""
    path = Path(path)
    arr = _as_matrix(matrix, str(path))
    if path.suffix.lower() == ".csv":
        lines = [",".join(repr(v) for v in row) for row in arr.tolist()]
        path.write_text("\n".join(lines) + "\n")
        return
    rows, cols = arr.shape
    payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    path.write_bytes(_HEADER.pack(MAGIC, rows, cols) + payload)


def read_labels(path: str | Path) -> np.ndarray:
    """Load a label vector: one non-negative decimal integer per line."""
    path = Path(path)
    values: list[int] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            values.append(int(line.strip()))
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: not an integer label") from exc
    if not values:
        raise FormatError(f"{path}: no labels")
    labels = np.asarray(values, dtype=np.int64)
    if (labels < 0).any():
        raise DataError(f"{path}: negative label")
    return labels


def write_labels(labels, path: str | Path) -> None:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise DataError(f"{path}: labels must be 1-d")
    Path(path).write_text("\n".join(str(int(v)) for v in labels) + "\n")


@dataclass
class DomainPair:
    """Feature matrices for one adaptation task.

    Target labels are deliberately not part of this type: training code only
    ever sees the pair, evaluation labels travel separately.
    """

    source_x: np.ndarray
    source_y: np.ndarray
    target_x: np.ndarray
    n_classes: int
    source_class_counts: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.source_x = _as_matrix(self.source_x, "source features")
        self.target_x = _as_matrix(self.target_x, "target features")
        self.source_y = np.asarray(self.source_y, dtype=np.int64)
        if self.source_y.ndim != 1:
            raise DataError("source labels must be 1-d")
        if self.source_x.shape[0] != self.source_y.shape[0]:
            raise DataError(
                f"source has {self.source_x.shape[0]} rows but {self.source_y.shape[0]} labels"
            )
        if self.source_x.shape[1] != self.target_x.shape[1]:
            raise DataError(
                f"feature width mismatch: source {self.source_x.shape[1]}, "
                f"target {self.target_x.shape[1]}"
            )
        if self.n_classes < 2:
            raise DataError("need at least two classes")
        if self.source_y.min() < 0 or self.source_y.max() >= self.n_classes:
            raise DataError("source labels outside [0, n_classes)")
        counts = np.bincount(self.source_y, minlength=self.n_classes)
        if (counts == 0).any():
            missing = int(np.flatnonzero(counts == 0)[0])
            raise DataError(f"class {missing} has no source samples")
        self.source_class_counts = counts

    @property
    def n_source(self) -> int:
        return self.source_x.shape[0]

    @property
    def n_target(self) -> int:
        return self.target_x.shape[0]

    @property
    def n_features(self) -> int:
        return self.source_x.shape[1]


@dataclass
class DatasetEntry:
    features: Path
    labels: Path | None = None


@dataclass
class ExperimentConfig:
    """Fully resolved experiment settings (defaults match the benchmark setup)."""

    source_features: Path | None = None
    source_labels: Path | None = None
    target_features: Path | None = None
    target_labels: Path | None = None
    pca_dim: int = 128
    subspace_dim: int = 32
    iterations: int = 11
    beta: float = 0.1
    lam: float = 0.1
    gamma: float = 0.1
    eta: float = 0.1
    delta: float = 1.0
    seed: int = 0
    normalize: bool = True
    joint_pca: bool = True
    kmeans_warm_start: bool = False
    legacy_beta_prefactor: bool = False
    include_unselected_in_m0: bool = True
    components: tuple[str, ...] = KNOWN_COMPONENTS
    datasets: dict[str, DatasetEntry] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.pca_dim < 1 or self.subspace_dim < 1:
            raise ConfigError("pca_dim and subspace_dim must be positive")
        if self.subspace_dim > self.pca_dim:
            raise ConfigError(
                f"subspace_dim={self.subspace_dim} exceeds pca_dim={self.pca_dim}"
            )
        if self.iterations < 1:
            raise ConfigError("iterations must be at least 1")
        for name in ("beta", "lam", "gamma", "eta", "delta"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        bad = [c for c in self.components if c not in KNOWN_COMPONENTS]
        if bad:
            raise ConfigError(f"unknown components: {bad}")

    def with_components(self, components: tuple[str, ...]) -> "ExperimentConfig":
        return replace(self, components=components)


_BOOL_KEYS = {
    "normalize",
    "joint_pca",
    "kmeans_warm_start",
    "legacy_beta_prefactor",
    "include_unselected_in_m0",
}
_INT_KEYS = {"pca_dim", "subspace_dim", "iterations", "seed"}
_FLOAT_KEYS = {"beta", "lambda", "gamma", "eta", "delta"}
_PATH_KEYS = {"source_features", "source_labels", "target_features", "target_labels"}


def _parse_bool(value: str, key: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def parse_config_text(text: str, base_dir: Path) -> ExperimentConfig:
    kwargs: dict = {}
    datasets: dict[str, DatasetEntry] = {}
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        if key.startswith("dataset."):
            parts = key.split(".")
            if len(parts) != 3 or parts[2] not in ("features", "labels"):
                raise ConfigError(f"line {lineno}: bad dataset key {key!r}")
            name = parts[1]
            entry = datasets.setdefault(name, DatasetEntry(features=Path()))
            if parts[2] == "features":
                entry.features = base_dir / value
            else:
                entry.labels = base_dir / value
            continue
        if key in _PATH_KEYS:
            kwargs[key] = base_dir / value
        elif key in _INT_KEYS:
            try:
                kwargs[key] = int(value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {key} must be an integer") from exc
        elif key in _FLOAT_KEYS:
            try:
                parsed = float(value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {key} must be a number") from exc
            kwargs["lam" if key == "lambda" else key] = parsed
        elif key in _BOOL_KEYS:
            kwargs[key] = _parse_bool(value, key)
        elif key == "components":
            kwargs[key] = tuple(tok.strip() for tok in value.split(",") if tok.strip())
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    for name, entry in datasets.items():
        if entry.features == Path():
            raise ConfigError(f"dataset.{name}: missing features path")
    kwargs["datasets"] = datasets
    return ExperimentConfig(**kwargs)


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a flat key=value experiment file."""
    path = Path(path)
    return parse_config_text(path.read_text(), path.parent.resolve())


def _resolve_task_paths(
    config: ExperimentConfig, task: str | None
) -> tuple[Path, Path, Path, Path | None]:
    if task is None:
        if config.source_features is None or config.source_labels is None:
            raise ConfigError("config does not define source_features/source_labels")
        if config.target_features is None:
            raise ConfigError("config does not define target_features")
        return (
            config.source_features,
            config.source_labels,
            config.target_features,
            config.target_labels,
        )
    if "-" not in task:
        raise ConfigError(f"task {task!r}: expected SOURCE-TARGET")
    src_name, _, tgt_name = task.partition("-")
    for name in (src_name, tgt_name):
        if name not in config.datasets:
            raise ConfigError(f"task {task!r}: dataset {name!r} not in registry")
    src = config.datasets[src_name]
    tgt = config.datasets[tgt_name]
    if src.labels is None:
        raise ConfigError(f"dataset {src_name!r} has no label file, cannot be a source")
    return src.features, src.labels, tgt.features, tgt.labels


def load_domain_pair(config: ExperimentConfig, task: str | None = None) -> DomainPair:
    """Assemble the training-visible portion of a task (never target labels)."""
    src_x_path, src_y_path, tgt_x_path, _ = _resolve_task_paths(config, task)
    source_x = read_matrix(src_x_path)
    source_y = read_labels(src_y_path)
    target_x = read_matrix(tgt_x_path)
    n_classes = int(source_y.max()) + 1
    return DomainPair(source_x, source_y, target_x, n_classes)


def load_eval_labels(
    config: ExperimentConfig, pair: DomainPair, task: str | None = None
) -> np.ndarray | None:
    """Load held-out target labels for scoring, or None when unavailable."""
    _, _, _, tgt_y_path = _resolve_task_paths(config, task)
    if tgt_y_path is None:
        return None
    labels = read_labels(tgt_y_path)
    if labels.shape[0] != pair.n_target:
        raise DataError(
            f"{tgt_y_path}: {labels.shape[0]} labels for {pair.n_target} target rows"
        )
    if labels.max() >= pair.n_classes:
        raise DataError(f"{tgt_y_path}: label outside [0, {pair.n_classes})")
    return labels

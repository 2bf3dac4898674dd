"""
Dataset ingestion: sparse multi-label text, dense CSV, synthetic streams, seed split.

Sparse format, one example per line::

    #dims p q                      (optional first line)
    0,2 1:1.0 3:0.5                (label ids 0-based, feature indices 1-based)
     2:1                           (leading space: empty label set)
"""

import io
import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np
import pandas as pd

from oml_stream.exceptions import ConfigError, DataParseError, DimensionError
from oml_stream.models.schemas import DatasetStats, SynthConfig

logger = logging.getLogger(__name__)

DIMS_HEADER = "#dims"


@dataclass(frozen=True)
class Example:
    """One instance: dense features (p) and a binary label vector (q)."""

    features: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True)
class StreamDataset:
    """Ordered examples stored as an n x p feature matrix and n x q label matrix."""

    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    _examples: list[Example] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=np.float64, order="C")
        labels = np.array(self.labels, dtype=np.int8, order="C")
        if features.ndim != 2 or labels.ndim != 2:
            raise DimensionError("features and labels must be 2-d matrices")
        if features.shape[0] != labels.shape[0]:
            raise DimensionError(
                f"{features.shape[0]} feature rows but {labels.shape[0]} label rows"
            )
        if features.shape[0] == 0:
            raise DataParseError("dataset has no examples")
        if features.shape[1] < 1 or labels.shape[1] < 1:
            raise DimensionError("dataset needs p >= 1 and q >= 1")
        if not np.isin(labels, (0, 1)).all():
            raise DataParseError("labels must be 0/1")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def p(self) -> int:
        return int(self.features.shape[1])

    @property
    def q(self) -> int:
        return int(self.labels.shape[1])

    @property
    def examples(self) -> list[Example]:
        if self._examples is None:
            rows = [
                Example(features=x, labels=y)
                for x, y in zip(self.features, self.labels, strict=True)
            ]
            object.__setattr__(self, "_examples", rows)
        return self._examples  # type: ignore[return-value]

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[Example]:
        return iter(self.examples)

    def __getitem__(self, index: int) -> Example:
        return self.examples[index]

    def subset(self, indices: np.ndarray, name: str | None = None) -> "StreamDataset":
        """Rows in the given order."""
        return StreamDataset(
            features=self.features[indices],
            labels=self.labels[indices],
            name=name or self.name,
        )

    def equals(self, other: "StreamDataset") -> bool:
        """Exact equality of shapes and values (names ignored)."""
        return (
            self.features.shape == other.features.shape
            and self.labels.shape == other.labels.shape
            and bool(np.array_equal(self.features, other.features))
            and bool(np.array_equal(self.labels, other.labels))
        )


def _as_stream(text: TextIO | str) -> TextIO:
    return io.StringIO(text) if isinstance(text, str) else text


def _parse_dims_header(line: str, lineno: int) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 3 or parts[0] != DIMS_HEADER:
        raise DataParseError(f"bad header {line!r}, expected '#dims p q'", line=lineno)
    try:
        p, q = int(parts[1]), int(parts[2])
    except ValueError as e:
        raise DataParseError(f"bad header {line!r}: {e}", line=lineno) from e
    if p < 1 or q < 1:
        raise DimensionError(f"header declares p={p}, q={q}", line=lineno)
    return p, q


def _parse_labels(field_text: str, lineno: int) -> list[int]:
    labels: list[int] = []
    for token in field_text.split(","):
        try:
            label = int(token)
        except ValueError as e:
            raise DataParseError(f"bad label id {token!r}", line=lineno) from e
        if label < 0:
            raise DataParseError(f"negative label id {label}", line=lineno)
        labels.append(label)
    return labels


def _parse_features(tokens: list[str], lineno: int) -> dict[int, float]:
    features: dict[int, float] = {}
    for token in tokens:
        index_text, sep, value_text = token.partition(":")
        if not sep:
            raise DataParseError(f"bad feature token {token!r}", line=lineno)
        try:
            index = int(index_text)
            value = float(value_text)
        except ValueError as e:
            raise DataParseError(f"bad feature token {token!r}", line=lineno) from e
        if index < 1:
            raise DataParseError(f"feature index {index} < 1", line=lineno)
        if not math.isfinite(value):
            raise DataParseError(f"non-finite feature value {token!r}", line=lineno)
        if index in features:
            raise DataParseError(f"duplicate feature index {index}", line=lineno)
        features[index] = value
    return features


def parse_sparse_multilabel(text: TextIO | str, name: str = "dataset") -> StreamDataset:
    """Parse the sparse multi-label line format into a dense dataset."""
    stream = _as_stream(text)
    declared: tuple[int, int] | None = None
    rows: list[tuple[list[int], dict[int, float], int]] = []

    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if line == "":
            continue
        if line.startswith("#"):
            if declared is None and not rows and line.startswith(DIMS_HEADER):
                declared = _parse_dims_header(line, lineno)
                continue
            raise DataParseError("header allowed only as the first line", line=lineno)

        if line[0].isspace():
            label_field, rest = "", line
        else:
            label_field, _, rest = line.partition(" ")
        labels = _parse_labels(label_field, lineno) if label_field else []
        features = _parse_features(rest.split(), lineno)
        rows.append((labels, features, lineno))

    if not rows:
        raise DataParseError("no examples found")

    if declared is not None:
        p, q = declared
        for labels, features, lineno in rows:
            if labels and max(labels) >= q:
                raise DimensionError(f"label id {max(labels)} >= q={q}", line=lineno)
            if features and max(features) > p:
                raise DimensionError(
                    f"feature index {max(features)} > p={p}", line=lineno
                )
    else:
        p = max((max(f) for _, f, _ in rows if f), default=0)
        q = max((max(lbl) + 1 for lbl, _, _ in rows if lbl), default=0)
        if p < 1 or q < 1:
            raise DimensionError(
                "cannot infer dimensions without a '#dims p q' header",
                details={"p": p, "q": q},
            )

    X = np.zeros((len(rows), p), dtype=np.float64)
    Y = np.zeros((len(rows), q), dtype=np.int8)
    for i, (labels, features, _) in enumerate(rows):
        Y[i, labels] = 1
        for index, value in features.items():
            X[i, index - 1] = value

    logger.debug("parsed %d examples (p=%d, q=%d) from sparse text", len(rows), p, q)
    return StreamDataset(features=X, labels=Y, name=name)


def write_sparse_multilabel(
    ds: StreamDataset, stream: TextIO, include_header: bool = True
) -> None:
    """Serialize in the sparse format; floats use their shortest exact repr."""
    if include_header:
        stream.write(f"{DIMS_HEADER} {ds.p} {ds.q}\n")
    for x, y in zip(ds.features, ds.labels, strict=True):
        label_field = ",".join(str(j) for j in np.flatnonzero(y))
        tokens = [f"{j + 1}:{float(x[j])!r}" for j in np.flatnonzero(x)]
        stream.write(label_field + " " + " ".join(tokens) + "\n")


def parse_dense_csv(text: TextIO | str, q: int, name: str = "dataset") -> StreamDataset:
    """Parse a CSV with a header row whose last ``q`` columns are 0/1 labels."""
    if q < 1:
        raise DimensionError(f"q must be >= 1, got {q}")
    try:
        # header=None makes rows longer than the first line a ParserError
        raw = pd.read_csv(
            _as_stream(text),
            header=None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError as e:
        raise DataParseError("empty CSV input") from e
    except pd.errors.ParserError as e:
        raise DataParseError(f"ragged CSV: {e}") from e

    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = [str(c) for c in raw.iloc[0]]

    if frame.empty:
        raise DataParseError("CSV has a header but no rows")
    n_cols = frame.shape[1]
    if n_cols <= q:
        raise DimensionError(f"{n_cols} columns leave no features for q={q}")

    missing = frame.isna().to_numpy()
    if missing.any():
        row = int(np.argwhere(missing)[0][0])
        raise DataParseError("ragged row (too few fields)", line=row + 2)

    values = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        row, col = (int(i) for i in np.argwhere(bad)[0])
        raise DataParseError(
            f"non-numeric cell {frame.iat[row, col]!r} in column {frame.columns[col]!r}",
            line=row + 2,
        )

    label_values = values[:, n_cols - q :]
    not_binary = ~np.isin(label_values, (0.0, 1.0))
    if not_binary.any():
        row, col = (int(i) for i in np.argwhere(not_binary)[0])
        raise DataParseError(
            f"non-binary label {frame.iat[row, n_cols - q + col]!r}", line=row + 2
        )

    return StreamDataset(
        features=values[:, : n_cols - q],
        labels=label_values.astype(np.int8),
        name=name,
    )


def write_dense_csv(ds: StreamDataset, stream: TextIO) -> None:
    """Write the header ``f1..fp,l1..lq`` and one row per example."""
    columns = [f"f{j + 1}" for j in range(ds.p)] + [f"l{j + 1}" for j in range(ds.q)]
    frame = pd.concat(
        [
            pd.DataFrame(ds.features, columns=columns[: ds.p]),
            pd.DataFrame(ds.labels.astype(np.int64), columns=columns[ds.p :]),
        ],
        axis=1,
    )
    frame.to_csv(stream, index=False, lineterminator="\n")


def load_dataset(
    path: str | Path, fmt: str | None = None, q: int | None = None
) -> StreamDataset:
    """Load a dataset file; ``fmt`` is 'sparse' or 'csv' (default: by extension)."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "sparse")
    if not path.is_file():
        raise DataParseError(f"dataset file not found: {path}", details={"path": str(path)})

    try:
        with path.open(encoding="utf-8", newline="") as stream:
            if fmt == "sparse":
                return parse_sparse_multilabel(stream, name=path.stem)
            if fmt == "csv":
                if q is None:
                    raise ConfigError("reading a CSV dataset requires q (label count)")
                return parse_dense_csv(stream, q=q, name=path.stem)
    except UnicodeDecodeError as e:
        raise DataParseError(
            f"{path}: not valid UTF-8 ({e.reason} at byte {e.start})",
            details={"path": str(path)},
        ) from e
    raise ConfigError(f"unknown dataset format {fmt!r}", details={"format": fmt})


def split_seed(
    ds: StreamDataset, fraction: float, rng_seed: int, shuffle: bool = True
) -> tuple[StreamDataset, StreamDataset]:
    """Split into the initial memory (seed) and the stream, round(fraction * n) seed rows."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"seed fraction must be in (0, 1), got {fraction}")
    n_seed = int(math.floor(fraction * ds.n + 0.5))
    if n_seed < 1 or n_seed >= ds.n:
        raise ConfigError(
            f"seed fraction {fraction} on n={ds.n} gives {n_seed} seed and "
            f"{ds.n - n_seed} stream examples; both must be non-empty",
            details={"n": ds.n, "n_seed": n_seed},
        )

    if shuffle:
        order = np.random.default_rng(rng_seed).permutation(ds.n)
    else:
        order = np.arange(ds.n)
    return (
        ds.subset(order[:n_seed], name=f"{ds.name}:seed"),
        ds.subset(order[n_seed:], name=f"{ds.name}:stream"),
    )


def _draw_factors(
    cfg: SynthConfig,
) -> tuple[np.random.Generator, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(cfg.rng_seed)
    B = rng.standard_normal((cfg.p, cfg.latent_dim))
    W = rng.standard_normal((cfg.q, cfg.latent_dim))
    return rng, B, W


def synthetic_factors(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """The mixing matrix B (p x latent) and label directions W (q x latent) for cfg."""
    _, B, W = _draw_factors(cfg)
    return B, W


def generate_synthetic(cfg: SynthConfig, name: str | None = None) -> StreamDataset:
    """Labels share latent structure: x = B z + noise, label j on iff w_j . z > threshold."""
    rng, B, W = _draw_factors(cfg)
    Z = rng.standard_normal((cfg.n, cfg.latent_dim))
    noise = rng.standard_normal((cfg.n, cfg.p))

    X = Z @ B.T + cfg.noise_std * noise
    Y = (Z @ W.T > cfg.label_threshold).astype(np.int8)
    ds = StreamDataset(
        features=X, labels=Y, name=name or f"synth_n{cfg.n}_p{cfg.p}_q{cfg.q}"
    )
    logger.info(
        "generated %s: cardinality %.3f", ds.name, float(Y.sum(axis=1).mean())
    )
    return ds


def dataset_stats(ds: StreamDataset) -> DatasetStats:
    """Shape and label statistics."""
    cardinality = float(ds.labels.sum(axis=1).mean())
    distinct = len({row.tobytes() for row in ds.labels})
    return DatasetStats(
        name=ds.name,
        n=ds.n,
        p=ds.p,
        q=ds.q,
        cardinality=cardinality,
        density=cardinality / ds.q,
        distinct_labelsets=distinct,
    )

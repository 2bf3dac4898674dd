"""
Prequential (predict, then update) evaluation.

Every stream example is first predicted from its k nearest stored
neighbors, scored, and only then revealed to the learner and appended to
the memory. Metrics are Micro-F1, Macro-F1, Example-F1 and Hamming loss.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from oml_stream.core.data_io import StreamDataset, split_seed
from oml_stream.core.knn_predictor import NeighborStore, predict
from oml_stream.core.metric_learner import ModelState, init_state, online_round
from oml_stream.exceptions import (
    ConfigError,
    DataParseError,
    NumericError,
    ShapeError,
    StoreStateError,
)
from oml_stream.models.schemas import FinalMetrics, Hyperparams, Method, RunSummary

logger = logging.getLogger(__name__)

CURVE_COLUMNS = [
    "round",
    "macro_f1",
    "micro_f1",
    "example_f1",
    "hamming_loss",
    "cumulative_loss",
]


class CurveRow(NamedTuple):
    round: int
    macro_f1: float
    micro_f1: float
    example_f1: float
    hamming_loss: float
    cumulative_loss: float


@dataclass
class MetricsReport:
    """Running confusion counts and curve rows for one stream."""

    q: int
    tp: np.ndarray = field(init=False)
    fp: np.ndarray = field(init=False)
    fn: np.ndarray = field(init=False)
    tn: np.ndarray = field(init=False)
    example_f1_sum: float = 0.0
    examples: int = 0
    hamming_errors: int = 0
    cells: int = 0
    curve: list[CurveRow] = field(default_factory=list)
    r_hat: float = 0.0

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            setattr(self, name, np.zeros(self.q, dtype=np.int64))

    def observe_instance(self, x: np.ndarray) -> None:
        """Track r_hat, the running max of ||x_t||^2."""
        self.r_hat = max(self.r_hat, float(np.dot(x, x)))

    def add_curve_row(self, round_: int, cumulative_loss: float) -> CurveRow:
        if self.curve and round_ <= self.curve[-1].round:
            raise StoreStateError(
                f"curve rounds must increase: {round_} after {self.curve[-1].round}"
            )
        row = CurveRow(
            round_,
            macro_f1(self),
            micro_f1(self),
            example_f1(self),
            hamming_loss(self),
            float(cumulative_loss),
        )
        self.curve.append(row)
        return row


@dataclass
class BoundDiagnostics:
    """V snapshots and loss series for the cumulative-loss analysis."""

    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)
    cumulative_loss: list[tuple[int, float]] = field(default_factory=list)
    r_hat: float = 0.0

    def snapshot(self, round_: int, V: np.ndarray) -> None:
        if self.snapshots and round_ <= self.snapshots[-1][0]:
            raise StoreStateError(
                f"snapshot rounds must increase: {round_} after {self.snapshots[-1][0]}"
            )
        self.snapshots.append((round_, np.array(V, copy=True)))


def update_confusion(
    report: MetricsReport, y_pred: np.ndarray, y_true: np.ndarray
) -> MetricsReport:
    """Fold one (prediction, truth) pair into the counts."""
    y_pred = np.asarray(y_pred).astype(bool)
    y_true = np.asarray(y_true).astype(bool)
    if y_pred.shape != (report.q,) or y_true.shape != (report.q,):
        raise ShapeError(
            "prediction and truth must have length q",
            expected=report.q,
            actual=[list(y_pred.shape), list(y_true.shape)],
        )
    report.tp += y_pred & y_true
    report.fp += y_pred & ~y_true
    report.fn += ~y_pred & y_true
    report.tn += ~y_pred & ~y_true

    overlap = int(np.count_nonzero(y_pred & y_true))
    sizes = int(np.count_nonzero(y_pred)) + int(np.count_nonzero(y_true))
    # both sets empty counts as a perfect example
    report.example_f1_sum += 1.0 if sizes == 0 else 2.0 * overlap / sizes
    report.examples += 1
    report.hamming_errors += int(np.count_nonzero(y_pred != y_true))
    report.cells += report.q
    return report


def micro_f1(report: MetricsReport) -> float:
    """2 sum TP / (2 sum TP + sum FP + sum FN); 0 when nothing is positive."""
    tp = int(report.tp.sum())
    denom = 2 * tp + int(report.fp.sum()) + int(report.fn.sum())
    return 0.0 if denom == 0 else 2.0 * tp / denom


def macro_f1(report: MetricsReport) -> float:
    """Mean per-label F1; a label with TP = FP = FN = 0 scores 0."""
    denom = 2 * report.tp + report.fp + report.fn
    per_label = np.divide(
        2.0 * report.tp,
        denom,
        out=np.zeros(report.q, dtype=np.float64),
        where=denom > 0,
    )
    return float(per_label.mean())


def example_f1(report: MetricsReport) -> float:
    if report.examples == 0:
        return 0.0
    return report.example_f1_sum / report.examples


def hamming_loss(report: MetricsReport) -> float:
    if report.cells == 0:
        return 0.0
    return report.hamming_errors / report.cells


def final_metrics(report: MetricsReport) -> FinalMetrics:
    return FinalMetrics(
        macro_f1=macro_f1(report),
        micro_f1=micro_f1(report),
        example_f1=example_f1(report),
        hamming_loss=hamming_loss(report),
    )


def psi_series(diag: BoundDiagnostics, U: np.ndarray) -> np.ndarray:
    """||V_i - U||_F^2 - ||V_{i+1} - U||_F^2 between consecutive snapshots."""
    if len(diag.snapshots) < 2:
        raise StoreStateError("need at least two V snapshots")
    U = np.asarray(U, dtype=np.float64)
    shape = diag.snapshots[0][1].shape
    if U.shape != shape:
        raise ShapeError("U must match V's shape", expected=list(shape), actual=list(U.shape))
    dist = np.array([float(np.sum((V - U) ** 2)) for _, V in diag.snapshots])
    return dist[:-1] - dist[1:]


def telescoping_check(diag: BoundDiagnostics, U: np.ndarray) -> float:
    """
    |sum of step terms - (||V_1 - U||^2 - ||V_{T+1} - U||^2)|.

    The identity is exact; the residual measures floating point error only.
    """
    psi = psi_series(diag, U)
    U = np.asarray(U, dtype=np.float64)
    first = float(np.sum((diag.snapshots[0][1] - U) ** 2))
    last = float(np.sum((diag.snapshots[-1][1] - U) ** 2))
    telescoped = first - last
    if telescoped > first:
        raise NumericError(
            "telescoped sum exceeds ||V_1 - U||^2",
            details={"telescoped": telescoped, "first": first},
        )
    return abs(float(psi.sum()) - telescoped)


class PrequentialRunner:
    """Runs one (dataset, method, hyperparameters) stream and keeps the final state."""

    def __init__(
        self,
        ds: StreamDataset,
        hp: Hyperparams,
        method: Method = Method.OML,
        checkpoint_every: int = 10,
        shuffle: bool = True,
    ) -> None:
        if checkpoint_every < 1:
            raise ConfigError(f"checkpoint_every must be >= 1, got {checkpoint_every}")
        self.ds = ds
        self.hp = hp
        self.method = Method(method)
        self.checkpoint_every = checkpoint_every
        self.shuffle = shuffle
        self.state: ModelState | None = None
        self.store: NeighborStore | None = None
        self.report: MetricsReport | None = None
        self.diagnostics: BoundDiagnostics | None = None
        self.n_seed = 0
        self.n_stream = 0
        self.elapsed = 0.0

    def run(self) -> tuple[MetricsReport, BoundDiagnostics]:
        started = time.perf_counter()
        hp = self.hp
        seed, stream = split_seed(self.ds, hp.seed_fraction, hp.rng_seed, self.shuffle)
        self.n_seed, self.n_stream = seed.n, stream.n

        report = MetricsReport(q=self.ds.q)
        diag = BoundDiagnostics()
        if self.method == Method.OML:
            self.state = init_state(seed, hp)
            store = self.state.store
            diag.snapshot(0, self.state.V.matrix)
        else:
            store = NeighborStore(self.ds.p, self.ds.q, max_size=hp.max_store_size)
            store.extend(seed.features, seed.labels)
        self.store = store

        total = stream.n
        cumulative = 0.0
        for t, (x, y) in enumerate(zip(stream.features, stream.labels, strict=True), 1):
            report.observe_instance(x)
            k = min(hp.k, len(store))
            if self.state is not None:
                y_pred = predict(store, self.state.V, x, k, hp.threshold)
                update_confusion(report, y_pred, y)
                online_round(self.state, x, y, hp)
                cumulative = self.state.cumulative_loss
            else:
                y_pred = predict(store, None, x, k, hp.threshold)
                update_confusion(report, y_pred, y)
                store.append(x, y)

            if t % self.checkpoint_every == 0 or t == total:
                report.add_curve_row(t, cumulative)
                diag.cumulative_loss.append((t, cumulative))
                if self.state is not None:
                    diag.snapshot(t, self.state.V.matrix)

        diag.r_hat = report.r_hat
        self.report, self.diagnostics = report, diag
        self.elapsed = time.perf_counter() - started
        logger.info(
            "%s on %s: %d rounds in %.2fs, macro-F1 %.4f",
            self.method.value,
            self.ds.name,
            total,
            self.elapsed,
            macro_f1(report),
        )
        return report, diag

    def summary(self) -> RunSummary:
        if self.report is None:
            raise StoreStateError("summary requested before run()")
        state = self.state
        return RunSummary(
            dataset=self.ds.name,
            method=self.method,
            n_seed=self.n_seed,
            n_stream=self.n_stream,
            p=self.ds.p,
            q=self.ds.q,
            d=state.V.d if state else None,
            hyperparams=self.hp,
            checkpoint_every=self.checkpoint_every,
            metrics=final_metrics(self.report),
            cumulative_loss=state.cumulative_loss if state else 0.0,
            loss_positive_rounds=state.loss_positive_rounds if state else 0,
            singular_fallbacks=state.singular_fallbacks if state else 0,
            r_hat=self.report.r_hat,
            bound_factor=(
                state.P.frobenius_sq * self.report.r_hat + self.ds.q if state else None
            ),
            elapsed_seconds=self.elapsed,
        )


def prequential_run(
    ds: StreamDataset,
    hp: Hyperparams,
    method: Method = Method.OML,
    checkpoint_every: int = 10,
    shuffle: bool = True,
) -> tuple[MetricsReport, BoundDiagnostics]:
    """Predict-then-update over the stream part of ``ds``."""
    return PrequentialRunner(ds, hp, method, checkpoint_every, shuffle).run()


def curve_frame(report: MetricsReport) -> pd.DataFrame:
    frame = pd.DataFrame(report.curve, columns=CURVE_COLUMNS)
    return frame.astype({"round": np.int64})


def write_curve_csv(report: MetricsReport, path: str | Path) -> None:
    curve_frame(report).to_csv(path, index=False, lineterminator="\n")


def read_curve_csv(path: str | Path) -> pd.DataFrame:
    """Load a curve file, checking the header and numeric content."""
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataParseError(f"{path}: not a curve CSV ({e})", details={"path": str(path)}) from e
    if list(frame.columns) != CURVE_COLUMNS:
        raise DataParseError(
            f"{path}: expected header {','.join(CURVE_COLUMNS)}",
            details={"path": str(path), "columns": list(frame.columns)},
        )
    if frame.empty or frame.isna().any().any():
        raise DataParseError(f"{path}: curve has no rows or missing values", details={"path": str(path)})
    try:
        frame = frame.astype(float).astype({"round": np.int64})
    except ValueError as e:
        raise DataParseError(f"{path}: non-numeric curve value", details={"path": str(path)}) from e
    if not frame["round"].is_monotonic_increasing or frame["round"].duplicated().any():
        raise DataParseError(f"{path}: rounds must strictly increase", details={"path": str(path)})
    return frame


def write_summary(summary: RunSummary, path: str | Path) -> None:
    Path(path).write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")

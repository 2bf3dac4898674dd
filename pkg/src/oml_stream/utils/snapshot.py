"""
Model snapshots: one ``.npz`` holding P, V, the neighbor store and a JSON header.
"""

import json
import logging
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from oml_stream.core.knn_predictor import NeighborStore
from oml_stream.core.metric_learner import MetricV, ModelState
from oml_stream.core.projection import ProjectionP
from oml_stream.exceptions import SnapshotError
from oml_stream.models.schemas import Hyperparams, Method

logger = logging.getLogger(__name__)

SNAPSHOT_FORMAT = "oml-stream-snapshot"
SNAPSHOT_VERSION = 1


@dataclass
class Snapshot:
    """A loaded snapshot; ``state`` is None for the raw-feature baseline."""

    method: Method
    hyperparams: Hyperparams
    store: NeighborStore
    state: ModelState | None
    header: dict[str, Any]


def save_snapshot(
    path: str | Path,
    hp: Hyperparams,
    state: ModelState | None = None,
    store: NeighborStore | None = None,
) -> None:
    """Write a learned-metric state, or a bare baseline store, to ``path``."""
    if state is not None:
        store = state.store
    if store is None:
        raise SnapshotError("nothing to snapshot: pass a state or a store")

    header: dict[str, Any] = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "method": (Method.OML if state is not None else Method.KNN_EUCLIDEAN).value,
        "p": store.p,
        "q": store.q,
        "d": state.V.d if state is not None else None,
        "round": state.round if state is not None else 0,
        "cumulative_loss": state.cumulative_loss if state is not None else 0.0,
        "loss_positive_rounds": state.loss_positive_rounds if state is not None else 0,
        "singular_fallbacks": state.singular_fallbacks if state is not None else 0,
        "ridge": state.P.ridge if state is not None else None,
        "evicted": store.evicted,
        "hyperparams": hp.model_dump(mode="json"),
    }
    arrays: dict[str, np.ndarray] = {
        "header": np.array(json.dumps(header, sort_keys=True)),
        "features": store.features,
        "labels": store.labels,
    }
    if state is not None:
        arrays["P"] = state.P.matrix
        arrays["V"] = state.V.matrix

    try:
        with open(path, "wb") as f:
            np.savez(f, **arrays)
    except OSError as e:
        raise SnapshotError(f"cannot write snapshot {path}: {e}") from e
    logger.info("snapshot written to %s (%d stored examples)", path, len(store))


def _read_header(data: Any, path: Path) -> dict[str, Any]:
    try:
        header = json.loads(str(data["header"][()]))
    except (KeyError, ValueError) as e:
        raise SnapshotError(f"{path}: missing or unreadable snapshot header") from e
    if header.get("format") != SNAPSHOT_FORMAT:
        raise SnapshotError(f"{path}: not an oml-stream snapshot")
    if header.get("version") != SNAPSHOT_VERSION:
        raise SnapshotError(
            f"{path}: unsupported snapshot version {header.get('version')}",
            details={"version": header.get("version")},
        )
    return dict(header)


def load_snapshot(path: str | Path) -> Snapshot:
    """Rebuild the state from a snapshot; store embeddings are recomputed from P."""
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            header = _read_header(data, path)
            arrays = {name: np.array(data[name]) for name in data.files if name != "header"}
    except (OSError, ValueError, zipfile.BadZipFile) as e:
        raise SnapshotError(f"cannot read snapshot {path}: {e}") from e

    try:
        hp = Hyperparams.model_validate(header["hyperparams"])
        method = Method(header["method"])
    except (KeyError, ValueError, ValidationError) as e:
        raise SnapshotError(f"{path}: invalid snapshot header ({e})") from e

    p, q = int(header["p"]), int(header["q"])
    projection = None
    if method == Method.OML:
        if "P" not in arrays or "V" not in arrays:
            raise SnapshotError(f"{path}: learned-metric snapshot without P or V")
        projection = ProjectionP(arrays["P"], ridge=header.get("ridge") or 0.0)

    store = NeighborStore(p, q, projection=projection, max_size=hp.max_store_size)
    store.extend(arrays["features"], arrays["labels"])
    store.evicted = int(header.get("evicted", 0))

    state = None
    if projection is not None:
        state = ModelState(
            P=projection,
            V=MetricV(arrays["V"]),
            store=store,
            round=int(header["round"]),
            cumulative_loss=float(header["cumulative_loss"]),
            loss_positive_rounds=int(header["loss_positive_rounds"]),
            singular_fallbacks=int(header["singular_fallbacks"]),
        )
    return Snapshot(method, hp, store, state, header)

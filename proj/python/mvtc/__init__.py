"""Multi-version tensor completion for delayed, under-reported count data.

Events are column mappings with keys ``location``, ``feature``, ``gd``,
``ld`` and ``count`` (a dict of arrays, a pandas DataFrame, ...). Tensors are
numpy arrays indexed ``[i, j, k, s]`` (updates) or ``[i, j, s]`` (totals),
where slab ``s`` holds generation date ``epoch + s``.

Solver, tracker and generator settings are keyword arguments with the same
names as the CLI config keys (``rank``, ``alpha``, ``rho_A``, ``rho``, ...).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np

from ._mvtc import (
    ArgumentError,
    Dataset,
    DivergenceError,
    IngestError,
    UnsupportedShapeError,
    hybrid_estimate,
    khatri_rao,
    marginalize,
    mttkrp,
    reconstruct,
    score,
    unfold,
)
from . import _mvtc

__all__ = [
    "ArgumentError",
    "Dataset",
    "DivergenceError",
    "Fit",
    "IngestError",
    "Tracker",
    "UnsupportedShapeError",
    "fit",
    "hybrid_estimate",
    "ingest",
    "khatri_rao",
    "marginalize",
    "mttkrp",
    "reconstruct",
    "score",
    "score_cells",
    "synthesize",
    "unfold",
]

_EVENT_COLUMNS = ("location", "feature", "gd", "ld", "count")


def _columns(events: Mapping[str, Any]):
    missing = [c for c in _EVENT_COLUMNS if c not in events]
    if missing:
        raise ArgumentError("events lack columns: " + ", ".join(missing))
    return tuple(np.asarray(events[c]) for c in _EVENT_COLUMNS)


def ingest(events: Mapping[str, Any], *, I: int, J: int, K: int, horizon: int, epoch: int = 0) -> Dataset:
    """Builds the update tensor and its age mask from events with ld <= horizon."""
    return _mvtc._ingest(*_columns(events), I=I, J=J, K=K, horizon=horizon, epoch=epoch)


def synthesize(horizon: Optional[int] = None, **config) -> dict:
    """Planted low-rank ground truth, its update split and the visible events.

    ``horizon`` defaults to the last GD (``S - 1``). The result holds
    ``totals``, ``updates``, ``events``, ``withheld`` (true totals of the last
    K-1 GDs), the planted update ``factors`` and the community ``adjacency``.
    """
    S = int(config.get("S", 30))
    return _mvtc._synthesize(config, S - 1 if horizon is None else horizon)


@dataclass
class Fit:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    estimate: np.ndarray  # marginalized model, every GD
    hybrid: np.ndarray  # observed totals for fully reported GDs, model elsewhere
    diagnostics: dict = field(default_factory=dict)


def fit(dataset: Dataset, adjacency: Optional[np.ndarray] = None, **config) -> Fit:
    """Static completion of one snapshot. ``adjacency`` is the I x I location graph."""
    r = _mvtc._fit(dataset, adjacency, config)
    A, B, C, D = r["factors"]
    return Fit(A, B, C, D, r["estimate"], r["hybrid"], r["diagnostics"])


class Tracker:
    """Online factor tracking from a batch fit of ``dataset``."""

    def __init__(self, dataset: Dataset, adjacency: Optional[np.ndarray] = None, **config):
        self._state = _mvtc._start_tracker(dataset, adjacency, config)

    @property
    def factors(self):
        return self._state.factors

    @property
    def dataset(self) -> Dataset:
        return self._state.dataset

    @property
    def arrivals(self) -> int:
        return self._state.arrivals

    def arrive(self, events: Mapping[str, Any], ld: int) -> dict:
        """Consumes the events loaded on ``ld`` (the next LD). The report's
        ``window`` holds marginal estimates of the last K-1 GDs."""
        return self._state.arrive(*_columns(events), ld)


def score_cells(estimate: np.ndarray, truth: Mapping[str, Any], epoch: int = 0) -> dict:
    """Scores an ``[i, j, s]`` estimate against truth cells
    (``location``, ``feature``, ``gd``, ``value``)."""
    est = np.asarray(estimate)
    s = np.asarray(truth["gd"]) - epoch
    picked = est[np.asarray(truth["location"]), np.asarray(truth["feature"]), s]
    return score(picked, np.asarray(truth["value"], dtype=float))

"""Pairwise consensus-distance bookkeeping at the coordinator.

Distances measured over live links are stored as-is. Pairs without a link
this round get a shortest-path estimate over the measured links (the
triangle inequality makes it an upper bound), smoothed with the pair's
previous value by an exponential moving average.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .graphtopo import Topology

DEFAULT_BETA1 = 0.5
DEFAULT_BETA2 = 0.1


class DisconnectedObservationsError(ValueError):
    pass


class DistanceLedger:
    def __init__(self, n: int, beta1: float = DEFAULT_BETA1):
        if not 0.0 <= beta1 <= 1.0:
            raise ValueError("beta1 must lie in [0, 1]")
        self.n = n
        self.beta1 = beta1
        self.D = np.zeros((n, n))
        self.observed = np.zeros((n, n), dtype=bool)
        self.has_history = np.zeros((n, n), dtype=bool)

    def begin_round(self) -> None:
        self.observed[:] = False

    def record_observed(self, i: int, j: int, dist: float) -> None:
        if i == j:
            raise ValueError("a worker has no distance to itself")
        if not math.isfinite(dist) or dist < 0:
            raise ValueError(f"distance must be finite and >= 0, got {dist}")
        self.D[i, j] = self.D[j, i] = dist
        self.observed[i, j] = self.observed[j, i] = True
        self.has_history[i, j] = self.has_history[j, i] = True

    def shortest_paths(self) -> np.ndarray:
        """All-pairs shortest paths over this round's observed pairs (Floyd-Warshall)."""
        sp = np.where(self.observed, self.D, np.inf)
        np.fill_diagonal(sp, 0.0)
        for k in range(self.n):
            sp = np.minimum(sp, sp[:, k:k + 1] + sp[k:k + 1, :])
        return sp

    def estimate_unobserved(self) -> np.ndarray:
        """Fill unobserved pairs from shortest paths and blend with history.

        Returns the raw shortest-path matrix before smoothing.

        Raises:
            DisconnectedObservationsError: if some pair has no observed path.
        """
        sp = self.shortest_paths()
        if not np.all(np.isfinite(sp)):
            raise DisconnectedObservationsError("observed-distance graph is not connected")
        target = ~self.observed
        np.fill_diagonal(target, False)
        blended = np.where(self.has_history, (1.0 - self.beta1) * self.D + self.beta1 * sp, sp)
        self.D = np.where(target, blended, self.D)
        self.D = (self.D + self.D.T) / 2.0
        np.fill_diagonal(self.D, 0.0)
        self.has_history |= target
        return sp

    def dump_csv(self, path_or_file) -> None:
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(["i", "j", "distance", "observed"])
            for i in range(self.n):
                for j in range(i + 1, self.n):
                    w.writerow([i, j, f"{self.D[i, j]:.9g}", int(self.observed[i, j])])
        finally:
            if own:
                fh.close()


def _unlinked(D: np.ndarray, topology: Topology) -> np.ndarray:
    mask = 1 - topology.adjacency.astype(float)
    np.fill_diagonal(mask, 0.0)
    return mask * D


def worker_bound(ledger: DistanceLedger, topology: Topology, i: int) -> float:
    """``(1/N) * sum_j (1 - a_ij) D_ij`` for worker ``i``."""
    return float(_unlinked(ledger.D, topology)[i].sum() / ledger.n)


def average_bound(ledger: DistanceLedger, topology: Topology) -> float:
    return float(_unlinked(ledger.D, topology).sum() / ledger.n ** 2)


@dataclass
class ThresholdState:
    beta2: float = DEFAULT_BETA2
    d_max: float = 0.0
    initialized: bool = False

    def __post_init__(self):
        if not 0.0 <= self.beta2 <= 1.0:
            raise ValueError("beta2 must lie in [0, 1]")


def update_threshold(ts: ThresholdState, avg_gnorm: float) -> ThresholdState:
    """EMA of the round's mean local-update norm; the first call seeds it."""
    if not math.isfinite(avg_gnorm) or avg_gnorm < 0:
        raise ValueError(f"average gradient norm must be finite and >= 0, got {avg_gnorm}")
    if not ts.initialized:
        return ThresholdState(ts.beta2, avg_gnorm, True)
    return ThresholdState(ts.beta2, (1.0 - ts.beta2) * ts.d_max + ts.beta2 * avg_gnorm, True)

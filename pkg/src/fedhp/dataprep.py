"""Synthetic Gaussian-cluster data and the class-skew non-IID partitioner."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .learncore import Batch
from .numkit import Rng

TRAIN_FRACTION = 0.8


class PartitionSizingError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian class clusters.

    Class means are drawn i.i.d. ``N(0, class_sep^2)`` per feature; samples add
    ``N(0, cluster_spread^2)`` noise per feature.
    """
    classes: int = 10
    features: int = 32
    samples_per_class: int = 200
    cluster_spread: float = 1.0
    class_sep: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError("need at least 2 classes")
        if self.features < 1 or self.samples_per_class < 2:
            raise ValueError("features >= 1 and samples_per_class >= 2 required")
        if self.cluster_spread < 0 or self.class_sep <= 0:
            raise ValueError("cluster_spread must be >= 0 and class_sep > 0")


@dataclass(frozen=True)
class PartitionSpec:
    p: float
    workers: int
    group_size: int = 3

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.workers < 1 or self.group_size < 1:
            raise ValueError("workers and group_size must be positive")


def generate(spec: SyntheticSpec) -> tuple[Batch, Batch]:
    """Draw the dataset and split it 80/20 per class into (train, test)."""
    rng = Rng(spec.seed, "data")
    C, F, m = spec.classes, spec.features, spec.samples_per_class
    means = rng.normal(0.0, spec.class_sep, size=(C, F))
    # redraw coincident means (measure-zero, but the invariant is cheap to keep)
    while len({tuple(r) for r in means}) < C:
        means = rng.normal(0.0, spec.class_sep, size=(C, F))
    n_train = int(round(TRAIN_FRACTION * m))
    n_train = min(max(n_train, 1), m - 1)
    tr_x, tr_y, te_x, te_y = [], [], [], []
    for c in range(C):
        pts = means[c] + spec.cluster_spread * rng.normal(0.0, 1.0, size=(m, F))
        order = rng.permutation(m)
        pts = pts[order]
        tr_x.append(pts[:n_train]); tr_y.append(np.full(n_train, c))
        te_x.append(pts[n_train:]); te_y.append(np.full(m - n_train, c))
    return (Batch(np.vstack(tr_x), np.concatenate(tr_y)),
            Batch(np.vstack(te_x), np.concatenate(te_y)))


def class_group(c: int, workers: int, group_size: int = 3) -> list[int]:
    """Workers that hold the concentrated share of class ``c`` (wraps modulo N)."""
    members = []
    for k in range(group_size):
        w = (group_size * c + k) % workers
        if w not in members:
            members.append(w)
    return members


def _deal(indices: np.ndarray, owners: list[int], shards: list[list[int]], rng: Rng):
    # round-robin in shuffled owner order: counts differ by at most one
    order = [owners[k] for k in rng.permutation(len(owners))]
    for pos, sample in enumerate(indices):
        shards[order[pos % len(order)]].append(int(sample))


def partition_indices(train: Batch, spec: PartitionSpec, rng: Rng) -> list[np.ndarray]:
    """Sample indices per worker.

    For each class, ``round(p * n_c)`` shuffled samples are dealt across the
    class's group and the rest across every other worker. With a single
    worker (or a group covering everyone) the whole class goes to the group.
    """
    N = spec.workers
    shards: list[list[int]] = [[] for _ in range(N)]
    for c in np.unique(train.labels):
        idx = np.flatnonzero(train.labels == c)
        idx = idx[rng.permutation(len(idx))]
        group = class_group(int(c), N, spec.group_size)
        others = [w for w in range(N) if w not in group]
        k = len(idx) if not others else int(round(spec.p * len(idx)))
        _deal(idx[:k], group, shards, rng)
        if len(idx) > k:
            _deal(idx[k:], others, shards, rng)
    empty = [w for w, s in enumerate(shards) if not s]
    if empty:
        raise PartitionSizingError(
            f"workers {empty} received no samples; increase samples_per_class or adjust p")
    return [np.array(sorted(s), dtype=int) for s in shards]


def partition(train: Batch, spec: PartitionSpec, rng: Rng) -> list[Batch]:
    return [Batch(train.features[i], train.labels[i]) for i in partition_indices(train, spec, rng)]


def class_histograms(shards: list[Batch], classes: int) -> np.ndarray:
    return np.array([np.bincount(s.labels, minlength=classes) for s in shards])


def export_shards_csv(shards: list[Batch], path) -> None:
    """One row per sample: ``f0..f{F-1}, label, worker_id``."""
    F = shards[0].features.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{k}" for k in range(F)] + ["label", "worker_id"])
        for wid, shard in enumerate(shards):
            for x, y in zip(shard.features, shard.labels):
                w.writerow([f"{v:.9g}" for v in x] + [int(y), wid])

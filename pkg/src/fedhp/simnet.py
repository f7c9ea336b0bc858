"""Virtual-clock heterogeneity: compute-time draws, bandwidth draws, round timing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphtopo import Topology
from .numkit import Rng

# preset name -> (low, high) multiplier range for per-worker mean compute time
PRESETS = {
    "none": (1.0, 1.0),
    "mild": (0.5, 2.0),
    "severe": (0.2, 5.0),
}
STD_FRACTION = 0.1
TRUNCATE_FRACTION = 0.1
BW_RANGE_BPS = (1e6, 10e6)
MODEL_OVERHEAD = 0.01


@dataclass(frozen=True)
class ComputeProfile:
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        if np.any(self.means <= 0) or np.any(self.stds < 0):
            raise ValueError("compute means must be > 0 and stds >= 0")

    @property
    def n(self) -> int:
        return len(self.means)


def make_profile(n: int, preset: str, base: float, rng: Rng) -> ComputeProfile:
    """Per-worker mean uniform in the preset's multiplier range times ``base``; std = 0.1 * mean."""
    if preset not in PRESETS:
        raise ValueError(f"unknown heterogeneity preset {preset!r}; choose from {sorted(PRESETS)}")
    lo, hi = PRESETS[preset]
    means = base * rng.child("profile").uniform(lo, hi, size=n)
    stds = STD_FRACTION * means if preset != "none" else np.zeros(n)
    return ComputeProfile(means=means, stds=stds)


def sample_mu(profile: ComputeProfile, round_: int, rng: Rng) -> np.ndarray:
    """Per-iteration compute time for each worker this round, clamped below at 0.1 * mean."""
    out = np.empty(profile.n)
    for i in range(profile.n):
        draw = rng.child("mu", round_, i).normal(profile.means[i], profile.stds[i])
        out[i] = max(draw, TRUNCATE_FRACTION * profile.means[i])
    return out


@dataclass(frozen=True)
class LinkModel:
    model_bits: float
    bw_low: float = BW_RANGE_BPS[0]
    bw_high: float = BW_RANGE_BPS[1]

    @classmethod
    def for_dim(cls, d: int, **kw) -> "LinkModel":
        return cls(model_bits=32.0 * d * (1.0 + MODEL_OVERHEAD), **kw)


def sample_bandwidth(link: LinkModel, n: int, round_: int, rng: Rng) -> np.ndarray:
    return rng.child("bw", round_).uniform(link.bw_low, link.bw_high, size=n)


def beta_matrix(link: LinkModel, topology: Topology, bandwidth: np.ndarray) -> np.ndarray:
    """Transfer time over each edge, ``model_bits / min(bw_i, bw_j)``; +inf off-edge."""
    slow = np.minimum.outer(bandwidth, bandwidth)
    return np.where(topology.adjacency == 1, link.model_bits / slow, np.inf)


def sample_beta(link: LinkModel, topology: Topology, round_: int, rng: Rng) -> np.ndarray:
    return beta_matrix(link, topology, sample_bandwidth(link, topology.n, round_, rng))


def max_neighbor_beta(beta: np.ndarray, topology: Topology) -> np.ndarray:
    """Slowest live link per worker (0 for an isolated worker)."""
    masked = np.where(topology.adjacency == 1, beta, -np.inf)
    out = masked.max(axis=1) if topology.n else np.zeros(0)
    return np.where(np.isfinite(out), out, 0.0)


@dataclass(frozen=True)
class RoundTiming:
    t_i: np.ndarray
    t_round: float
    waiting_avg: float


def round_timing(tau, mu, beta: np.ndarray, topology: Topology) -> RoundTiming:
    t_i = np.asarray(tau, dtype=float) * np.asarray(mu, dtype=float) + max_neighbor_beta(beta, topology)
    t_round = float(t_i.max())
    waiting = float(np.mean(t_round - t_i))
    return RoundTiming(t_i=t_i, t_round=t_round, waiting_avg=waiting)

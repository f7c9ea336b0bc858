"""Undirected peer topologies, Laplacians, uniform-weight mixing and spectra."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numkit import sym_eigenvalues

CONNECTIVITY_EIG_TOL = 1e-8


class Topology:
    """Symmetric 0/1 adjacency with an empty diagonal. Immutable."""

    __slots__ = ("n", "adjacency")

    def __init__(self, adjacency):
        a = np.array(adjacency, dtype=np.int8)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("self-loops are not allowed")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("adjacency entries must be 0 or 1")
        a.setflags(write=False)
        self.n = a.shape[0]
        self.adjacency = a

    @classmethod
    def from_edges(cls, n: int, edges) -> "Topology":
        a = np.zeros((n, n), dtype=np.int8)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop ({i}, {j})")
            a[i, j] = a[j, i] = 1
        return cls(a)

    @classmethod
    def ring(cls, n: int) -> "Topology":
        return cls.from_edges(n, [(i, (i + 1) % n) for i in range(n)] if n > 1 else [])

    @classmethod
    def full(cls, n: int) -> "Topology":
        return cls(np.ones((n, n), dtype=np.int8) - np.eye(n, dtype=np.int8))

    @classmethod
    def star(cls, n: int, center: int = 0) -> "Topology":
        return cls.from_edges(n, [(center, j) for j in range(n) if j != center])

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(i.tolist(), j.tolist()))

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)

    def neighbors(self, i: int) -> list[int]:
        return np.flatnonzero(self.adjacency[i]).tolist()

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i, j])

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    def without_edge(self, i: int, j: int) -> "Topology":
        a = self.adjacency.copy()
        a[i, j] = a[j, i] = 0
        return Topology(a)

    def with_edge(self, i: int, j: int) -> "Topology":
        a = self.adjacency.copy()
        a[i, j] = a[j, i] = 1
        return Topology(a)

    def __eq__(self, other):
        return isinstance(other, Topology) and np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self):
        return hash(self.adjacency.tobytes())

    def __repr__(self):
        return f"Topology(n={self.n}, edges={self.n_edges})"


def laplacian(t: Topology) -> np.ndarray:
    a = t.adjacency.astype(float)
    return np.diag(a.sum(axis=1)) - a


def is_connected(t: Topology) -> bool:
    if t.n <= 1:
        return True
    seen = np.zeros(t.n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    adj = t.adjacency
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u]):
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return bool(seen.all())


@dataclass(frozen=True)
class MixingPlan:
    u_max: int
    w: float
    W: np.ndarray


def mixing_plan(t: Topology) -> MixingPlan:
    """Uniform weight ``1/(u_max+1)`` on every link; ``W = I - w L``."""
    u_max = int(t.degrees().max()) if t.n else 0
    w = 1.0 / (u_max + 1)
    W = np.eye(t.n) - w * laplacian(t)
    return MixingPlan(u_max=u_max, w=w, W=W)


@dataclass(frozen=True)
class SpectralSummary:
    lambda2_L: float
    rho: float
    laplacian_eigs: tuple
    mixing_eigs: tuple


def spectral_summary(t: Topology) -> SpectralSummary:
    """Algebraic connectivity and the second-largest |eigenvalue| of W.

    The Perron eigenvalue 1 is dropped once; a repeated 1 means the graph is
    disconnected and rho is reported as 1.
    """
    lap = sym_eigenvalues(laplacian(t))
    mix = sym_eigenvalues(mixing_plan(t).W)
    lambda2 = lap[1] if t.n > 1 else 0.0
    if t.n == 1:
        return SpectralSummary(lambda2, 0.0, tuple(lap), tuple(mix))
    if not is_connected(t):
        return SpectralSummary(lambda2, 1.0, tuple(lap), tuple(mix))
    # mix is ascending, so the last entry is the Perron eigenvalue
    rest = mix[:-1]
    rho = max(abs(x) for x in rest)
    return SpectralSummary(lambda2, float(min(rho, 1.0)), tuple(lap), tuple(mix))


def read_edge_list(path, n: int | None = None) -> Topology:
    """Parse ``i j`` lines (0-indexed). ``#`` starts a comment; ``# n <N>`` fixes the size."""
    edges, declared = [], None
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "n":
                declared = int(parts[1])
            continue
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"bad edge-list line: {raw!r}")
        edges.append((int(parts[0]), int(parts[1])))
    size = n if n is not None else declared
    if size is None:
        size = 1 + max((max(e) for e in edges), default=0)
    if any(min(e) < 0 or max(e) >= size for e in edges):
        raise ValueError(f"edge index outside 0..{size - 1}")
    return Topology.from_edges(size, edges)


def write_edge_list(t: Topology, path) -> None:
    lines = [f"# n {t.n}"] + [f"{i} {j}" for i, j in t.edges()]
    Path(path).write_text("\n".join(lines) + "\n")

"""Random controller instances and a brute-force subgraph oracle."""
from __future__ import annotations

import itertools

import numpy as np

from fedhp.consensus import DistanceLedger, average_bound
from fedhp.control import ControlInputs, evaluate_candidate
from fedhp.graphtopo import Topology, is_connected


def random_connected(n: int, rng: np.random.Generator, extra: float = 0.5) -> Topology:
    perm = rng.permutation(n)
    edges = {tuple(sorted((int(perm[k]), int(perm[k + 1])))) for k in range(n - 1)}
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < extra:
            edges.add((i, j))
    return Topology.from_edges(n, edges)


def random_inputs(rng: np.random.Generator, n: int | None = None, base: Topology | None = None,
                  slack: float | None = None) -> ControlInputs:
    n = n or int(rng.integers(2, 9))
    base = base or random_connected(n, rng, extra=float(rng.uniform(0.2, 1.0)))
    ledger = DistanceLedger(n, beta1=1.0)
    raw = rng.uniform(0.1, 2.0, size=(n, n))
    ledger.D = np.triu(raw, 1) + np.triu(raw, 1).T
    B = np.triu(rng.uniform(0.01, 3.0, size=(n, n)), 1)
    B = B + B.T
    floor = average_bound(ledger, base)
    slack = float(rng.uniform(0.0, 1.5)) if slack is None else slack
    return ControlInputs(mu=rng.uniform(0.01, 0.5, size=n), B=B, ledger=ledger, d_max=floor + slack,
                         L_hat=float(rng.uniform(0.5, 2.0)), sigma_hat=float(rng.uniform(0.1, 2.0)),
                         eta=0.05, H_remaining=int(rng.integers(1, 200)), base_topology=base,
                         f1=float(rng.uniform(0.5, 3.0)), tau_cap=64)


def subgraphs(base: Topology):
    edges = base.edges()
    for mask in range(1 << len(edges)):
        yield Topology.from_edges(base.n, [e for k, e in enumerate(edges) if mask >> k & 1])


def exhaustive_optimum(inputs: ControlInputs) -> tuple[float, Topology] | None:
    """Smallest predicted T over every connected, bound-feasible subgraph of the base."""
    best = None
    for t in subgraphs(inputs.base_topology):
        if not is_connected(t) or average_bound(inputs.ledger, t) > inputs.d_max:
            continue
        _, _, T = evaluate_candidate(t, inputs)
        if best is None or T < best[0]:
            best = (T, t)
    return best

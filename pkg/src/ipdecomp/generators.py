"""Seeded random instances: multicommodity routing with total delay, and block QPs."""

from __future__ import annotations

import dataclasses
import logging
from typing import Literal

import networkx as nx
import numpy as np

from .errors import GenInfeasible
from .functions import Linear, Quadratic, TotalDelay
from .problem import Block, Box, SeparableProblem

logger = logging.getLogger(__name__)

MAX_GEN_ATTEMPTS = 100
# strictly positive circulation pushed around each arc's cycle in the seed routing
CIRCULATION = 0.1


@dataclasses.dataclass(frozen=True)
class GenSpec:
    family: Literal["network", "quadratic"]
    m1: int
    n1: int
    N: int
    seed: int = 0

    def __post_init__(self):
        if self.family not in ("network", "quadratic"):
            raise ValueError(f"unknown family {self.family!r}")
        if not 0 <= self.m1 < self.n1:
            raise ValueError(f"need 0 <= m1 < n1, got m1={self.m1}, n1={self.n1}")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.family == "network" and self.m1 < 1:
            raise ValueError("network family needs m1 >= 1")


def generate(spec: GenSpec) -> SeparableProblem:
    return gen_network(spec) if spec.family == "network" else gen_quadratic(spec)


def incidence_matrix(n_nodes: int, arcs) -> np.ndarray:
    """Node-arc incidence: +1 where an arc leaves a node, -1 where it enters."""
    A = np.zeros((n_nodes, len(arcs)))
    for j, (u, v) in enumerate(arcs):
        A[u, j] = 1.0
        A[v, j] = -1.0
    return A


def _random_strong_digraph(n_nodes: int, n_arcs: int, rng) -> list[tuple[int, int]]:
    """A random Hamiltonian cycle (so every arc lies on a directed cycle) plus extra distinct arcs."""
    order = rng.permutation(n_nodes)
    arcs = [(int(order[k]), int(order[(k + 1) % n_nodes])) for k in range(n_nodes)]
    present = set(arcs)
    pool = [(u, v) for u in range(n_nodes) for v in range(n_nodes) if u != v and (u, v) not in present]
    extra = n_arcs - len(arcs)
    if extra > len(pool):
        # graph is complete; allow parallel arcs for the remainder
        picks = [pool[k] for k in rng.permutation(len(pool))]
        picks += [arcs[k % len(arcs)] for k in rng.integers(0, len(arcs), extra - len(pool))]
    else:
        picks = [pool[k] for k in rng.choice(len(pool), size=extra, replace=False)]
    return arcs + picks


def seed_routing(n_nodes: int, arcs, source: int, sink: int) -> np.ndarray:
    """Strictly positive flow sending one unit source -> sink.

    One unit follows a shortest path; every arc additionally carries a small
    circulation around a shortest cycle through it.
    """
    g = nx.MultiDiGraph()
    g.add_nodes_from(range(n_nodes))
    index = {}
    for j, (u, v) in enumerate(arcs):
        g.add_edge(u, v, key=j)
        index.setdefault((u, v), j)
    flow = np.zeros(len(arcs))
    try:
        path = nx.shortest_path(g, source, sink)
        for u, v in zip(path, path[1:]):
            flow[index[(u, v)]] += 1.0
        for j, (u, v) in enumerate(arcs):
            back = nx.shortest_path(g, v, u)
            flow[j] += CIRCULATION
            for p, q in zip(back, back[1:]):
                flow[index[(p, q)]] += CIRCULATION
    except nx.NetworkXNoPath as exc:
        raise GenInfeasible("demand cannot be routed") from exc
    return flow


def gen_network(spec: GenSpec) -> SeparableProblem:
    """Multicommodity flow with total delay on the aggregate link loads.

    The graph has m1 + 1 nodes and n1 arcs; one node row of the incidence
    matrix is dropped so that each commodity has m1 independent balance
    rows. Blocks 0..N-1 are commodity flows with linear cost, block N is the
    aggregate load y with the delay objective, coupled by sum_i x_i - y = 0.
    """
    n_nodes, n_arcs, N = spec.m1 + 1, spec.n1, spec.N
    for attempt in range(MAX_GEN_ATTEMPTS):
        rng = np.random.default_rng([spec.seed, attempt])
        arcs = _random_strong_digraph(n_nodes, n_arcs, rng)
        A = incidence_matrix(n_nodes, arcs)[:-1]
        try:
            pairs = [tuple(int(v) for v in rng.choice(n_nodes, size=2, replace=False)) for _ in range(N)]
            flows = [seed_routing(n_nodes, arcs, s, d) for s, d in pairs]
        except GenInfeasible:
            logger.info("network seed %d attempt %d could not route demands", spec.seed, attempt)
            continue
        break
    else:
        raise GenInfeasible(f"no routable network after {MAX_GEN_ATTEMPTS} attempts")

    load = np.sum(flows, axis=0)
    capacity = 2.0 * load
    blocks = []
    for (s, d), flow in zip(pairs, flows):
        supply = np.zeros(n_nodes)
        supply[s], supply[d] = 1.0, -1.0
        cost = rng.uniform(0.5, 1.5, size=n_arcs)
        blocks.append(
            Block(
                objective=Linear(cost),
                box=Box(np.zeros(n_arcs), np.full(n_arcs, 2.0 * flow.max())),
                A=A.copy(),
                a=supply[:-1],
                B=np.eye(n_arcs),
            )
        )
    blocks.append(
        Block(
            objective=TotalDelay(capacity),
            box=Box(np.zeros(n_arcs), capacity),
            A=np.zeros((0, n_arcs)),
            a=np.zeros(0),
            B=-np.eye(n_arcs),
        )
    )
    return SeparableProblem(blocks, np.zeros(n_arcs))


def gen_quadratic(spec: GenSpec) -> SeparableProblem:
    """Blocks with singular PSD Hessians Q_i^T Q_i, local equalities and sum_i x_i = b."""
    rng = np.random.default_rng(spec.seed)
    m1, n1 = spec.m1, spec.n1
    blocks = []
    b = np.zeros(n1)
    for _ in range(spec.N):
        Q = rng.standard_normal((max(m1, 1), n1))
        c = rng.standard_normal(n1)
        A = rng.standard_normal((m1, n1))
        x_hat = rng.uniform(0.5, 1.5, size=n1)
        upper = np.full(n1, 2.0 * x_hat.max())
        blocks.append(
            Block(
                objective=Quadratic(Q.T @ Q, c),
                box=Box(np.zeros(n1), upper),
                A=A,
                a=A @ x_hat,
                B=np.eye(n1),
            )
        )
        b += x_hat
    return SeparableProblem(blocks, b)

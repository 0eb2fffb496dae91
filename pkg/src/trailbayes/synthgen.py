"""Synthetic network and trail corpora with known generating mechanisms.

The network grows by preferential attachment from a complete directed
clique. Three walkers then produce trails over it: one follows random links,
one prefers links into popular nodes, one ignores links altogether.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy import sparse

from .hypothesis import AdjacencyGraph

ATTACHMENT_OFFSET = 1


@dataclass(frozen=True)
class GeneratorConfig:
    n_nodes: int = 10_000
    m_out: int = 10
    clique_size: int = 11
    n_trails: int = 1_000
    trail_length: int = 5
    temperature: float = 10.0
    seed: int = 0
    teleport_self: bool = False

    def __post_init__(self):
        if self.m_out < 1:
            raise ValueError("m_out must be >= 1")
        if self.clique_size <= self.m_out:
            raise ValueError("clique_size must exceed m_out")
        if self.n_nodes < self.clique_size:
            raise ValueError("n_nodes must be >= clique_size")
        if self.trail_length < 2:
            raise ValueError("trail_length must be >= 2")
        if self.n_trails < 1:
            raise ValueError("n_trails must be >= 1")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    def to_json(self) -> str:
        meta = asdict(self)
        meta["attachment_offset"] = ATTACHMENT_OFFSET
        meta["targets_without_replacement"] = True
        return json.dumps(meta, indent=2, sort_keys=True)

    def seeds(self) -> dict[str, np.random.SeedSequence]:
        """Independent streams so each artefact depends only on the seed."""
        network, structural, popularity, teleport = np.random.SeedSequence(self.seed).spawn(4)
        return {"network": network, "structural": structural,
                "popularity": popularity, "teleportation": teleport}


@dataclass(frozen=True)
class DirectedGraph:
    """Simple directed graph over nodes 0..n-1 in CSR adjacency form."""

    n: int
    indptr: np.ndarray
    targets: np.ndarray

    @property
    def n_edges(self) -> int:
        return int(self.targets.size)

    @property
    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.targets, minlength=self.n)

    @property
    def out_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def out_neighbors(self, v: int) -> np.ndarray:
        return self.targets[self.indptr[v]:self.indptr[v + 1]]

    def edges(self):
        src = np.repeat(np.arange(self.n), self.out_degrees)
        return zip(src.tolist(), self.targets.tolist())

    def has_edge(self, u: int, v: int) -> bool:
        return bool(np.any(self.out_neighbors(u) == v))

    def to_adjacency(self) -> AdjacencyGraph:
        src = np.repeat(np.arange(self.n), self.out_degrees)
        mat = sparse.csr_matrix((np.ones(self.n_edges, dtype=np.int64), (src, self.targets)),
                                shape=(self.n, self.n))
        return AdjacencyGraph(tuple(str(i) for i in range(self.n)), mat)

    @classmethod
    def from_lists(cls, adj: list) -> "DirectedGraph":
        indptr = np.zeros(len(adj) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(a) for a in adj])
        targets = np.array([t for a in adj for t in a], dtype=np.int64)
        return cls(len(adj), indptr, targets)


def price_network(cfg: GeneratorConfig, rng=None) -> DirectedGraph:
    """Grow a directed network: clique of ``clique_size`` nodes, then each new
    node links to ``m_out`` distinct existing nodes, chosen with probability
    proportional to in-degree plus one.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seeds()["network"])
    n0, n = cfg.clique_size, cfg.n_nodes
    adj = [[j for j in range(n0) if j != i] for i in range(n0)]
    weight = np.zeros(n, dtype=np.float64)
    weight[:n0] = (n0 - 1) + ATTACHMENT_OFFSET
    for v in range(n0, n):
        w = weight[:v]
        picks = rng.choice(v, size=cfg.m_out, replace=False, p=w / w.sum())
        picks.sort()
        adj.append(picks.tolist())
        weight[picks] += 1
        weight[v] = ATTACHMENT_OFFSET
    return DirectedGraph.from_lists(adj)


def _as_corpus(paths: np.ndarray) -> list[list[str]]:
    return [[str(v) for v in row] for row in paths.tolist()]


def structural_walk(g: DirectedGraph, cfg: GeneratorConfig, rng=None, start=None) -> list[list[str]]:
    """Uniform random start, then uniformly random out-links."""
    if rng is None:
        rng = np.random.default_rng(cfg.seeds()["structural"])
    paths = np.empty((cfg.n_trails, cfg.trail_length), dtype=np.int64)
    paths[:, 0] = rng.integers(0, g.n, size=cfg.n_trails) if start is None else start
    deg = g.out_degrees
    if np.any(deg == 0):
        raise ValueError("every node needs an out-link for a structural walk")
    for t in range(1, cfg.trail_length):
        cur = paths[:, t - 1]
        offs = (rng.random(cfg.n_trails) * deg[cur]).astype(np.int64)
        paths[:, t] = g.targets[g.indptr[cur] + np.minimum(offs, deg[cur] - 1)]
    return _as_corpus(paths)


def softmax_weights(in_degrees: np.ndarray, temperature: float) -> np.ndarray:
    """exp(d / T) normalised; the max exponent is subtracted first."""
    z = np.asarray(in_degrees, dtype=np.float64) / temperature
    w = np.exp(z - z.max())
    return w / w.sum()


def popularity_walk(g: DirectedGraph, cfg: GeneratorConfig, rng=None, start=None) -> list[list[str]]:
    """Out-link chosen with probability proportional to exp(in-degree(target) / T)."""
    if rng is None:
        rng = np.random.default_rng(cfg.seeds()["popularity"])
    indeg = g.in_degrees
    if np.any(g.out_degrees == 0):
        raise ValueError("every node needs an out-link for a popularity walk")
    cdfs = {}
    paths = np.empty((cfg.n_trails, cfg.trail_length), dtype=np.int64)
    paths[:, 0] = rng.integers(0, g.n, size=cfg.n_trails) if start is None else start
    for t in range(1, cfg.trail_length):
        u = rng.random(cfg.n_trails)
        for r in range(cfg.n_trails):
            cur = int(paths[r, t - 1])
            cdf = cdfs.get(cur)
            if cdf is None:
                nbrs = g.out_neighbors(cur)
                cdf = cdfs[cur] = np.cumsum(softmax_weights(indeg[nbrs], cfg.temperature))
            nbrs = g.out_neighbors(cur)
            idx = min(int(np.searchsorted(cdf, u[r] * cdf[-1], side="right")), nbrs.size - 1)
            paths[r, t] = nbrs[idx]
    return _as_corpus(paths)


def teleportation_walk(n_nodes: int, cfg: GeneratorConfig, rng=None) -> list[list[str]]:
    """Each step jumps to a uniformly random node, by default never the current one."""
    if n_nodes < 2:
        raise ValueError("teleportation needs at least 2 nodes")
    if rng is None:
        rng = np.random.default_rng(cfg.seeds()["teleportation"])
    paths = np.empty((cfg.n_trails, cfg.trail_length), dtype=np.int64)
    paths[:, 0] = rng.integers(0, n_nodes, size=cfg.n_trails)
    for t in range(1, cfg.trail_length):
        if cfg.teleport_self:
            paths[:, t] = rng.integers(0, n_nodes, size=cfg.n_trails)
        else:
            # draw from the n-1 other nodes, skipping over the current one
            step = rng.integers(0, n_nodes - 1, size=cfg.n_trails)
            paths[:, t] = step + (step >= paths[:, t - 1])
    return _as_corpus(paths)


def write_graph(path, g: DirectedGraph) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# nodes={g.n}\n")
        for u, v in g.edges():
            fh.write(f"{u}\t{v}\n")


def read_directed_graph(path) -> DirectedGraph:
    """Inverse of :func:`write_graph`; node names must be integers 0..n-1."""
    n = None
    src, dst = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# nodes="):
                n = int(line[8:])
            elif line.strip() and not line.startswith("#"):
                a, b = line.split("\t")
                src.append(int(a))
                dst.append(int(b))
    if n is None:
        n = max(max(src, default=-1), max(dst, default=-1)) + 1
    adj = [[] for _ in range(n)]
    for a, b in zip(src, dst):
        adj[a].append(b)
    return DirectedGraph.from_lists(adj)

"""Hypothesis matrices: sparse nonnegative belief weights over transitions.

Only the ordering of weights carries meaning; elicitation rescales them.
Builders work over the states that occur in trails (never the reset state).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse

from .errors import DegenerateHypothesisError, DimensionError, ParseError

log = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0088

_BLOCK = 1024


@dataclass(frozen=True)
class HypothesisMatrix:
    matrix: sparse.csr_matrix
    diagonal_policy: str = "as-given"

    def __post_init__(self):
        mat = sparse.csr_matrix(self.matrix, dtype=np.float64)
        mat.sum_duplicates()
        if mat.shape[0] != mat.shape[1]:
            raise DimensionError(f"hypothesis matrix must be square, got {mat.shape}")
        if mat.nnz:
            if not np.all(np.isfinite(mat.data)):
                raise ValueError("hypothesis weights must be finite")
            if mat.data.min() < 0:
                raise ValueError("hypothesis weights must be nonnegative")
        mat.eliminate_zeros()
        mat.sort_indices()
        object.__setattr__(self, "matrix", mat)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def entries(self) -> dict[tuple[int, int], float]:
        coo = self.matrix.tocoo()
        return {(int(i), int(j)): float(v) for i, j, v in zip(coo.row, coo.col, coo.data)}

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def scaled(self, c: float) -> "HypothesisMatrix":
        return HypothesisMatrix(self.matrix * c, self.diagonal_policy)

    @classmethod
    def from_dense(cls, arr, diagonal_policy: str = "as-given") -> "HypothesisMatrix":
        return cls(sparse.csr_matrix(np.asarray(arr, dtype=np.float64)), diagonal_policy)


def _from_triplets(m, rows, cols, vals, diagonal_policy) -> HypothesisMatrix:
    mat = sparse.csr_matrix((np.asarray(vals, dtype=np.float64), (np.asarray(rows, dtype=np.int64),
                             np.asarray(cols, dtype=np.int64))), shape=(m, m))
    return HypothesisMatrix(mat, diagonal_policy)


def _with_diagonal(mat: sparse.spmatrix, diagonal: float) -> sparse.csr_matrix:
    mat = sparse.lil_matrix(mat)
    if diagonal > 0:
        mat.setdiag(diagonal)
    else:
        mat.setdiag(0.0)
    return sparse.csr_matrix(mat)


def _diag_policy(diagonal: float) -> str:
    return f"constant:{diagonal!r}" if diagonal > 0 else "absent"


# -- universal hypotheses -----------------------------------------------------

def uniform_hypothesis(m: int) -> HypothesisMatrix:
    if m < 1:
        raise ValueError("m must be >= 1")
    return HypothesisMatrix(sparse.csr_matrix(np.ones((m, m))), "constant:1.0")


def self_loop_hypothesis(m: int) -> HypothesisMatrix:
    if m < 1:
        raise ValueError("m must be >= 1")
    return HypothesisMatrix(sparse.identity(m, format="csr"), "constant:1.0")


# -- link structure -----------------------------------------------------------

@dataclass(frozen=True)
class AdjacencyGraph:
    """Directed multigraph; ``multiplicity[i, j]`` counts parallel edges i -> j."""

    nodes: tuple[str, ...]
    multiplicity: sparse.csr_matrix

    def __post_init__(self):
        mat = sparse.csr_matrix(self.multiplicity, dtype=np.int64)
        mat.sum_duplicates()
        mat.eliminate_zeros()
        n = len(self.nodes)
        if mat.shape != (n, n):
            raise DimensionError(f"adjacency shape {mat.shape} does not match {n} nodes")
        object.__setattr__(self, "multiplicity", mat)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def in_degrees(self) -> np.ndarray:
        return np.asarray(self.multiplicity.sum(axis=0)).ravel()

    @property
    def out_degrees(self) -> np.ndarray:
        return np.asarray(self.multiplicity.sum(axis=1)).ravel()

    @classmethod
    def from_edges(cls, edges: Sequence[tuple[str, str]], nodes: Sequence[str] | None = None) -> "AdjacencyGraph":
        if nodes is None:
            nodes = sorted({v for e in edges for v in e})
        nodes = tuple(nodes)
        index = {v: i for i, v in enumerate(nodes)}
        try:
            rows = [index[a] for a, _ in edges]
            cols = [index[b] for _, b in edges]
        except KeyError as exc:
            raise DimensionError(f"edge endpoint {exc.args[0]!r} is not a node") from None
        mat = sparse.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(len(nodes), len(nodes)))
        return cls(nodes, mat)


def _graph_to_states(g: AdjacencyGraph, states: Sequence[str] | None):
    """Map graph node indices onto positions in ``states``; -1 for nodes outside it."""
    if states is None:
        return tuple(g.nodes), np.arange(g.n)
    states = tuple(states)
    pos = {s: i for i, s in enumerate(states)}
    return states, np.array([pos.get(v, -1) for v in g.nodes], dtype=np.int64)


def structural_hypothesis(g: AdjacencyGraph, states: Sequence[str] | None = None,
                          diagonal: float = 0.0) -> HypothesisMatrix:
    """Weight i -> j by the number of links from i to j.

    ``states`` fixes the row/column order (defaults to the graph's nodes); links
    touching nodes outside ``states`` are dropped.
    """
    states, where = _graph_to_states(g, states)
    coo = g.multiplicity.tocoo()
    r, c = where[coo.row], where[coo.col]
    keep = (r >= 0) & (c >= 0)
    m = len(states)
    mat = sparse.csr_matrix((coo.data[keep].astype(np.float64), (r[keep], c[keep])), shape=(m, m))
    return HypothesisMatrix(_with_diagonal(mat, diagonal), _diag_policy(diagonal))


def popularity_hypothesis(g: AdjacencyGraph, states: Sequence[str] | None = None) -> HypothesisMatrix:
    """Weight each existing link i -> j by the in-degree of j in the full graph."""
    if g.n == 0 or g.multiplicity.nnz == 0:
        raise DegenerateHypothesisError("popularity hypothesis needs a graph with edges")
    states, where = _graph_to_states(g, states)
    indeg = g.in_degrees
    coo = g.multiplicity.tocoo()
    r, c = where[coo.row], where[coo.col]
    keep = (r >= 0) & (c >= 0)
    vals = indeg[coo.col[keep]].astype(np.float64)
    m = len(states)
    return _from_triplets(m, r[keep], c[keep], vals, "as-linked")


# -- feature similarity -------------------------------------------------------

@dataclass(frozen=True)
class FeatureTable:
    """Per-state features: a real matrix (one row per state) or a list of tag sets."""

    states: tuple[str, ...]
    vectors: np.ndarray | None = None
    tags: tuple[frozenset, ...] | None = None

    def __post_init__(self):
        if (self.vectors is None) == (self.tags is None):
            raise ValueError("give exactly one of vectors or tags")
        n = len(self.states)
        if len(set(self.states)) != n:
            raise ValueError("duplicate state in feature table")
        if self.vectors is not None:
            vec = np.asarray(self.vectors, dtype=np.float64)
            if vec.ndim != 2 or vec.shape[0] != n:
                raise DimensionError(f"expected {n} feature rows, got shape {vec.shape}")
            if not np.all(np.isfinite(vec)):
                raise ValueError("features must be finite")
            object.__setattr__(self, "vectors", vec)
        elif len(self.tags) != n:
            raise DimensionError(f"expected {n} tag sets, got {len(self.tags)}")

    @property
    def binary(self) -> bool:
        return self.tags is not None


def _align(table_states: Sequence[str], states: Sequence[str] | None):
    """(state order, rows of the table to use, their positions in the state order)."""
    if states is None:
        states = tuple(table_states)
    states = tuple(states)
    pos = {s: i for i, s in enumerate(states)}
    rows, where = [], []
    for r, s in enumerate(table_states):
        if s in pos:
            rows.append(r)
            where.append(pos[s])
    return states, np.array(rows, dtype=np.int64), np.array(where, dtype=np.int64)


def cosine_similarity_hypothesis(f: FeatureTable, states: Sequence[str] | None = None,
                                 threshold: float = 0.1, diagonal: float = 0.0) -> HypothesisMatrix:
    """Keep pairwise cosine similarities that reach ``threshold``.

    Zero-norm feature rows get similarity 0 to everything and are logged.
    Computed in row blocks so memory stays O(block * n).
    """
    if f.binary:
        raise ValueError("cosine similarity needs real-valued features")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    states, rows, where = _align(f.states, states)
    x = f.vectors[rows]
    norms = np.linalg.norm(x, axis=1)
    zero = norms == 0
    for r in np.flatnonzero(zero):
        log.warning("state %r has a zero feature vector; its similarities are 0", states[where[r]])
    x = np.divide(x, norms[:, None], out=np.zeros_like(x), where=~zero[:, None])
    m = len(states)
    out_r, out_c, out_v = [], [], []
    for lo in range(0, len(x), _BLOCK):
        sim = x[lo:lo + _BLOCK] @ x.T
        np.clip(sim, -1.0, 1.0, out=sim)
        bi, bj = np.nonzero(sim >= threshold)
        vals = sim[bi, bj]
        keep = (vals > 0) & (bi + lo != bj)
        out_r.append(where[bi[keep] + lo])
        out_c.append(where[bj[keep]])
        out_v.append(vals[keep])
    mat = _from_triplets(m, _cat(out_r), _cat(out_c), _cat(out_v, float), "absent").matrix
    return HypothesisMatrix(_with_diagonal(mat, diagonal), _diag_policy(diagonal))


def jaccard_similarity_hypothesis(f: FeatureTable, states: Sequence[str] | None = None) -> HypothesisMatrix:
    """|A & B| / |A | B| between tag sets; the diagonal stays empty."""
    if not f.binary:
        raise ValueError("Jaccard similarity needs tag-set features")
    states, rows, where = _align(f.states, states)
    vocab = sorted({t for r in rows for t in f.tags[r]})
    tix = {t: i for i, t in enumerate(vocab)}
    ir, ic = [], []
    for k, r in enumerate(rows):
        for t in f.tags[r]:
            ir.append(k)
            ic.append(tix[t])
    inc = sparse.csr_matrix((np.ones(len(ir)), (ir, ic)), shape=(len(rows), len(vocab)))
    sizes = np.asarray(inc.sum(axis=1)).ravel()
    inter = (inc @ inc.T).tocoo()
    off = inter.row != inter.col
    i, j, n_and = inter.row[off], inter.col[off], inter.data[off]
    union = sizes[i] + sizes[j] - n_and
    return _from_triplets(len(states), where[i], where[j], n_and / union, "absent")


# -- geographic and scalar proximity ------------------------------------------

def haversine_km(lat1, lon1, lat2, lon2):
    """Great-circle distance in km between points given in degrees (broadcasts)."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(lon2) - np.radians(lon1)
    a = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def _proximity(states, where, dist_block, n, label):
    """Shared body of the distance-normalised builders: q = 1 - d / max d."""
    dmax = 0.0
    for lo in range(0, n, _BLOCK):
        dmax = max(dmax, float(dist_block(lo).max(initial=0.0)))
    if dmax <= 0.0:
        raise DegenerateHypothesisError(f"{label}: all pairwise distances are zero")
    out_r, out_c, out_v = [], [], []
    for lo in range(0, n, _BLOCK):
        q = 1.0 - dist_block(lo) / dmax
        bi, bj = np.nonzero(q > 0)
        keep = bi + lo != bj
        bi, bj = bi[keep], bj[keep]
        out_r.append(where[bi + lo])
        out_c.append(where[bj])
        out_v.append(q[bi, bj])
    return _from_triplets(len(states), _cat(out_r), _cat(out_c), _cat(out_v, float), "absent")


def geographic_hypothesis(coords: Mapping[str, tuple[float, float]],
                          states: Sequence[str] | None = None) -> HypothesisMatrix:
    """Closer pairs get larger weight; the farthest pair ends up at 0 (absent)."""
    table_states = tuple(coords)
    states, rows, where = _align(table_states, states)
    if len(rows) < 2:
        raise DegenerateHypothesisError("geographic hypothesis needs at least 2 located states")
    ll = np.array([coords[table_states[r]] for r in rows], dtype=np.float64)
    lat, lon = ll[:, 0], ll[:, 1]
    if np.any(np.abs(lat) > 90) or np.any(np.abs(lon) > 180):
        raise ValueError("latitude must be in [-90, 90] and longitude in [-180, 180]")

    def block(lo):
        hi = lo + _BLOCK
        return haversine_km(lat[lo:hi, None], lon[lo:hi, None], lat[None, :], lon[None, :])

    return _proximity(states, where, block, len(rows), "geographic hypothesis")


def scalar_proximity_hypothesis(values: Mapping[str, float],
                                states: Sequence[str] | None = None) -> HypothesisMatrix:
    """Pairs with closer values (e.g. release years) get larger weight.

    States missing from ``values`` take no part.
    """
    table_states = tuple(values)
    states, rows, where = _align(table_states, states)
    if len(rows) < 2:
        raise DegenerateHypothesisError("scalar proximity needs at least 2 states with values")
    v = np.array([values[table_states[r]] for r in rows], dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("scalar values must be finite")

    def block(lo):
        return np.abs(v[lo:lo + _BLOCK, None] - v[None, :])

    return _proximity(states, where, block, len(rows), "scalar proximity hypothesis")


def _cat(parts, dtype=np.int64):
    return np.concatenate(parts) if parts else np.empty(0, dtype=dtype)


# -- file formats -------------------------------------------------------------

def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line


def read_feature_table(path, kind: str | None = None) -> FeatureTable:
    """``state<TAB>f1,f2,...`` (real) or ``state<TAB>tag1;tag2;...`` (binary).

    ``kind`` is "real" or "binary"; when omitted it is real if every row parses
    as comma-separated floats.
    """
    rows = []
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError("expected 'state<TAB>features'", path=path, line=lineno)
        rows.append((lineno, parts[0], parts[1]))
    if not rows:
        raise ParseError("empty feature table", path=path)

    def as_floats(text):
        return [float(x) for x in text.split(",")]

    if kind is None:
        try:
            for _, _, text in rows:
                as_floats(text)
            kind = "real"
        except ValueError:
            kind = "binary"
    states = tuple(s for _, s, _ in rows)
    if kind == "real":
        vecs = []
        for lineno, _, text in rows:
            try:
                vecs.append(as_floats(text))
            except ValueError:
                raise ParseError("non-numeric feature", path=path, line=lineno) from None
            if len(vecs[-1]) != len(vecs[0]):
                raise ParseError("feature dimension differs from first row", path=path, line=lineno)
        return FeatureTable(states, vectors=np.array(vecs))
    if kind == "binary":
        tags = tuple(frozenset(t for t in text.split(";") if t) for _, _, text in rows)
        return FeatureTable(states, tags=tags)
    raise ValueError(f"unknown feature kind {kind!r}")


def read_geo_table(path) -> dict[str, tuple[float, float]]:
    out = {}
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        try:
            state, lat, lon = parts[0], float(parts[1]), float(parts[2])
        except (IndexError, ValueError):
            raise ParseError("expected 'state<TAB>lat<TAB>lon'", path=path, line=lineno) from None
        if len(parts) != 3 or not (-90 <= lat <= 90 and -180 <= lon <= 180):
            raise ParseError("bad row or coordinate out of range", path=path, line=lineno)
        out[state] = (lat, lon)
    return out


def read_scalar_table(path) -> dict[str, float]:
    out = {}
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        try:
            state, value = parts[0], float(parts[1])
        except (IndexError, ValueError):
            raise ParseError("expected 'state<TAB>value'", path=path, line=lineno) from None
        if len(parts) != 2 or not math.isfinite(value):
            raise ParseError("bad row", path=path, line=lineno)
        out[state] = value
    return out


def read_graph(path) -> AdjacencyGraph:
    """TSV edge list ``src<TAB>dst``; a repeated line is a parallel edge.

    A ``# nodes=<n>`` comment declares integer-named nodes 0..n-1 so isolated
    nodes survive a round trip.
    """
    edges = []
    declared = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if line.startswith("# nodes="):
                declared = int(line[len("# nodes="):])
                continue
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not all(parts):
                raise ParseError("expected 'src<TAB>dst'", path=path, line=lineno)
            edges.append((parts[0], parts[1]))
    nodes = None
    if declared is not None:
        nodes = [str(i) for i in range(declared)]
        extra = sorted({v for e in edges for v in e} - set(nodes))
        if extra:
            raise ParseError(f"edge endpoint {extra[0]!r} outside declared nodes", path=path)
    return AdjacencyGraph.from_edges(edges, nodes)


def read_hypothesis_file(path, space) -> HypothesisMatrix:
    """``state_i<TAB>state_j<TAB>weight`` with an ``m=<int>`` header.

    ``m`` must match either the full state space or, for a space with a reset
    state, the non-reset states (the matrix is then laid out over those and
    embedded later).
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("m="):
        raise ParseError("missing 'm=<int>' header", path=path, line=1)
    try:
        m = int(lines[0][2:])
    except ValueError:
        raise ParseError("bad 'm=' header", path=path, line=1) from None
    base = space.base_states
    if m == space.m:
        order = space.states
    elif m == len(base):
        order = base
    else:
        raise DimensionError(f"{path}: hypothesis has m={m}, state space has m={space.m}")
    pos = {s: i for i, s in enumerate(order)}
    rows, cols, vals = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError("expected 'state_i<TAB>state_j<TAB>weight'", path=path, line=lineno)
        try:
            w = float(parts[2])
        except ValueError:
            raise ParseError("non-numeric weight", path=path, line=lineno) from None
        if not (w > 0 and math.isfinite(w)):
            raise ParseError("weights must be positive and finite", path=path, line=lineno)
        try:
            rows.append(pos[parts[0]])
            cols.append(pos[parts[1]])
        except KeyError as exc:
            raise DimensionError(f"{path}:{lineno}: unknown state {exc.args[0]!r}") from None
        vals.append(w)
    return _from_triplets(m, rows, cols, vals, "as-given")


def write_hypothesis_file(path, h: HypothesisMatrix, states: Sequence[str]) -> None:
    if len(states) != h.m:
        raise DimensionError("state list does not match hypothesis size")
    coo = h.matrix.tocoo()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"m={h.m}\n")
        for i, j, w in zip(coo.row, coo.col, coo.data):
            fh.write(f"{states[i]}\t{states[j]}\t{float(w)!r}\n")

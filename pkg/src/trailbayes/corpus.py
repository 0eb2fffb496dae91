"""Trail data, the state space it spans, and first-order transition counts.

A trail is a sequence of at least two state tokens. The state space is the
sorted set of distinct tokens, optionally extended by one synthetic reset
state that is prepended to every trail when counting.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .errors import DimensionError, ParseError

RESET_TOKEN = "<reset>"


@dataclass(frozen=True)
class StateSpace:
    states: tuple[str, ...]
    reset_index: int | None = None
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {s: i for i, s in enumerate(self.states)}
        if len(index) != len(self.states):
            raise ValueError("state identifiers must be unique")
        if self.reset_index is not None and not 0 <= self.reset_index < len(self.states):
            raise ValueError("reset_index out of range")
        object.__setattr__(self, "index", index)

    @property
    def m(self) -> int:
        return len(self.states)

    @property
    def has_reset(self) -> bool:
        return self.reset_index is not None

    @property
    def base_states(self) -> tuple[str, ...]:
        """States that occur in the raw trails, i.e. everything but the reset state."""
        if self.reset_index is None:
            return self.states
        return self.states[: self.reset_index] + self.states[self.reset_index + 1:]

    def lookup(self, token: str) -> int:
        try:
            return self.index[token]
        except KeyError:
            raise DimensionError(f"unknown state {token!r}") from None


def _validate_raw(raw_trails: Sequence[Sequence[str]]) -> None:
    if len(raw_trails) == 0:
        raise ParseError("empty trail corpus")
    for n, trail in enumerate(raw_trails, start=1):
        if len(trail) < 2:
            raise ParseError(f"trail has {len(trail)} state(s), need at least 2", line=n)


def build_state_space(raw_trails: Sequence[Sequence[str]], reset: bool = False) -> StateSpace:
    """Sorted distinct tokens of ``raw_trails``; with ``reset`` a reset state is appended last."""
    _validate_raw(raw_trails)
    tokens = sorted({tok for trail in raw_trails for tok in trail})
    if not reset:
        return StateSpace(tuple(tokens))
    if RESET_TOKEN in tokens:
        raise ParseError(f"reserved token {RESET_TOKEN!r} occurs in trails")
    return StateSpace(tuple(tokens) + (RESET_TOKEN,), reset_index=len(tokens))


@dataclass(frozen=True)
class TrailCorpus:
    space: StateSpace
    trails: tuple[np.ndarray, ...]

    def __len__(self):
        return len(self.trails)

    def tokens(self) -> list[list[str]]:
        states = self.space.states
        return [[states[i] for i in t] for t in self.trails]


def build_corpus(raw_trails: Sequence[Sequence[str]], reset: bool = False,
                 space: StateSpace | None = None) -> TrailCorpus:
    """Index ``raw_trails`` against ``space`` (built from the trails when omitted)."""
    if space is None:
        space = build_state_space(raw_trails, reset=reset)
    else:
        _validate_raw(raw_trails)
    trails = tuple(
        np.fromiter((space.lookup(tok) for tok in trail), dtype=np.int64, count=len(trail))
        for trail in raw_trails
    )
    return TrailCorpus(space, trails)


@dataclass(frozen=True)
class TransitionCounts:
    """Sparse m x m matrix of transition counts; zero cells are not stored."""

    matrix: sparse.csr_matrix

    def __post_init__(self):
        mat = sparse.csr_matrix(self.matrix, dtype=np.int64)
        mat.sum_duplicates()
        mat.eliminate_zeros()
        mat.sort_indices()
        if mat.shape[0] != mat.shape[1]:
            raise DimensionError(f"counts must be square, got {mat.shape}")
        if mat.nnz and mat.data.min() < 0:
            raise ValueError("transition counts must be nonnegative")
        object.__setattr__(self, "matrix", mat)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    @property
    def total(self) -> int:
        return int(self.matrix.data.sum())

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def entries(self) -> dict[tuple[int, int], int]:
        coo = self.matrix.tocoo()
        return {(int(i), int(j)): int(v) for i, j, v in zip(coo.row, coo.col, coo.data)}

    def triplets(self) -> np.ndarray:
        """(nnz, 3) int64 array of (i, j, count), row-major order."""
        coo = self.matrix.tocoo()
        return np.column_stack([coo.row, coo.col, coo.data]).astype(np.int64)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def permuted(self, perm: Sequence[int]) -> "TransitionCounts":
        """Relabel state ``i`` as ``perm[i]``."""
        perm = np.asarray(perm)
        coo = self.matrix.tocoo()
        return TransitionCounts(sparse.csr_matrix((coo.data, (perm[coo.row], perm[coo.col])), shape=coo.shape))

    def fingerprint(self) -> str:
        """64-bit hex digest over m and the sorted count triplets."""
        h = hashlib.blake2b(digest_size=8)
        h.update(np.int64(self.m).tobytes())
        h.update(np.ascontiguousarray(self.triplets()).tobytes())
        return h.hexdigest()

    @classmethod
    def from_dense(cls, arr) -> "TransitionCounts":
        return cls(sparse.csr_matrix(np.asarray(arr, dtype=np.int64)))


def count_transitions(corpus: TrailCorpus, reset: bool | None = None) -> TransitionCounts:
    """Count adjacent pairs over all trails.

    With ``reset`` (default: whenever the space has a reset state) each trail
    contributes one extra reset -> first-state transition.
    """
    space = corpus.space
    m = space.m
    if reset is None:
        reset = space.has_reset
    if reset and not space.has_reset:
        raise DimensionError("reset counting requested but the state space has no reset state")
    if not corpus.trails:
        return TransitionCounts(sparse.csr_matrix((m, m), dtype=np.int64))
    src = [t[:-1] for t in corpus.trails]
    dst = [t[1:] for t in corpus.trails]
    if reset:
        firsts = np.fromiter((t[0] for t in corpus.trails), dtype=np.int64, count=len(corpus.trails))
        src.append(np.full(len(firsts), space.reset_index, dtype=np.int64))
        dst.append(firsts)
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= m):
        raise DimensionError(f"state index out of range for m={m}")
    data = np.ones(src.size, dtype=np.int64)
    return TransitionCounts(sparse.csr_matrix((data, (src, dst)), shape=(m, m)))


def merge_counts(parts: Iterable[TransitionCounts]) -> TransitionCounts:
    """Sum partial counts computed over disjoint chunks of a corpus."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to merge")
    m = parts[0].m
    if any(p.m != m for p in parts):
        raise DimensionError("cannot merge counts over different state spaces")
    total = parts[0].matrix.copy()
    for p in parts[1:]:
        total = total + p.matrix
    return TransitionCounts(total)


# -- file formats -------------------------------------------------------------

def parse_trails(lines: Iterable[str], path=None) -> list[list[str]]:
    """One trail per line, tab-separated tokens; '#' lines and blank lines skipped."""
    trails = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        tokens = line.split("\t")
        if any(tok == "" for tok in tokens):
            raise ParseError("empty state token", path=path, line=lineno)
        if len(tokens) < 2:
            raise ParseError(f"trail has {len(tokens)} state(s), need at least 2", path=path, line=lineno)
        trails.append(tokens)
    if not trails:
        raise ParseError("no trails found", path=path)
    return trails


def read_trails(path) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        return parse_trails(fh, path=path)


def write_trails(path, trails: Iterable[Sequence[str]], header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            for hline in header.splitlines():
                fh.write(f"# {hline}\n")
        for trail in trails:
            fh.write("\t".join(trail) + "\n")


def write_counts(path, counts: TransitionCounts) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"m={counts.m}\n")
        for i, j, c in counts.triplets():
            fh.write(f"{i}\t{j}\t{c}\n")


def read_counts(path) -> TransitionCounts:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("m="):
        raise ParseError("missing 'm=<int>' header", path=path, line=1)
    try:
        m = int(lines[0][2:])
    except ValueError:
        raise ParseError("bad 'm=' header", path=path, line=1) from None
    rows, cols, vals = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        try:
            i, j, c = (int(p) for p in parts)
        except ValueError:
            raise ParseError("expected 'i<TAB>j<TAB>count'", path=path, line=lineno) from None
        if not (0 <= i < m and 0 <= j < m) or c < 1:
            raise ParseError("index out of range or nonpositive count", path=path, line=lineno)
        rows.append(i)
        cols.append(j)
        vals.append(c)
    return TransitionCounts(sparse.csr_matrix((np.array(vals, dtype=np.int64), (rows, cols)), shape=(m, m)))

"""Dirichlet priors elicited from hypothesis matrices by distributing chips.

Every cell starts with one chip (the flat prior). ``k * m**2`` further chips
are spread proportionally to the hypothesis weights: first the integer part
of each cell's share, then one chip at a time to the largest fractional
parts, with ties ordered by a seeded random permutation.
"""
from __future__ import annotations

import math
import operator
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .corpus import StateSpace, TransitionCounts
from .errors import DegenerateHypothesisError, DimensionError, ParseError
from .hypothesis import HypothesisMatrix

RESET_POLICIES = ("uniform-row", "zero-row")

# Significant digits kept when ranking scaled shares; absorbs last-bit noise
# so that Q and c*Q elicit identical priors.
_SHARE_DIGITS = 10


@dataclass(frozen=True)
class Prior:
    """Dirichlet hyperparameters ``alpha = flat_offset + extra``, one row per state."""

    m: int
    flat_offset: int = 1
    extra: sparse.csr_matrix | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.flat_offset < 1:
            raise ValueError("flat_offset must be >= 1")
        extra = self.extra
        if extra is None:
            extra = sparse.csr_matrix((self.m, self.m), dtype=np.int64)
        extra = sparse.csr_matrix(extra, dtype=np.int64)
        extra.sum_duplicates()
        extra.eliminate_zeros()
        extra.sort_indices()
        if extra.shape != (self.m, self.m):
            raise DimensionError(f"extra chips shape {extra.shape} does not match m={self.m}")
        if extra.nnz and extra.data.min() < 0:
            raise ValueError("chip counts must be nonnegative")
        object.__setattr__(self, "extra", extra)

    @property
    def informative_chips(self) -> int:
        """Chips above the one-per-cell flat prior: sum of (alpha - 1)."""
        return (self.flat_offset - 1) * self.m * self.m + int(self.extra.data.sum())

    @property
    def row_alpha_sums(self) -> np.ndarray:
        return self.m * self.flat_offset + np.asarray(self.extra.sum(axis=1)).ravel()

    def alpha(self, i: int, j: int) -> int:
        return self.flat_offset + int(self.extra[i, j])

    def toarray(self) -> np.ndarray:
        return self.extra.toarray() + self.flat_offset

    def __eq__(self, other):
        if not isinstance(other, Prior):
            return NotImplemented
        return (self.m == other.m and self.flat_offset == other.flat_offset
                and (self.extra != other.extra).nnz == 0)

    __hash__ = None


def flat_prior(m: int) -> Prior:
    return Prior(m)


def _check_k(k) -> int:
    if isinstance(k, bool):
        raise ValueError("k must be a nonnegative integer")
    try:
        ik = operator.index(k)
    except TypeError:
        if isinstance(k, float) and k.is_integer():
            ik = int(k)
        else:
            raise ValueError(f"k must be a nonnegative integer, got {k!r}") from None
    if ik < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    return ik


def _check_seed(seed) -> int:
    seed = operator.index(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return seed


def _round_shares(shares: np.ndarray) -> np.ndarray:
    top = float(shares.max(initial=0.0))
    digits = max(0, _SHARE_DIGITS - (math.floor(math.log10(top)) + 1 if top >= 1 else 0))
    return np.round(shares, digits)


def scale_hypothesis(q: HypothesisMatrix, k: int) -> sparse.csr_matrix:
    """Weights rescaled to sum to ``k * m**2`` (the informative chip budget)."""
    k = _check_k(k)
    if q.nnz == 0:
        raise DegenerateHypothesisError("hypothesis has no positive entries")
    budget = k * q.m * q.m
    total = math.fsum(q.matrix.data)
    scaled = q.matrix.copy()
    scaled.data = _round_shares(q.matrix.data * (budget / total))
    return scaled


def trial_roulette(q: HypothesisMatrix, k: int, seed: int = 0) -> Prior:
    """Elicit a Dirichlet prior from ``q`` with ``k * m**2`` informative chips.

    Only cells with a stored weight compete for the leftover chips. When more
    chips are left than there are such cells, each cell first gets an equal
    share and the ranking hands out what remains.
    """
    k = _check_k(k)
    seed = _check_seed(seed)
    m = q.m
    meta = {"k": k, "seed": seed, "flat_offset": 1}
    if k == 0:
        return Prior(m, 1, None, {**meta, "floor_chips": 0, "remainder_chips": 0})
    budget = k * m * m
    scaled = scale_hypothesis(q, k)
    shares = scaled.data
    floors = np.floor(shares).astype(np.int64)
    frac = _round_shares(shares - floors)
    left = budget - int(floors.sum())
    if left < 0:
        raise ArithmeticError("floor pass exceeded the chip budget")
    n = shares.size
    rng = np.random.default_rng(seed)
    tiebreak = rng.permutation(n)
    order = np.lexsort((tiebreak, -frac))
    every, rest = divmod(left, n)
    chips = floors + every
    chips[order[:rest]] += 1
    extra = sparse.csr_matrix((chips, scaled.indices.copy(), scaled.indptr.copy()), shape=(m, m))
    meta.update(floor_chips=int(floors.sum()), remainder_chips=left)
    return Prior(m, 1, extra, meta)


def embed_hypothesis(q: HypothesisMatrix, space: StateSpace, reset_policy: str = "zero-row") -> HypothesisMatrix:
    """Lay a hypothesis over the non-reset states into the full state space.

    ``zero-row`` leaves the reset row empty, so it keeps the flat prior and
    contributes the same evidence under every hypothesis. ``uniform-row``
    fills it with the smallest positive weight of ``q`` on every non-reset
    column; that share depends on the spread of ``q`` and can tilt a
    comparison. The reset column stays empty either way.
    """
    if reset_policy not in RESET_POLICIES:
        raise ValueError(f"reset policy must be one of {RESET_POLICIES}")
    if q.m == space.m:
        return q
    base = len(space.base_states)
    if not space.has_reset or q.m != base:
        raise DimensionError(f"hypothesis has m={q.m}, state space has m={space.m}")
    r = space.reset_index
    keep = np.array([i for i in range(space.m) if i != r], dtype=np.int64)
    coo = q.matrix.tocoo()
    rows, cols, vals = [keep[coo.row]], [keep[coo.col]], [coo.data]
    if reset_policy == "uniform-row" and q.nnz:
        rows.append(np.full(base, r, dtype=np.int64))
        cols.append(keep)
        vals.append(np.full(base, coo.data.min()))
    mat = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(space.m, space.m))
    return HypothesisMatrix(mat, f"{q.diagonal_policy};reset={reset_policy}")


# -- toy priors ---------------------------------------------------------------

def _check_c(c) -> int:
    c = operator.index(c)
    if c < 0:
        raise ValueError("c must be nonnegative")
    return c


def uniform_toy_prior(m: int, c: int) -> Prior:
    c = _check_c(c)
    return Prior(m, 1 + c, None, {"toy": "uniform", "c": c})


def aligned_toy_prior(n: TransitionCounts, c: int) -> Prior:
    """alpha = 1 + c on observed transitions, 1 elsewhere."""
    c = _check_c(c)
    extra = n.matrix.copy()
    extra.data = np.full(extra.nnz, c, dtype=np.int64)
    return Prior(n.m, 1, extra, {"toy": "aligned", "c": c})


def opposing_toy_prior(n: TransitionCounts, c: int) -> Prior:
    """alpha = 1 + c on unobserved transitions, 1 on observed ones."""
    c = _check_c(c)
    m = n.m
    if c == 0:
        return Prior(m, 1, None, {"toy": "opposing", "c": 0})
    mask = np.ones((m, m), dtype=bool)
    obs = n.matrix.tocoo()
    mask[obs.row, obs.col] = False
    extra = sparse.csr_matrix(mask, dtype=np.int64) * c
    return Prior(m, 1, extra, {"toy": "opposing", "c": c})


# -- file format --------------------------------------------------------------

def write_prior(path, prior: Prior) -> None:
    k = prior.meta.get("k", 0)
    seed = prior.meta.get("seed", 0)
    coo = prior.extra.tocoo()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"m={prior.m} flat={prior.flat_offset} k={k} seed={seed}\n")
        for i, j, e in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i}\t{j}\t{prior.flat_offset + int(e)}\n")


def read_prior(path) -> Prior:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    try:
        head = dict(tok.split("=", 1) for tok in lines[0].split())
        m, flat = int(head["m"]), int(head["flat"])
        meta = {"k": int(head.get("k", 0)), "seed": int(head.get("seed", 0))}
    except (IndexError, KeyError, ValueError):
        raise ParseError("expected header 'm=<int> flat=<int> k=<int> seed=<u64>'", path=path, line=1) from None
    rows, cols, vals = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            i, j, a = (int(x) for x in line.split("\t"))
        except ValueError:
            raise ParseError("expected 'i<TAB>j<TAB>alpha'", path=path, line=lineno) from None
        if a <= flat or not (0 <= i < m and 0 <= j < m):
            raise ParseError("alpha must exceed flat and indices must be in range", path=path, line=lineno)
        rows.append(i)
        cols.append(j)
        vals.append(a - flat)
    extra = sparse.csr_matrix((np.array(vals, dtype=np.int64), (rows, cols)), shape=(m, m))
    return Prior(m, flat, extra, meta)

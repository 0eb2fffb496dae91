"""Marginal likelihood of transition counts under Dirichlet priors, Bayes
factors between hypotheses, and the resulting partial order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.special import gammaln

from .corpus import TransitionCounts
from .elicitation import Prior
from .errors import DimensionError

# Lower bounds of the 2 ln B bands (Kass & Raftery, 1995).
STRENGTH_BANDS = ((10.0, "decisive"), (6.0, "strong"), (2.0, "positive"), (0.0, "negligible"))


@dataclass(frozen=True)
class LogEvidence:
    value: float
    hypothesis: str = ""
    k: int | None = None
    fingerprint: str = ""
    prior_meta: dict = field(default_factory=dict, compare=False)


def _observed_alpha(counts: TransitionCounts, prior: Prior) -> np.ndarray:
    """Prior alpha at each stored count cell, aligned with ``counts.matrix.data``."""
    pattern = counts.matrix.copy()
    pattern.data = np.ones_like(pattern.data)
    at_obs = sparse.csr_matrix(prior.extra.multiply(pattern))
    alpha = pattern * prior.flat_offset + at_obs
    alpha.sort_indices()
    if alpha.nnz != counts.matrix.nnz or not np.array_equal(alpha.indices, counts.matrix.indices):
        raise AssertionError("alpha pattern lost alignment with counts")
    return alpha.data.astype(np.float64)


def log_evidence_value(counts: TransitionCounts, prior: Prior) -> float:
    """Natural log of the Dirichlet-multinomial marginal likelihood.

    Cells without observations contribute lnG(alpha) - lnG(alpha) = 0, so only
    stored counts and per-row alpha totals are touched.
    """
    if counts.m != prior.m:
        raise DimensionError(f"counts have m={counts.m}, prior has m={prior.m}")
    if counts.nnz == 0:
        return 0.0
    n = counts.matrix.data.astype(np.float64)
    a = _observed_alpha(counts, prior)
    row_n = counts.row_sums.astype(np.float64)
    active = row_n > 0
    row_a = prior.row_alpha_sums[active].astype(np.float64)
    row_terms = gammaln(row_a) - gammaln(row_a + row_n[active])
    cell_terms = gammaln(n + a) - gammaln(a)
    return math.fsum(row_terms) + math.fsum(cell_terms)


def log_evidence(counts: TransitionCounts, prior: Prior, hypothesis: str = "",
                 k: int | None = None) -> LogEvidence:
    if k is None:
        k = prior.meta.get("k")
    return LogEvidence(log_evidence_value(counts, prior), hypothesis, k, counts.fingerprint(), dict(prior.meta))


def log_bayes_factor(e1: LogEvidence, e2: LogEvidence) -> float:
    """ln B = ln P(D|H1) - ln P(D|H2); refuses evidences from different data or k."""
    if e1.fingerprint != e2.fingerprint:
        raise ValueError(f"evidences come from different data ({e1.fingerprint} vs {e2.fingerprint})")
    if e1.k != e2.k:
        raise ValueError(f"evidences use different k ({e1.k} vs {e2.k})")
    return e1.value - e2.value


def interpret_strength(log_b: float) -> str:
    two_ln_b = 2.0 * abs(log_b)
    for lower, name in STRENGTH_BANDS:
        if two_ln_b >= lower:
            return name
    return "negligible"


def is_significant(log_b: float) -> bool:
    return interpret_strength(log_b) != "negligible"


@dataclass(frozen=True)
class HypothesisRanking:
    k: int | None
    classes: tuple[tuple[str, ...], ...]
    values: dict = field(default_factory=dict, compare=False)

    @property
    def top(self) -> tuple[str, ...]:
        return self.classes[0]

    def rank_of(self, hypothesis: str) -> int:
        for r, cls in enumerate(self.classes):
            if hypothesis in cls:
                return r
        raise KeyError(hypothesis)


def rank_hypotheses(evidences: Sequence[LogEvidence]) -> HypothesisRanking:
    """Order by evidence, merging neighbours whose Bayes factor is negligible.

    Hypotheses tied on value keep their input order.
    """
    if not evidences:
        raise ValueError("nothing to rank")
    first = evidences[0]
    for e in evidences[1:]:
        log_bayes_factor(first, e)  # validates shared data and k
    order = sorted(range(len(evidences)), key=lambda i: -evidences[i].value)
    classes = [[evidences[order[0]].hypothesis]]
    for prev, cur in zip(order, order[1:]):
        lb = log_bayes_factor(evidences[prev], evidences[cur])
        if is_significant(lb):
            classes.append([evidences[cur].hypothesis])
        else:
            classes[-1].append(evidences[cur].hypothesis)
    return HypothesisRanking(first.k, tuple(tuple(c) for c in classes),
                             {e.hypothesis: e.value for e in evidences})


@dataclass(frozen=True)
class BayesFactor:
    h_a: str
    h_b: str
    k: int | None
    log_b: float

    @property
    def two_ln_b(self) -> float:
        return 2.0 * self.log_b

    @property
    def category(self) -> str:
        return interpret_strength(self.log_b)


def pairwise_bayes_factors(evidences: Sequence[LogEvidence]) -> list[BayesFactor]:
    """Every ordered pair (a, b), a != b, in input order."""
    out = []
    for a in evidences:
        for b in evidences:
            if a is not b:
                out.append(BayesFactor(a.hypothesis, b.hypothesis, a.k, log_bayes_factor(a, b)))
    return out

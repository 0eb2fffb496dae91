"""Rank hypotheses about sequential trails by Bayesian evidence.

Hypotheses are weight matrices over first-order transitions. Each is turned
into a Dirichlet prior by distributing pseudo-count chips, and hypotheses are
compared through the marginal likelihood of the observed transition counts.
"""
__version__ = "0.1.0"

from .corpus import (StateSpace, TrailCorpus, TransitionCounts, build_corpus, build_state_space,
                     count_transitions, read_trails)
from .elicitation import (Prior, aligned_toy_prior, embed_hypothesis, opposing_toy_prior, trial_roulette,
                          uniform_toy_prior)
from .evidence import (LogEvidence, interpret_strength, log_bayes_factor, log_evidence, rank_hypotheses)
from .hypothesis import (AdjacencyGraph, FeatureTable, HypothesisMatrix, cosine_similarity_hypothesis,
                         geographic_hypothesis, jaccard_similarity_hypothesis, popularity_hypothesis,
                         scalar_proximity_hypothesis, self_loop_hypothesis, structural_hypothesis,
                         uniform_hypothesis)

__all__ = [
    "StateSpace", "TrailCorpus", "TransitionCounts", "build_corpus", "build_state_space",
    "count_transitions", "read_trails", "Prior", "aligned_toy_prior", "embed_hypothesis",
    "opposing_toy_prior", "trial_roulette", "uniform_toy_prior", "LogEvidence", "interpret_strength",
    "log_bayes_factor", "log_evidence", "rank_hypotheses", "AdjacencyGraph", "FeatureTable",
    "HypothesisMatrix", "cosine_similarity_hypothesis", "geographic_hypothesis",
    "jaccard_similarity_hypothesis", "popularity_hypothesis", "scalar_proximity_hypothesis",
    "self_loop_hypothesis", "structural_hypothesis", "uniform_hypothesis",
]

"""Exit criteria. Each test records one PASS/FAIL line shown in the pytest summary."""
import contextlib
import time

import numpy as np
import pytest
from scipy import sparse

from trailbayes.corpus import TransitionCounts, build_corpus, count_transitions, write_trails
from trailbayes.elicitation import (Prior, aligned_toy_prior, opposing_toy_prior, scale_hypothesis, trial_roulette,
                                    uniform_toy_prior)
from trailbayes.evidence import LogEvidence, log_bayes_factor, log_evidence_value, pairwise_bayes_factors
from trailbayes.experiment import (ExperimentConfig, HypothesisSpec, check_orderings, generate_corpora,
                                   run_experiment, run_synthetic_suite, synthetic_sweeps, toy_prior_curves)
from trailbayes.hypothesis import HypothesisMatrix
from trailbayes.synthgen import GeneratorConfig

from conftest import ACCEPTANCE_LINES, STATES
from oracles import brute_force_counts, dense_log_evidence

pytestmark = pytest.mark.acceptance

DESK = GeneratorConfig(n_nodes=1000, m_out=10, clique_size=11, n_trails=1000, trail_length=5, seed=0)


@contextlib.contextmanager
def criterion(number, title, budget_s=None, setup_s=0.0):
    t0 = time.perf_counter() - setup_s
    status, note = "FAIL", ""
    try:
        yield
        elapsed = time.perf_counter() - t0
        if budget_s is not None and elapsed >= budget_s:
            note = f" (over budget: {elapsed:.2f}s >= {budget_s}s)"
            raise AssertionError(f"criterion {number} took {elapsed:.2f}s, budget {budget_s}s")
        status = "PASS"
    finally:
        elapsed = time.perf_counter() - t0
        limit = f" / {budget_s}s" if budget_s is not None else ""
        ACCEPTANCE_LINES.append(f"[{number}] {status}  {title}  ({elapsed:.2f}s{limit}){note}")
        print(ACCEPTANCE_LINES[-1])


def random_sparse_q(rng, m, density):
    q = rng.random((m, m)) * (rng.random((m, m)) < density)
    if not q.any():
        q[rng.integers(m), rng.integers(m)] = rng.random() + 0.01
    return HypothesisMatrix(sparse.csr_matrix(q))


def test_1_worked_example(geo_toy):
    with criterion(1, "trial roulette worked example", budget_s=1.0):
        a_row, b_col = STATES.index("A"), STATES.index("B")
        c_row = STATES.index("C")
        scaled = scale_hypothesis(geo_toy, 1).toarray()
        assert abs(scaled[a_row, b_col] - 2.43) <= 0.005
        ones = [tuple(ij) for ij in np.argwhere(np.isclose(geo_toy.toarray(), 1.0))]
        assert len(ones) == 4
        frac = scaled - np.floor(scaled)
        assert all(abs(frac[ij] - 0.472) < 5e-4 for ij in ones)
        seen_cb = False
        for seed in range(64):
            prior = trial_roulette(geo_toy, 1, seed)
            assert prior.meta["floor_chips"] == 22
            assert prior.meta["remainder_chips"] == 3
            alpha = prior.toarray()
            floors = np.floor(scaled + 1e-9).astype(int)
            got_remainder = [ij for ij in zip(*np.nonzero(alpha - 1 - floors)) if alpha[ij] - 1 - floors[ij] > 0]
            assert len(got_remainder) == 3
            assert set(got_remainder) <= set(ones)
            if (c_row, b_col) in got_remainder:
                seen_cb = True
                assert alpha[c_row, b_col] == 5
        assert seen_cb


def test_2_chip_conservation():
    with criterion(2, "chip conservation on 500 random Q x k in {0,1,5,20}", budget_s=10.0):
        rng = np.random.default_rng(2)
        for _ in range(500):
            m = int(rng.integers(1, 51))
            q = random_sparse_q(rng, m, float(rng.uniform(0.01, 0.3)))
            for k in (0, 1, 5, 20):
                prior = trial_roulette(q, k, int(rng.integers(0, 2 ** 63)))
                assert prior.informative_chips == k * m * m
                assert int(prior.extra.sum()) + (prior.flat_offset - 1) * m * m == k * m * m


def test_3_evidence_matches_dense_oracle():
    with criterion(3, "sparse evidence equals dense evaluation (200 cases, 1e-9)", budget_s=10.0):
        n = TransitionCounts.from_dense([[2, 1], [0, 1]])
        assert abs(log_evidence_value(n, Prior(2)) - np.log(1 / 24)) <= 1e-9
        assert abs(log_evidence_value(n, Prior(2)) - (-3.17805383034794)) <= 1e-9
        rng = np.random.default_rng(3)
        for _ in range(200):
            m = int(rng.integers(1, 21))
            counts = rng.integers(0, 51, size=(m, m)) * (rng.random((m, m)) < rng.uniform(0.05, 0.9))
            q = random_sparse_q(rng, m, float(rng.uniform(0.05, 0.8)))
            prior = trial_roulette(q, int(rng.integers(0, 8)), int(rng.integers(0, 2 ** 32)))
            got = log_evidence_value(TransitionCounts.from_dense(counts), prior)
            assert abs(got - dense_log_evidence(counts, prior.toarray())) <= 1e-9


def test_4_empty_data_identity():
    with criterion(4, "log evidence is 0 on empty counts"):
        rng = np.random.default_rng(4)
        for _ in range(50):
            m = int(rng.integers(1, 30))
            empty = TransitionCounts(sparse.csr_matrix((m, m), dtype=np.int64))
            for prior in (Prior(m), uniform_toy_prior(m, int(rng.integers(0, 20))),
                          trial_roulette(random_sparse_q(rng, m, 0.3), int(rng.integers(0, 10)), 0)):
                assert abs(log_evidence_value(empty, prior)) <= 1e-12


def test_5_toy_prior_curves():
    with criterion(5, "toy priors: uniform non-increasing, aligned up, opposing down, equal at c=0",
                   budget_s=30.0):
        # link-following trails on a larger network: about a thousand visited states
        _, corpora = generate_corpora(GeneratorConfig(n_nodes=2000, seed=5))
        counts = count_transitions(build_corpus(corpora["structural"], reset=True))
        assert 800 <= counts.m <= 1200
        cs = (0, 1, 3, 5, 10, 20)
        rows = toy_prior_curves(counts, cs)
        curve = {p: [v for name, _, v in rows if name == p] for p in ("uniform", "aligned", "opposing")}
        u, a, o = curve["uniform"], curve["aligned"], curve["opposing"]
        assert all(x >= y for x, y in zip(u, u[1:]))
        assert all(x < y for x, y in zip(a, a[1:]))
        assert all(x > y for x, y in zip(o, o[1:]))
        assert u[0] == a[0] == o[0]
        print(f"    m={counts.m}, transitions={counts.total}")


@pytest.fixture(scope="module")
def desk_suite():
    t0 = time.perf_counter()
    graph, corpora, results = synthetic_sweeps(DESK, ks=(0, 1, 2, 3, 5, 10))
    return results, time.perf_counter() - t0


def test_6_synthetic_orderings(desk_suite):
    results, build_time = desk_suite
    with criterion(6, "synthetic orderings decisive for k in {1,2,3,5,10}", budget_s=120.0, setup_s=build_time):
        checks = check_orderings(results)
        assert sorted({c.k for c in checks}) == [1, 2, 3, 5, 10]
        assert len(checks) == 15
        for c in checks:
            assert c.top == c.expected, c
            assert c.two_ln_b >= 10.0, c
        worst = min(checks, key=lambda c: c.two_ln_b)
        print(f"    smallest margin: {worst.corpus} k={worst.k} 2lnB={worst.two_ln_b:.1f}")


def test_7_k0_bitwise_equality(desk_suite):
    results, _ = desk_suite
    with criterion(7, "all hypotheses bitwise equal at k=0"):
        for res in results.values():
            values = [e.value for e in res.at_k(0)]
            assert len({v.hex() for v in values}) == 1
        rng = np.random.default_rng(7)
        counts = TransitionCounts.from_dense(rng.integers(0, 5, size=(30, 30)))
        vals = {log_evidence_value(counts, trial_roulette(random_sparse_q(rng, 30, d), 0, s)).hex()
                for d, s in ((0.1, 1), (0.5, 2), (1.0, 3))}
        assert len(vals) == 1


def test_8_determinism(tmp_path):
    with criterion(8, "identical config and seed give byte-identical reports"):
        small = GeneratorConfig(n_nodes=200, n_trails=200, seed=8)
        _, corpora = generate_corpora(small)
        write_trails(tmp_path / "trails.tsv", corpora["structural"])
        links = tmp_path / "links.tsv"
        links.write_text("".join(f"{i}\t{(i * 7) % 200}\n" for i in range(200)))
        specs = (HypothesisSpec.parse("uniform"), HypothesisSpec.parse("self_loop"),
                 HypothesisSpec.parse(f"structural:graph={links}"))
        outs = []
        for name, jobs in (("a", 1), ("b", 3)):
            cfg = ExperimentConfig(str(tmp_path / "trails.tsv"), specs, (0, 1, 2, 5), reset=True, seed=12345,
                                   out=str(tmp_path / name), jobs=jobs)
            run_experiment(cfg)
            outs.append(tmp_path / name)
        for name in ("synth_a", "synth_b"):
            run_synthetic_suite(GeneratorConfig(n_nodes=150, n_trails=150, seed=8), tmp_path / name, ks=(0, 1, 3))
        pairs = [(outs[0], outs[1]), (tmp_path / "synth_a", tmp_path / "synth_b")]
        compared = 0
        for left, right in pairs:
            files = sorted(p.relative_to(left) for p in left.rglob("*") if p.is_file() and p.name != "manifest.json")
            assert files == sorted(p.relative_to(right) for p in right.rglob("*")
                                   if p.is_file() and p.name != "manifest.json")
            for rel in files:
                assert (left / rel).read_bytes() == (right / rel).read_bytes(), rel
                compared += 1
        assert compared >= 10


def test_9_property_suite():
    with criterion(9, "scale invariance, monotone fairness, permutation equivariance, BF antisymmetry "
                      "(>=100 cases each)"):
        rng = np.random.default_rng(9)
        cases = 0
        for _ in range(120):
            m = int(rng.integers(2, 25))
            q = random_sparse_q(rng, m, float(rng.uniform(0.05, 0.6)))
            k, seed = int(rng.integers(1, 12)), int(rng.integers(0, 2 ** 63))
            prior = trial_roulette(q, k, seed)
            assert prior == trial_roulette(q.scaled(3.0), k, seed)
            qa, aa = q.toarray().ravel(), prior.toarray().ravel()
            order = np.argsort(qa, kind="stable")
            strictly = qa[order[1:]] > qa[order[:-1]]
            assert np.all(aa[order[1:]][strictly] >= aa[order[:-1]][strictly])
            cases += 1
        assert cases >= 100

        for _ in range(120):
            m = int(rng.integers(2, 15))
            trails = [[str(x) for x in rng.integers(0, m, size=int(rng.integers(2, 7)))]
                      for _ in range(int(rng.integers(1, 25)))]
            corpus = build_corpus(trails)
            counts = count_transitions(corpus)
            mm = corpus.space.m
            np.testing.assert_array_equal(counts.toarray(), brute_force_counts(corpus.trails, mm))
            perm = rng.permutation(mm)
            relabel = {s: f"z{perm[i]:03d}" for i, s in enumerate(corpus.space.states)}
            other = build_corpus([[relabel[t] for t in tr] for tr in trails])
            mapping = [other.space.index[relabel[s]] for s in corpus.space.states]
            np.testing.assert_array_equal(count_transitions(other).toarray(), counts.permuted(mapping).toarray())
            alpha = trial_roulette(random_sparse_q(rng, mm, 0.4), int(rng.integers(0, 5)), 1).toarray()
            permuted_alpha = np.empty_like(alpha)
            permuted_alpha[np.ix_(mapping, mapping)] = alpha
            e1 = log_evidence_value(counts, Prior(mm, 1, alpha - 1))
            e2 = log_evidence_value(count_transitions(other), Prior(mm, 1, permuted_alpha - 1))
            assert abs(e1 - e2) <= 1e-9

        for _ in range(120):
            values = rng.uniform(-1e4, 0, size=int(rng.integers(2, 6)))
            evs = [LogEvidence(float(v), f"h{i}", 1, "fp") for i, v in enumerate(values)]
            table = {(b.h_a, b.h_b): b.log_b for b in pairwise_bayes_factors(evs)}
            for (x, y), v in table.items():
                assert table[(y, x)] == -v
            assert log_bayes_factor(evs[0], evs[1]) == -log_bayes_factor(evs[1], evs[0])

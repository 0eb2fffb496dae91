"""Experiment orchestration: build hypotheses, sweep k, write reports.

Reports are plain TSV (or JSON) files written in a fixed order with
``repr`` floats, so identical inputs give byte-identical files. Only the
manifest carries wall-clock timings.
"""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .corpus import StateSpace, TransitionCounts, build_corpus, count_transitions, read_trails, write_trails
from .elicitation import (RESET_POLICIES, aligned_toy_prior, embed_hypothesis, opposing_toy_prior,
                          trial_roulette, uniform_toy_prior)
from .errors import ParseError, SuiteAssertionError
from .evidence import (LogEvidence, interpret_strength, log_bayes_factor, log_evidence,
                       pairwise_bayes_factors, rank_hypotheses)
from .hypothesis import (HypothesisMatrix, cosine_similarity_hypothesis, geographic_hypothesis,
                         jaccard_similarity_hypothesis, popularity_hypothesis, read_feature_table,
                         read_geo_table, read_graph, read_hypothesis_file, read_scalar_table,
                         scalar_proximity_hypothesis, self_loop_hypothesis, structural_hypothesis,
                         uniform_hypothesis)
from .synthgen import (GeneratorConfig, popularity_walk, price_network, structural_walk,
                       teleportation_walk, write_graph)

log = logging.getLogger(__name__)

DEFAULT_K = (0, 1, 2, 3, 5, 10)
TOY_C = (0, 1, 3, 5, 10, 20)
DECISIVE_TWO_LN_B = 10.0


# -- hypothesis specs ---------------------------------------------------------

BUILDERS = ("uniform", "self_loop", "structural", "popularity", "cosine", "jaccard", "geo", "scalar")
_ALIASES = {"self-loop": "self_loop", "selfloop": "self_loop", "geographic": "geo", "teleport": "uniform"}


@dataclass(frozen=True)
class HypothesisSpec:
    """A named builder with ``key=value`` parameters, or a matrix file."""

    builder: str
    params: tuple[tuple[str, str], ...] = ()
    label: str = ""

    @property
    def name(self) -> str:
        return self.label or dict(self.params).get("label") or self.builder

    @classmethod
    def parse(cls, text: str) -> "HypothesisSpec":
        """``NAME`` or ``NAME:key=value,key=value``."""
        name, _, rest = text.partition(":")
        name = _ALIASES.get(name.strip(), name.strip())
        if name not in BUILDERS:
            raise ParseError(f"unknown hypothesis builder {name!r}; choose from {', '.join(BUILDERS)}")
        params = []
        for item in filter(None, (p.strip() for p in rest.split(","))):
            key, eq, value = item.partition("=")
            if not eq or not key:
                raise ParseError(f"bad hypothesis parameter {item!r} in {text!r}; expected key=value")
            params.append((key.strip(), value.strip()))
        return cls(name, tuple(params))

    @classmethod
    def from_file(cls, path) -> "HypothesisSpec":
        path = Path(path)
        return cls("file", (("path", str(path.resolve())),), path.stem)

    def to_dict(self) -> dict:
        return {"builder": self.builder, "params": dict(self.params), "label": self.name}

    @classmethod
    def from_dict(cls, d) -> "HypothesisSpec":
        return cls(d["builder"], tuple(sorted(d.get("params", {}).items())), d.get("label", ""))


def _need(params, key, spec):
    try:
        return params[key]
    except KeyError:
        raise ParseError(f"hypothesis {spec.builder!r} needs parameter {key!r}") from None


def build_hypothesis(spec: HypothesisSpec, space: StateSpace) -> HypothesisMatrix:
    """Build over the non-reset states (or read from file); no reset embedding yet."""
    p = dict(spec.params)
    states = space.base_states
    b = spec.builder
    if b == "file":
        return read_hypothesis_file(p["path"], space)
    if b == "uniform":
        return uniform_hypothesis(len(states))
    if b == "self_loop":
        return self_loop_hypothesis(len(states))
    if b == "structural":
        return structural_hypothesis(read_graph(_need(p, "graph", spec)), states, float(p.get("diagonal", 0)))
    if b == "popularity":
        return popularity_hypothesis(read_graph(_need(p, "graph", spec)), states)
    if b == "cosine":
        table = read_feature_table(_need(p, "features", spec), kind="real")
        return cosine_similarity_hypothesis(table, states, float(p.get("threshold", 0.1)),
                                            float(p.get("diagonal", 0)))
    if b == "jaccard":
        return jaccard_similarity_hypothesis(read_feature_table(_need(p, "features", spec), kind="binary"), states)
    if b == "geo":
        return geographic_hypothesis(read_geo_table(_need(p, "coords", spec)), states)
    if b == "scalar":
        return scalar_proximity_hypothesis(read_scalar_table(_need(p, "values", spec)), states)
    raise ParseError(f"unknown hypothesis builder {b!r}")


# -- configuration ------------------------------------------------------------

def normalize_k(ks: Sequence) -> tuple[int, ...]:
    out = set()
    for k in ks:
        try:
            fk = float(k)
        except (TypeError, ValueError):
            raise ParseError(f"k must be a nonnegative integer, got {k!r}") from None
        if fk < 0 or not fk.is_integer():
            raise ParseError(f"k must be a nonnegative integer, got {k!r}")
        out.add(int(fk))
    if not out:
        raise ParseError("k list is empty")
    return tuple(sorted(out))


def parse_k_list(text: str) -> tuple[int, ...]:
    return normalize_k([t for t in text.replace(" ", "").split(",") if t])


@dataclass(frozen=True)
class ExperimentConfig:
    trails: str
    hypotheses: tuple[HypothesisSpec, ...]
    ks: tuple[int, ...] = DEFAULT_K
    reset: bool = False
    reset_policy: str = "zero-row"
    seed: int = 0
    out: str = "results"
    fmt: str = "tsv"
    jobs: int = 1

    def __post_init__(self):
        if not self.hypotheses:
            raise ParseError("at least one hypothesis is required")
        names = [h.name for h in self.hypotheses]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ParseError(f"duplicate hypothesis labels: {', '.join(dupes)}; set label=...")
        object.__setattr__(self, "ks", normalize_k(self.ks))
        if self.fmt not in ("tsv", "json"):
            raise ParseError("format must be tsv or json")
        if self.reset_policy not in RESET_POLICIES:
            raise ParseError(f"reset policy must be one of {RESET_POLICIES}")
        if not 0 <= self.seed < 2 ** 64:
            raise ParseError("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hypotheses"] = [h.to_dict() for h in self.hypotheses]
        d["ks"] = list(self.ks)
        return d

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        d = dict(d)
        d["hypotheses"] = tuple(HypothesisSpec.from_dict(h) for h in d["hypotheses"])
        d["ks"] = tuple(d["ks"])
        return cls(**d)


# -- core sweep ---------------------------------------------------------------

@dataclass
class SweepResult:
    counts: TransitionCounts
    labels: tuple[str, ...]
    ks: tuple[int, ...]
    evidence: dict = field(default_factory=dict)  # (label, k) -> LogEvidence
    prior_meta: dict = field(default_factory=dict)  # label -> metadata

    def at_k(self, k) -> list[LogEvidence]:
        return [self.evidence[(h, k)] for h in self.labels]

    def ranking(self, k):
        return rank_hypotheses(self.at_k(k))


def sweep(counts: TransitionCounts, hypotheses: dict[str, HypothesisMatrix], ks: Sequence[int],
          seed: int = 0, jobs: int = 1) -> SweepResult:
    """Elicit a prior for every (hypothesis, k) cell and evaluate its evidence."""
    ks = normalize_k(ks)
    labels = tuple(hypotheses)
    cells = [(h, k) for h in labels for k in ks]

    def job(cell):
        h, k = cell
        prior = trial_roulette(hypotheses[h], k, seed)
        return log_evidence(counts, prior, hypothesis=h, k=k)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(job, cells))
    else:
        results = [job(c) for c in cells]
    res = SweepResult(counts, labels, ks)
    for cell, ev in zip(cells, results):
        res.evidence[cell] = ev
    for h in labels:
        q = hypotheses[h]
        res.prior_meta[h] = {
            "nnz": int(q.nnz),
            "diagonal_policy": q.diagonal_policy,
            "chips": {str(k): {key: res.evidence[(h, k)].prior_meta.get(key)
                               for key in ("floor_chips", "remainder_chips")} for k in ks},
        }
    return res


# -- report writers -----------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def write_reports(res: SweepResult, out: Path, fmt: str = "tsv") -> list[Path]:
    """Evidence table, pairwise Bayes factors, per-k rankings, and curves."""
    out.mkdir(parents=True, exist_ok=True)
    ev_rows = [(h, k, res.evidence[(h, k)].value) for h in res.labels for k in res.ks]
    bf_rows = []
    for k in res.ks:
        for bf in pairwise_bayes_factors(res.at_k(k)):
            bf_rows.append((bf.h_a, bf.h_b, k, bf.two_ln_b, bf.category))
    rankings = [res.ranking(k) for k in res.ks]
    written = []
    if fmt == "tsv":
        ev = "hypothesis\tk\tlog_evidence\n" + "".join(f"{h}\t{k}\t{_fmt(v)}\n" for h, k, v in ev_rows)
        bf = "h_a\th_b\tk\ttwo_ln_B\tcategory\n" + "".join(
            f"{a}\t{b}\t{k}\t{_fmt(t)}\t{c}\n" for a, b, k, t, c in bf_rows)
        rk = "k\trank\thypotheses\n" + "".join(
            f"{r.k}\t{i + 1}\t{','.join(cls)}\n" for r in rankings for i, cls in enumerate(r.classes))
        for name, text in (("evidence.tsv", ev), ("bayes_factors.tsv", bf), ("ranking.tsv", rk)):
            _write(out / name, text)
            written.append(out / name)
    else:
        ev = [{"hypothesis": h, "k": k, "log_evidence": v} for h, k, v in ev_rows]
        bf = [{"h_a": a, "h_b": b, "k": k, "two_ln_B": t, "category": c} for a, b, k, t, c in bf_rows]
        rk = [{"k": r.k, "classes": [list(c) for c in r.classes]} for r in rankings]
        for name, obj in (("evidence.json", ev), ("bayes_factors.json", bf), ("ranking.json", rk)):
            _write(out / name, _dump_json(obj))
            written.append(out / name)
    written += emit_plot_data(ev_rows, out / "curves", fmt)
    return written


def emit_plot_data(rows: Sequence[tuple[str, int, float]], out: Path, fmt: str = "tsv") -> list[Path]:
    """One (k, log_evidence) curve per hypothesis, points sorted by k."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    curves: dict[str, dict[int, float]] = {}
    for h, k, v in rows:
        curves.setdefault(h, {})[int(k)] = float(v)
    all_k = sorted({k for c in curves.values() for k in c})
    for h, c in curves.items():
        missing = [k for k in all_k if k not in c]
        if missing:
            log.warning("curve %r lacks k=%s", h, ",".join(map(str, missing)))
    if fmt == "json":
        path = out / "curves.json"
        _write(path, _dump_json({h: [[k, c[k]] for k in sorted(c)] for h, c in curves.items()}))
        return [path]
    paths = []
    for h, c in curves.items():
        path = out / f"{_safe(h)}.tsv"
        _write(path, "k\tlog_evidence\n" + "".join(f"{k}\t{_fmt(c[k])}\n" for k in sorted(c)))
        paths.append(path)
    return paths


def read_evidence_report(path) -> list[tuple[str, int, float]]:
    path = Path(path)
    if path.suffix == ".json":
        return [(r["hypothesis"], int(r["k"]), float(r["log_evidence"])) for r in json.loads(path.read_text())]
    rows = []
    lines = path.read_text(encoding="utf-8").splitlines()
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            h, k, v = line.split("\t")
            rows.append((h, int(k), float(v)))
        except ValueError:
            raise ParseError("expected 'hypothesis<TAB>k<TAB>log_evidence'", path=path, line=lineno) from None
    return rows


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


# -- run_experiment -----------------------------------------------------------

def run_experiment(cfg: ExperimentConfig) -> SweepResult:
    t0 = time.perf_counter()
    out = Path(cfg.out)
    raw = read_trails(cfg.trails)
    corpus = build_corpus(raw, reset=cfg.reset)
    counts = count_transitions(corpus)
    t_counts = time.perf_counter()
    hyps = {}
    for spec in cfg.hypotheses:
        hyps[spec.name] = embed_hypothesis(build_hypothesis(spec, corpus.space), corpus.space, cfg.reset_policy)
    t_hyp = time.perf_counter()
    res = sweep(counts, hyps, cfg.ks, cfg.seed, cfg.jobs)
    t_sweep = time.perf_counter()
    write_reports(res, out, cfg.fmt)
    manifest = {
        "tool": "trailbayes",
        "version": __version__,
        "config": {**cfg.to_dict(), "trails": str(Path(cfg.trails).resolve()), "out": str(out.resolve())},
        "data": {"fingerprint": counts.fingerprint(), "m": counts.m, "transitions": counts.total,
                 "trails": len(corpus), "reset_index": corpus.space.reset_index},
        "hypotheses": {h: {**res.prior_meta[h], "reset_policy": cfg.reset_policy if corpus.space.has_reset else None}
                       for h in res.labels},
        "timings_s": {"counting": t_counts - t0, "hypotheses": t_hyp - t_counts,
                      "sweep": t_sweep - t_hyp, "total": time.perf_counter() - t0},
    }
    _write(out / "manifest.json", _dump_json(manifest))
    return res


def config_from_manifest(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8"))["config"])


# -- toy priors ---------------------------------------------------------------

def toy_prior_curves(counts: TransitionCounts, cs: Sequence[int] = TOY_C) -> list[tuple[str, int, float]]:
    rows = []
    for name, make in (("uniform", lambda c: uniform_toy_prior(counts.m, c)),
                       ("aligned", lambda c: aligned_toy_prior(counts, c)),
                       ("opposing", lambda c: opposing_toy_prior(counts, c))):
        for c in cs:
            rows.append((name, int(c), log_evidence(counts, make(c)).value))
    return rows


def run_toy_priors(trails, out, cs: Sequence[int] = TOY_C, reset: bool = False, fmt: str = "tsv"):
    counts = count_transitions(build_corpus(read_trails(trails), reset=reset))
    rows = toy_prior_curves(counts, normalize_k(cs))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        _write(out / "toy_priors.json", _dump_json([{"prior": p, "c": c, "log_evidence": v} for p, c, v in rows]))
    else:
        _write(out / "toy_priors.tsv",
               "prior\tc\tlog_evidence\n" + "".join(f"{p}\t{c}\t{_fmt(v)}\n" for p, c, v in rows))
    emit_plot_data(rows, out / "curves", fmt)
    return rows


# -- synthetic suite ----------------------------------------------------------

EXPECTED_TOP = {"structural": "structural", "popularity": "popularity", "teleportation": "uniform"}


@dataclass(frozen=True)
class SuiteCheck:
    corpus: str
    k: int
    expected: str
    top: str
    runner_up: str
    two_ln_b: float

    @property
    def ok(self) -> bool:
        return self.top == self.expected and self.two_ln_b >= DECISIVE_TWO_LN_B


def generate_corpora(cfg: GeneratorConfig):
    graph = price_network(cfg)
    corpora = {
        "structural": structural_walk(graph, cfg),
        "popularity": popularity_walk(graph, cfg),
        "teleportation": teleportation_walk(graph.n, cfg),
    }
    return graph, corpora


def synthetic_sweeps(cfg: GeneratorConfig, ks: Sequence[int] = DEFAULT_K, reset: bool = True,
                     reset_policy: str = "zero-row", seed: int = 0, jobs: int = 1):
    """Generate the network and corpora and sweep the three hypotheses over each."""
    graph, corpora = generate_corpora(cfg)
    adj = graph.to_adjacency()
    results = {}
    for name, raw in corpora.items():
        corpus = build_corpus(raw, reset=reset)
        space = corpus.space
        base = space.base_states
        hyps = {
            "uniform": uniform_hypothesis(len(base)),
            "structural": structural_hypothesis(adj, base),
            "popularity": popularity_hypothesis(adj, base),
        }
        hyps = {h: embed_hypothesis(q, space, reset_policy) for h, q in hyps.items()}
        results[name] = sweep(count_transitions(corpus), hyps, ks, seed, jobs)
    return graph, corpora, results


def check_orderings(results: dict[str, SweepResult]) -> list[SuiteCheck]:
    checks = []
    for name, res in results.items():
        for k in res.ks:
            if k < 1:
                continue
            ordered = sorted(res.at_k(k), key=lambda e: -e.value)
            top, second = ordered[0], ordered[1]
            checks.append(SuiteCheck(name, k, EXPECTED_TOP[name], top.hypothesis, second.hypothesis,
                                     2.0 * log_bayes_factor(top, second)))
    return checks


def run_synthetic_suite(cfg: GeneratorConfig | None = None, out="synth-suite", ks: Sequence[int] = DEFAULT_K,
                        reset: bool = True, reset_policy: str = "zero-row", fmt: str = "tsv",
                        jobs: int = 1, check: bool = True, **overrides):
    """Reproduce the synthetic comparison end to end and verify its orderings.

    Raises :class:`SuiteAssertionError` (after writing every report) when a
    corpus does not rank its generating mechanism first by a decisive margin.
    """
    cfg = replace(cfg or GeneratorConfig(), **overrides)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    graph, corpora, results = synthetic_sweeps(cfg, ks, reset, reset_policy, cfg.seed, jobs)
    write_graph(out / "network.tsv", graph)
    _write(out / "generator.json", cfg.to_json() + "\n")
    for name, res in results.items():
        write_trails(out / f"{name}_trails.tsv", corpora[name])
        write_reports(res, out / name, fmt)
    checks = check_orderings(results)
    _write(out / "suite.tsv", "corpus\tk\texpected\ttop\trunner_up\ttwo_ln_B\tcategory\tok\n" + "".join(
        f"{c.corpus}\t{c.k}\t{c.expected}\t{c.top}\t{c.runner_up}\t{_fmt(c.two_ln_b)}\t"
        f"{interpret_strength(c.two_ln_b / 2)}\t{'pass' if c.ok else 'FAIL'}\n" for c in checks))
    manifest = {
        "tool": "trailbayes", "version": __version__,
        "generator": json.loads(cfg.to_json()),
        "ks": list(normalize_k(ks)), "reset": reset, "reset_policy": reset_policy,
        "data": {name: {"fingerprint": r.counts.fingerprint(), "m": r.counts.m} for name, r in results.items()},
        "timings_s": {"total": time.perf_counter() - t0},
    }
    _write(out / "manifest.json", _dump_json(manifest))
    failed = [c for c in checks if not c.ok]
    if check and failed:
        lines = [f"{c.corpus} corpus, k={c.k}: expected {c.expected} first, got {c.top} "
                 f"(2 ln B over {c.runner_up} = {c.two_ln_b:.3g})" for c in failed]
        raise SuiteAssertionError("synthetic ordering failed:\n  " + "\n  ".join(lines))
    return checks

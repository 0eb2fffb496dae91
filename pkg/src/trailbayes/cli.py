"""Command line entry point.

Exit codes: 0 success, 2 usage error, 3 parse error, 4 dimension mismatch,
5 degenerate hypothesis, 6 synthetic-suite ordering failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .corpus import write_trails
from .errors import ParseError, TrailBayesError
from .experiment import (DEFAULT_K, TOY_C, ExperimentConfig, HypothesisSpec, config_from_manifest,
                         parse_k_list, run_experiment, run_synthetic_suite, run_toy_priors)
from .synthgen import (GeneratorConfig, popularity_walk, price_network, read_directed_graph,
                       structural_walk, teleportation_walk, write_graph)

log = logging.getLogger("trailbayes")


def _k_list(text):
    try:
        return parse_k_list(text)
    except ParseError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_generator_args(p, n_nodes=10_000):
    p.add_argument("--nodes", type=int, default=n_nodes, help="network size (default %(default)s)")
    p.add_argument("--m-out", type=int, default=10, help="out-links per new node (default %(default)s)")
    p.add_argument("--clique", type=int, default=11, help="initial clique size (default %(default)s)")
    p.add_argument("--n-trails", type=int, default=1000)
    p.add_argument("--length", type=int, default=5, help="states per trail")
    p.add_argument("--temperature", type=float, default=10.0, help="popularity softmax temperature")
    p.add_argument("--teleport-self", action="store_true", help="allow teleporting to the current node")


def _generator_config(args) -> GeneratorConfig:
    try:
        return GeneratorConfig(args.nodes, args.m_out, args.clique, args.n_trails, args.length,
                               args.temperature, args.seed, args.teleport_self)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trailbayes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="compare hypotheses on a trail file")
    run.add_argument("--trails", help="trail file: one trail per line, tab-separated states")
    run.add_argument("--reset", action="store_true", help="add a reset state before every trail")
    run.add_argument("--reset-policy", choices=("uniform-row", "zero-row"), default="zero-row")
    run.add_argument("--hypothesis", action="append", default=[], metavar="NAME:PARAMS",
                     help="builder spec, e.g. structural:graph=links.tsv,diagonal=1 (repeatable)")
    run.add_argument("--hypothesis-file", action="append", default=[], metavar="PATH",
                     help="precomputed matrix, 'state_i<TAB>state_j<TAB>weight' (repeatable)")
    run.add_argument("--k", type=_k_list, default=DEFAULT_K, metavar="LIST")
    run.add_argument("--seed", type=_u64, default=0)
    run.add_argument("--out", default="results")
    run.add_argument("--format", choices=("tsv", "json"), default="tsv")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--from-manifest", metavar="PATH", help="rerun the configuration recorded in a manifest")

    synth = sub.add_parser("synth-suite", help="synthetic network experiment with ordering checks")
    _add_generator_args(synth)
    synth.add_argument("--k", type=_k_list, default=DEFAULT_K, metavar="LIST")
    synth.add_argument("--seed", type=_u64, default=0)
    synth.add_argument("--no-reset", action="store_true", help="do not add a reset state")
    synth.add_argument("--reset-policy", choices=("uniform-row", "zero-row"), default="zero-row")
    synth.add_argument("--out", default="synth-suite")
    synth.add_argument("--format", choices=("tsv", "json"), default="tsv")
    synth.add_argument("--jobs", type=int, default=1)

    toy = sub.add_parser("toy-priors", help="evidence of uniform/aligned/opposing toy priors over c")
    toy.add_argument("--trails", required=True)
    toy.add_argument("--reset", action="store_true")
    toy.add_argument("--c", type=_k_list, default=TOY_C, metavar="LIST")
    toy.add_argument("--out", default="toy-priors")
    toy.add_argument("--format", choices=("tsv", "json"), default="tsv")

    net = sub.add_parser("gen-network", help="grow a preferential-attachment network")
    _add_generator_args(net)
    net.add_argument("--seed", type=_u64, default=0)
    net.add_argument("--out", required=True, help="edge list path; config JSON written next to it")

    trails = sub.add_parser("gen-trails", help="simulate trails over a network")
    _add_generator_args(trails)
    trails.add_argument("--graph", required=True, help="edge list from gen-network")
    trails.add_argument("--mechanism", choices=("structural", "popularity", "teleportation"), required=True)
    trails.add_argument("--seed", type=_u64, default=0)
    trails.add_argument("--out", required=True)
    return parser


def _cmd_run(args):
    if args.from_manifest:
        cfg = config_from_manifest(args.from_manifest)
    else:
        if not args.trails:
            raise ParseError("--trails is required (or use --from-manifest)")
        specs = [HypothesisSpec.parse(h) for h in args.hypothesis]
        specs += [HypothesisSpec.from_file(p) for p in args.hypothesis_file]
        cfg = ExperimentConfig(args.trails, tuple(specs), args.k, args.reset, args.reset_policy,
                               args.seed, args.out, args.format, max(1, args.jobs))
    res = run_experiment(cfg)
    for k in res.ks:
        classes = " > ".join("{" + ", ".join(c) + "}" for c in res.ranking(k).classes)
        print(f"k={k}: {classes}")
    return 0


def _cmd_synth(args):
    cfg = _generator_config(args)
    checks = run_synthetic_suite(cfg, args.out, args.k, reset=not args.no_reset, reset_policy=args.reset_policy,
                                 fmt=args.format, jobs=max(1, args.jobs))
    for c in checks:
        print(f"{c.corpus:>13}  k={c.k:<3} top={c.top:<11} 2lnB={c.two_ln_b:.4g}  {'pass' if c.ok else 'FAIL'}")
    return 0


def _cmd_toy(args):
    for prior, c, v in run_toy_priors(args.trails, args.out, args.c, args.reset, args.format):
        print(f"{prior}\t{c}\t{v!r}")
    return 0


def _cmd_gen_network(args):
    cfg = _generator_config(args)
    g = price_network(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_graph(out, g)
    out.with_suffix(".json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    print(f"{g.n} nodes, {g.n_edges} edges -> {out}")
    return 0


def _cmd_gen_trails(args):
    cfg = _generator_config(args)
    g = read_directed_graph(args.graph)
    walk = {"structural": lambda: structural_walk(g, cfg),
            "popularity": lambda: popularity_walk(g, cfg),
            "teleportation": lambda: teleportation_walk(g.n, cfg)}[args.mechanism]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trails(out, walk(), header=f"mechanism={args.mechanism}\n" + cfg.to_json())
    print(f"{cfg.n_trails} {args.mechanism} trails -> {out}")
    return 0


COMMANDS = {"run": _cmd_run, "synth-suite": _cmd_synth, "toy-priors": _cmd_toy,
            "gen-network": _cmd_gen_network, "gen-trails": _cmd_gen_trails}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except TrailBayesError as exc:
        print(f"trailbayes: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"trailbayes: error: {exc}", file=sys.stderr)
        return ParseError.exit_code


if __name__ == "__main__":
    sys.exit(main())

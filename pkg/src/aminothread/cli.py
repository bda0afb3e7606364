"""``aminothread`` command line."""

import argparse
import json
import logging
import sys

from . import checks
from .config import ALGORITHMS, ConfigError, load_config
from .geometry import TemplateSizes
from .graph import build_knn_graph, format_graph, prune_graph, read_graph
from .metrics import evaluate_thread
from .pipeline import (
    EXIT_CONFIG, EXIT_FAILURE, EXIT_NO_ROOT, EXIT_PROPERTY, STAGES, PipelineError,
    load_structure, report_json, run_pipeline, run_thread,
)
from .proposals import NoiseConfig, evaluate_map, oracle_detect, read_proposals, write_proposals
from .residues import parse_sequence
from .threader import NoRootError, SearchConfig, format_thread, read_thread
from .volume import simulate_density, write_mrc

log = logging.getLogger("aminothread")


def _write_or_print(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load_proposals(path):
    try:
        return read_proposals(path)
    except OSError as exc:
        raise PipelineError("ingest", f"cannot read proposals {path}: {exc.strerror}", 3) from None
    except ValueError as exc:
        raise PipelineError("ingest", f"{path}: {exc}", 3) from None


# -- subcommands -----------------------------------------------------------


def cmd_simulate(args):
    structure = load_structure(args.pdb)
    try:
        vol = simulate_density(structure, args.resolution, args.voxel_size)
    except ValueError as exc:
        raise PipelineError("simulate", str(exc), EXIT_CONFIG) from None
    write_mrc(args.out, vol)
    log.info("wrote %s with shape %s", args.out, vol.shape)
    return 0


def cmd_detect(args):
    structure = load_structure(args.pdb)
    try:
        noise = NoiseConfig(args.jitter, args.size_sigma, args.drop, args.fp_rate, args.confusion,
                            args.atom_sigma, args.seed)
    except ValueError as exc:
        raise PipelineError("detect", str(exc), EXIT_CONFIG) from None
    templates = TemplateSizes.load(args.templates) if args.templates else TemplateSizes.from_structures([structure])
    if args.templates_out:
        templates.save(args.templates_out)
    proposals = oracle_detect(structure, noise, templates)
    write_proposals(args.out, proposals)
    log.info("wrote %d proposals to %s", len(proposals), args.out)
    return 0


def cmd_graph(args):
    proposals = _load_proposals(args.proposals)
    g = build_knn_graph(proposals, args.k)
    if not args.no_prune:
        g = prune_graph(g)
    _write_or_print(args.out, format_graph(g))
    log.info("%d edges, removed fraction %.3f", g.n_edges, g.removed_fraction)
    return 0


def _sequence(args):
    if args.sequence:
        try:
            return parse_sequence(args.sequence)
        except (KeyError, ValueError) as exc:
            raise PipelineError("ingest", f"bad sequence: {exc}", 3) from None
    return load_structure(args.pdb).sequence


def cmd_thread(args):
    proposals = _load_proposals(args.proposals)
    sequence = _sequence(args)
    if args.graph:
        g = read_graph(args.graph, proposals)
    else:
        g = build_knn_graph(proposals, args.k)
        if not args.no_prune:
            g = prune_graph(g)
    try:
        search = SearchConfig(args.c, args.simulations, args.L, args.max_roots, args.dfs_budget, args.seed)
    except ValueError as exc:
        raise PipelineError("thread", str(exc), EXIT_CONFIG) from None
    try:
        result = run_thread(g, sequence, args.algo, search, args.threads)
    except NoRootError as exc:
        raise PipelineError("thread", str(exc), EXIT_NO_ROOT) from None
    result.algo = args.algo + ("-prune" if g.meta.get("pruned") else "")
    _write_or_print(args.out, format_thread(result, proposals, sequence))
    log.info("%s: %d/%d positions assigned in %.2fs", result.algo, result.assigned, len(sequence), result.runtime)
    return 0


def cmd_eval(args):
    proposals = _load_proposals(args.proposals)
    structure = load_structure(args.pdb)
    try:
        _, thread = read_thread(args.thread)
    except (OSError, ValueError) as exc:
        raise PipelineError("eval", f"{args.thread}: {exc}", 3) from None
    report = evaluate_thread(thread, proposals, structure, args.match_radius)
    report.extra["map"] = evaluate_map(proposals, structure, args.map_iou).mean_ap
    report.extra["algo"] = thread.algo
    if args.json:
        sys.stdout.write(report.to_json() + "\n")
    else:
        sys.stdout.write(report.to_text(table=args.table))
    return 0


def cmd_losscheck(args):
    results = checks.run_all(n=args.n, seed=args.seed)
    if args.json:
        payload = [{"name": r.name, "passed": r.passed, "worst": r.worst, "tol": r.tol} for r in results]
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        for r in results:
            print(r.line())
    return 0 if all(r.passed for r in results) else EXIT_PROPERTY


def _overrides(args):
    values = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        values[key.strip()] = value.strip()
    for key, attr in (("io.input", "input"), ("io.outdir", "outdir"), ("seed", "seed"),
                      ("thread.algo", "algo"), ("threads", "threads")):
        v = getattr(args, attr, None)
        if v is not None:
            values[key] = str(v)
    return values


def cmd_run(args):
    cfg = load_config(args.config, _overrides(args))
    result = run_pipeline(cfg, start=args.from_stage)
    if args.json:
        sys.stdout.write(report_json(result) + "\n")
    else:
        sys.stdout.write(result.report.to_text())
    return 0


# -- parser ----------------------------------------------------------------


def _add_search_args(p):
    p.add_argument("--algo", choices=ALGORITHMS, default="mcts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--simulations", type=int, default=None, help="MCTS iterations per root (default 200 * T)")
    p.add_argument("--c", type=float, default=SearchConfig.c, help="UCT exploration constant")
    p.add_argument("--L", type=int, default=3, help="root fragment length")
    p.add_argument("--max-roots", type=int, default=5)
    p.add_argument("--dfs-budget", type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="aminothread", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--threads", type=int, default=None, help="cap on worker processes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a density map from a PDB file")
    p.add_argument("--pdb", help="input structure (default: bundled 50-residue helix)")
    p.add_argument("--out", required=True)
    p.add_argument("--resolution", type=float, default=3.0)
    p.add_argument("--voxel-size", type=float, default=1.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="oracle detection with configurable noise")
    p.add_argument("--pdb")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", type=float, default=0.0, help="center jitter sigma (A)")
    p.add_argument("--size-sigma", type=float, default=0.0)
    p.add_argument("--drop", type=float, default=0.0)
    p.add_argument("--fp-rate", type=float, default=0.0)
    p.add_argument("--confusion", type=float, default=0.0)
    p.add_argument("--atom-sigma", type=float, default=0.0)
    p.add_argument("--templates", help="read template sizes from this file")
    p.add_argument("--templates-out", help="write the template sizes used")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("graph", help="build (and prune) the proposal graph")
    p.add_argument("--proposals", required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--no-prune", action="store_true")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("thread", help="thread a sequence through a proposal file")
    p.add_argument("--proposals", required=True)
    p.add_argument("--graph", help="edge list from 'graph'; built on the fly otherwise")
    p.add_argument("--pdb", help="take the sequence from this structure")
    p.add_argument("--sequence", help="one-letter or space separated three-letter sequence")
    p.add_argument("--out", default="-")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--no-prune", action="store_true")
    _add_search_args(p)
    p.set_defaults(func=cmd_thread)

    p = sub.add_parser("eval", help="coverage, RMSD and mAP against ground truth")
    p.add_argument("--thread", required=True)
    p.add_argument("--proposals", required=True)
    p.add_argument("--pdb")
    p.add_argument("--match-radius", type=float, default=3.0)
    p.add_argument("--map-iou", type=float, default=0.5)
    p.add_argument("--table", action="store_true", help="append the per-position table")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("losscheck", help="gradient and adjoint property checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=100, help="instances per check")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_losscheck)

    p = sub.add_parser("run", help="full pipeline into an output directory")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--input")
    p.add_argument("--outdir")
    p.add_argument("--seed", type=int)
    p.add_argument("--algo", choices=ALGORITHMS)
    p.add_argument("--from-stage", choices=STAGES, default="ingest")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.command != "run":
        args.threads = args.threads or 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: stage=config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, OSError) as exc:
        print(f"error: stage={args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

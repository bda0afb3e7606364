"""End-to-end driver: ingest, simulate, detect, graph, thread, evaluate.

Every stage writes its artifact into ``cfg.outdir`` and downstream stages
read the artifact back from disk, so restarting at any stage reproduces the
single-process run. Files carry no timestamps or timings.
"""

import json
import logging
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from importlib import resources

from .config import ConfigError
from .geometry import TemplateSizes
from .graph import GraphError, build_knn_graph, prune_graph, read_graph, write_graph
from .metrics import evaluate_thread
from .proposals import evaluate_map, oracle_detect, read_proposals, write_proposals
from .threader import NoRootError, dfs_thread, mcts_thread, read_thread, write_thread
from .volume import PdbParseError, StructureError, read_pdb, simulate_density, write_mrc

log = logging.getLogger(__name__)

STAGES = ("ingest", "simulate", "detect", "graph", "thread", "eval")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INGEST = 3
EXIT_NO_ROOT = 4
EXIT_PROPERTY = 5

ARTIFACTS = {
    "simulate": "volume.mrc",
    "templates": "templates.txt",
    "detect": "proposals.txt",
    "graph": "graph.txt",
    "thread": "thread.txt",
    "eval": "eval.txt",
    "eval_json": "eval.json",
}


class PipelineError(RuntimeError):
    def __init__(self, stage, message, code=EXIT_FAILURE):
        super().__init__(f"stage={stage}: {message}")
        self.stage = stage
        self.code = code


@dataclass
class PipelineResult:
    report: object
    mean_ap: float
    paths: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)


def bundled_helix_path():
    return str(resources.files("aminothread") / "data" / "helix50.pdb")


def load_structure(path=None):
    """First chain of ``path`` (the bundled 50-residue helix when ``None``)."""
    path = path or bundled_helix_path()
    if not os.path.exists(path):
        raise PipelineError("ingest", f"input file not found: {path}", EXIT_INGEST)
    try:
        chains = read_pdb(path)
    except (OSError, UnicodeDecodeError, PdbParseError, StructureError) as exc:
        raise PipelineError("ingest", f"{path}: {exc}", EXIT_INGEST) from None
    if not chains:
        raise PipelineError("ingest", f"{path}: no complete standard residues", EXIT_INGEST)
    return chains[0]


def run_thread(graph, sequence, algo, search, workers=1):
    if algo == "mcts":
        return mcts_thread(graph, sequence, search, workers=workers)
    if algo == "dfs-d":
        return dfs_thread(graph, sequence, "distance", search)
    if algo == "dfs-o":
        return dfs_thread(graph, sequence, "overlap", search)
    raise ConfigError(f"unknown algorithm {algo!r}")


@contextmanager
def _stage(name, timings):
    t0 = time.perf_counter()
    log.info("stage %s", name)
    try:
        yield
    finally:
        timings[name] = time.perf_counter() - t0


def run_pipeline(cfg, start="ingest"):
    """Run every stage from ``start`` on; earlier artifacts must already exist in ``cfg.outdir``."""
    if start not in STAGES:
        raise ConfigError(f"unknown stage {start!r}; choose from {', '.join(STAGES)}")
    first = STAGES.index(start)
    os.makedirs(cfg.outdir, exist_ok=True)
    paths = {k: os.path.join(cfg.outdir, v) for k, v in ARTIFACTS.items()}
    timings = {}

    def active(stage):
        return STAGES.index(stage) >= first

    with _stage("ingest", timings):
        structure = load_structure(cfg.input)
    log.info("structure: %d residues, chain %s", len(structure), structure.chain_id)

    if active("simulate"):
        with _stage("simulate", timings):
            try:
                vol = simulate_density(structure, cfg.resolution, cfg.voxel_size)
            except ValueError as exc:
                raise PipelineError("simulate", str(exc)) from None
            write_mrc(paths["simulate"], vol)

    if active("detect"):
        with _stage("detect", timings):
            templates = TemplateSizes.from_structures([structure])
            templates.save(paths["templates"])
            proposals = oracle_detect(structure, cfg.noise_for_run(), templates)
            write_proposals(paths["detect"], proposals)

    proposals = _read_artifact("graph", paths["detect"], read_proposals)
    if active("graph"):
        with _stage("graph", timings):
            try:
                graph = build_knn_graph(proposals, cfg.k)
            except GraphError as exc:
                raise PipelineError("graph", str(exc)) from None
            if cfg.prune:
                graph = prune_graph(graph)
                log.info("pruning removed %.1f%% of edges", 100 * graph.removed_fraction)
            write_graph(paths["graph"], graph)

    if active("thread"):
        graph = _read_artifact("thread", paths["graph"], lambda p: read_graph(p, proposals))
        with _stage("thread", timings):
            try:
                result = run_thread(graph, structure.sequence, cfg.algo, cfg.search_for_run(), cfg.threads)
            except NoRootError as exc:
                raise PipelineError("thread", str(exc), EXIT_NO_ROOT) from None
            result.algo = cfg.algo + ("-prune" if cfg.prune else "")
            write_thread(paths["thread"], result, proposals, structure.sequence)

    _, thread = _read_artifact("eval", paths["thread"], read_thread)
    with _stage("eval", timings):
        report = evaluate_thread(thread, proposals, structure, cfg.match_radius)
        mean_ap = evaluate_map(proposals, structure, cfg.map_iou).mean_ap
        report.extra["map"] = mean_ap
        report.extra["algo"] = thread.algo
        with open(paths["eval"], "w", encoding="utf-8") as fh:
            fh.write(report.to_text(table=True))
        with open(paths["eval_json"], "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    report.runtime = dict(timings)
    return PipelineResult(report, mean_ap, paths, timings)


def _read_artifact(stage, path, reader):
    if not os.path.exists(path):
        raise PipelineError(stage, f"missing upstream artifact {path}", EXIT_INGEST)
    try:
        return reader(path)
    except (ValueError, OSError) as exc:
        raise PipelineError(stage, f"{path}: {exc}", EXIT_INGEST) from None


def report_json(result):
    payload = result.report.to_dict()
    payload["paths"] = result.paths
    return json.dumps(payload, indent=2, sort_keys=True)

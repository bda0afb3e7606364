"""Flat ``section.key = value`` pipeline configuration."""

import dataclasses
from dataclasses import dataclass, field

from .losses import LossConfig
from .proposals import NoiseConfig
from .threader import SearchConfig

ALGORITHMS = ("mcts", "dfs-d", "dfs-o")

# each stage draws from its own stream so a restarted stage reproduces the full run
STAGE_SEED_OFFSETS = {"detect": 1000, "thread": 2000}


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    input: str = None
    outdir: str = "out"
    seed: int = 0
    threads: int = 1
    resolution: float = 3.0
    voxel_size: float = 1.0
    k: int = 8
    prune: bool = True
    algo: str = "mcts"
    match_radius: float = 3.0
    map_iou: float = 0.5
    anchor_iou: float = 0.8
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.resolution <= 0 or self.voxel_size <= 0:
            raise ConfigError("simulate.resolution and simulate.voxel_size must be > 0")
        if self.k < 1:
            raise ConfigError("graph.k must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.algo not in ALGORITHMS:
            raise ConfigError(f"thread.algo must be one of {', '.join(ALGORITHMS)}")
        if self.match_radius < 0:
            raise ConfigError("eval.match_radius must be >= 0")
        for name in ("map_iou", "anchor_iou"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")

    def stage_seed(self, stage):
        return self.seed + STAGE_SEED_OFFSETS[stage]

    def noise_for_run(self):
        return dataclasses.replace(self.noise, seed=self.stage_seed("detect"))

    def search_for_run(self):
        return dataclasses.replace(self.search, seed=self.stage_seed("thread"))


# dotted key -> (attribute path, parser)
def _bool(text):
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text):
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


def _opt_str(text):
    return None if text.strip().lower() in ("", "none") else text.strip()


KEYS = {
    "io.input": (("input",), _opt_str),
    "io.outdir": (("outdir",), str),
    "seed": (("seed",), int),
    "threads": (("threads",), int),
    "simulate.resolution": (("resolution",), float),
    "simulate.voxel_size": (("voxel_size",), float),
    "noise.jitter_sigma": (("noise", "jitter_sigma"), float),
    "noise.size_sigma": (("noise", "size_sigma"), float),
    "noise.drop_rate": (("noise", "drop_rate"), float),
    "noise.fp_rate": (("noise", "fp_rate"), float),
    "noise.class_confusion": (("noise", "class_confusion"), float),
    "noise.atom_sigma": (("noise", "atom_sigma"), float),
    "graph.k": (("k",), int),
    "graph.prune": (("prune",), _bool),
    "thread.algo": (("algo",), str),
    "search.c": (("search", "c"), float),
    "search.n_simulations": (("search", "n_simulations"), _opt_int),
    "search.L": (("search", "L"), int),
    "search.max_roots": (("search", "max_roots"), int),
    "search.dfs_budget": (("search", "dfs_budget"), _opt_int),
    "loss.lam": (("loss", "lam"), float),
    "loss.beta": (("loss", "beta"), float),
    "eval.match_radius": (("match_radius",), float),
    "eval.map_iou": (("map_iou",), float),
    "anchors.iou_threshold": (("anchor_iou",), float),
}


def parse_config_text(text):
    """``{dotted_key: raw string}`` from ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key = key.strip()
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def build_config(values):
    """Apply dotted-key string values over the defaults and validate everything."""
    top, sections = {}, {"noise": {}, "search": {}, "loss": {}}
    for key, raw in values.items():
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        path, parse = KEYS[key]
        try:
            value = parse(raw) if isinstance(raw, str) else raw
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
        if len(path) == 1:
            top[path[0]] = value
        else:
            sections[path[0]][path[1]] = value
    try:
        return PipelineConfig(
            noise=NoiseConfig(**sections["noise"]),
            search=SearchConfig(**sections["search"]),
            loss=LossConfig(**sections["loss"]),
            **top,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, overrides=None):
    """Read ``path`` (optional) and then apply ``overrides`` (dotted key -> value)."""
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                values.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    values.update(overrides or {})
    return build_config(values)


def dump_config(cfg):
    """Inverse of :func:`parse_config_text`; every known key, in table order."""
    lines = []
    for key, (path, _) in KEYS.items():
        obj = cfg
        for attr in path:
            obj = getattr(obj, attr)
        if isinstance(obj, bool):
            text = "true" if obj else "false"
        elif obj is None:
            text = "none"
        else:
            text = repr(obj) if isinstance(obj, float) else str(obj)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"

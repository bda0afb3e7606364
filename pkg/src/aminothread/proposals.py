"""Noisy oracle detector, proposal files and VOC-style mAP."""

import io
from dataclasses import dataclass, field

import numpy as np

from .geometry import Box3, TemplateSizes, boxes_to_array, iou_matrix
from .residues import NUM_CLASSES

MATCH_TOL = 1e-12


@dataclass
class Proposal:
    box: Box3
    class_probs: np.ndarray
    score: float
    atoms: np.ndarray = None
    atom_names: tuple = ()
    source: int = None

    def __post_init__(self):
        self.class_probs = np.asarray(self.class_probs, dtype=np.float64)
        if self.class_probs.shape != (NUM_CLASSES,):
            raise ValueError(f"class_probs must have {NUM_CLASSES} entries")
        if abs(self.class_probs.sum() - 1.0) > 1e-9 or np.any(self.class_probs < 0):
            raise ValueError("class_probs must lie on the probability simplex")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        if self.atoms is not None:
            self.atoms = np.asarray(self.atoms, dtype=np.float64).reshape(-1, 3)
            self.atom_names = tuple(self.atom_names)
            if len(self.atom_names) != len(self.atoms):
                raise ValueError("atom names and coordinates differ in length")

    @property
    def class_id(self):
        return int(np.argmax(self.class_probs))

    @property
    def center(self):
        return self.box.center

    def matches(self, cls):
        """True when ``cls`` attains the maximum class probability (ties all match)."""
        return bool(self.class_probs[cls] >= self.class_probs.max() - MATCH_TOL)

    def atom(self, name):
        if self.atoms is None or name not in self.atom_names:
            return None
        return self.atoms[self.atom_names.index(name)]


def match_matrix(proposals):
    """``(n, 20)`` boolean table of which classes each proposal may stand for."""
    if not proposals:
        return np.zeros((0, NUM_CLASSES), dtype=bool)
    probs = np.stack([p.class_probs for p in proposals])
    return probs >= probs.max(axis=1, keepdims=True) - MATCH_TOL


@dataclass
class NoiseConfig:
    jitter_sigma: float = 0.0
    size_sigma: float = 0.0
    drop_rate: float = 0.0
    fp_rate: float = 0.0
    class_confusion: float = 0.0
    atom_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.jitter_sigma < 0 or self.size_sigma < 0 or self.atom_sigma < 0:
            raise ValueError("noise sigmas must be >= 0")
        if not 0 <= self.drop_rate < 1:
            raise ValueError("drop_rate must lie in [0, 1)")
        if self.fp_rate < 0:
            raise ValueError("fp_rate must be >= 0")
        if not 0 <= self.class_confusion < 1:
            raise ValueError("class_confusion must lie in [0, 1)")


def oracle_detect(structure, cfg=None, templates=None):
    """Simulate a detector from ground truth.

    Every residue survives with probability ``1 - drop_rate``; its box center
    is jittered, its extents perturbed (but kept above the class template),
    and its atoms copied with optional independent noise. ``floor(fp_rate * T)``
    false positives with uniform class probabilities and scores in
    ``[0.05, 0.5]`` are added, then the list is shuffled.
    """
    cfg = cfg or NoiseConfig()
    if len(structure) == 0:
        raise ValueError("cannot detect on an empty structure")
    if templates is None:
        templates = TemplateSizes.from_structures([structure])
    rng = np.random.default_rng(cfg.seed)
    T = len(structure)
    out = []
    cc = cfg.class_confusion
    for t, res in enumerate(structure.residues):
        keep = rng.random() >= cfg.drop_rate
        shift = rng.normal(0.0, 1.0, 3) * cfg.jitter_sigma
        dsize = rng.normal(0.0, 1.0, 3) * cfg.size_sigma
        datoms = rng.normal(0.0, 1.0, res.coords.shape) * cfg.atom_sigma
        dscore = rng.uniform(-0.5, 0.5) * cc
        if not keep:
            continue
        gt = res.gt_box
        floor = templates[res.class_id] + 1e-3
        size = np.maximum(gt.size + dsize, floor)
        box = Box3.from_center(gt.center + shift, size) if (cfg.jitter_sigma or cfg.size_sigma) else gt
        probs = np.full(NUM_CLASSES, cc / (NUM_CLASSES - 1))
        probs[res.class_id] = 1.0 - cc
        score = float(np.clip(1.0 - cc + dscore, 0.0, 1.0))
        out.append(Proposal(box, probs, score, res.coords + datoms, res.atom_names, t))

    n_fp = int(np.floor(cfg.fp_rate * T))
    if n_fp:
        boxes = structure.gt_boxes()
        lo = boxes[:, :3].min(axis=0)
        hi = (boxes[:, :3] + boxes[:, 3:]).max(axis=0)
        uniform = np.full(NUM_CLASSES, 1.0 / NUM_CLASSES)
        for _ in range(n_fp):
            center = rng.uniform(lo, hi)
            size = boxes[rng.integers(T), 3:]
            score = float(rng.uniform(0.05, 0.5))
            out.append(Proposal(Box3.from_center(center, size), uniform.copy(), score))
    order = rng.permutation(len(out))
    return [out[i] for i in order]


# -- serialization -----------------------------------------------------


def _num(v):
    # shortest repr that reads back to the same double
    return repr(float(v))


def format_proposals(proposals):
    """One line per proposal: ``idx class_id x y z w h l score p_0..p_19``.

    Proposals carrying atoms append ``atoms <n>`` and ``name x y z`` for each
    atom, so bond classification survives a round trip through the file.
    """
    buf = io.StringIO()
    for i, p in enumerate(proposals):
        fields = [str(i), str(p.class_id)]
        fields += [_num(v) for v in p.box.as_array()]
        fields.append(_num(p.score))
        fields += [_num(v) for v in p.class_probs]
        if p.atoms is not None:
            fields += ["atoms", str(len(p.atoms))]
            for name, xyz in zip(p.atom_names, p.atoms):
                fields.append(name)
                fields += [_num(v) for v in xyz]
        buf.write(" ".join(fields) + "\n")
    return buf.getvalue()


def parse_proposals(text):
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        if len(tok) < 9 + NUM_CLASSES:
            raise ValueError(f"line {lineno}: expected at least {9 + NUM_CLASSES} fields, got {len(tok)}")
        box = Box3(*(float(v) for v in tok[2:8]))
        score = float(tok[8])
        probs = np.array([float(v) for v in tok[9:9 + NUM_CLASSES]])
        atoms, names = None, ()
        rest = tok[9 + NUM_CLASSES:]
        if rest:
            if rest[0] != "atoms":
                raise ValueError(f"line {lineno}: unexpected trailing field {rest[0]!r}")
            n = int(rest[1])
            body = rest[2:]
            if len(body) != 4 * n:
                raise ValueError(f"line {lineno}: atom block has {len(body)} tokens, expected {4 * n}")
            names = tuple(body[0::4])
            atoms = np.array([[float(body[4 * a + d]) for d in (1, 2, 3)] for a in range(n)])
        out.append(Proposal(box, probs, score, atoms, names))
    return out


def write_proposals(path, proposals):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_proposals(proposals))


def read_proposals(path):
    with open(path, encoding="utf-8") as fh:
        return parse_proposals(fh.read())


# -- mAP ---------------------------------------------------------------


@dataclass
class MapReport:
    ap: dict = field(default_factory=dict)  # class id -> AP
    mean_ap: float = 0.0


def average_precision(tp, n_gt):
    """All-points interpolated area under the precision/recall curve."""
    if n_gt == 0:
        return 0.0
    tp = np.asarray(tp, dtype=np.float64)
    if len(tp) == 0:
        return 0.0
    ctp = np.cumsum(tp)
    cfp = np.cumsum(1.0 - tp)
    rec = ctp / n_gt
    prec = ctp / (ctp + cfp)
    mrec = np.concatenate([[0.0], rec, [1.0]])
    mpre = np.concatenate([[0.0], prec, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    i = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[i + 1] - mrec[i]) * mpre[i + 1]))


def evaluate_map(proposals, structure, iou_threshold=0.5):
    """Per-class AP with greedy score-ordered matching at IoU > ``iou_threshold``."""
    gt_boxes = structure.gt_boxes()
    gt_cls = np.array(structure.sequence)
    report = MapReport()
    pred_cls = np.array([p.class_id for p in proposals], dtype=np.int64)
    for c in sorted(set(gt_cls.tolist())):
        g = gt_boxes[gt_cls == c]
        idx = np.flatnonzero(pred_cls == c)
        if len(idx) == 0:
            report.ap[c] = 0.0
            continue
        scores = np.array([proposals[i].score for i in idx])
        order = idx[np.argsort(-scores, kind="stable")]
        ious = iou_matrix(boxes_to_array([proposals[i].box for i in order]), g)
        taken = np.zeros(len(g), dtype=bool)
        tp = np.zeros(len(order))
        for r in range(len(order)):
            cand = np.where(taken, -1.0, ious[r])
            j = int(np.argmax(cand))
            if cand[j] > iou_threshold:
                taken[j] = True
                tp[r] = 1.0
        report.ap[c] = average_precision(tp, len(g))
    report.mean_ap = float(np.mean(list(report.ap.values()))) if report.ap else 0.0
    return report

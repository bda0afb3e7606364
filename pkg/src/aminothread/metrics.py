"""Coverage and RMSD of a thread against the ground-truth chain."""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

DEFAULT_MATCH_RADIUS = 3.0


@dataclass
class EvalReport:
    coverage: float
    rmsd: float  # None when nothing is covered
    covered: list = field(default_factory=list)  # per-position flags
    distances: list = field(default_factory=list)  # center offset, None when unassigned
    runtime: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def n_covered(self):
        return int(sum(self.covered))

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self, table=False):
        lines = [f"coverage = {self.coverage:.6f}"]
        lines.append("rmsd = " + ("nan" if self.rmsd is None else f"{self.rmsd:.6f}"))
        lines.append(f"covered = {self.n_covered}/{len(self.covered)}")
        for k in sorted(self.extra):
            v = self.extra[k]
            lines.append(f"{k} = {v:.6f}" if isinstance(v, float) else f"{k} = {v}")
        for k in sorted(self.runtime):
            lines.append(f"runtime.{k} = {self.runtime[k]:.3f}")
        if table:
            lines.append("# position covered distance")
            for t, (c, d) in enumerate(zip(self.covered, self.distances)):
                lines.append(f"{t} {int(c)} " + ("-" if d is None else f"{d:.6f}"))
        return "\n".join(lines) + "\n"


def evaluate_thread(result, proposals, gt, match_radius=DEFAULT_MATCH_RADIUS):
    """Score ``result`` (a ThreadResult over ``proposals``) against structure ``gt``.

    A position counts as covered when it is assigned, the proposal's class
    argmax set contains the true class, and its box center lies within
    ``match_radius`` Angstrom of the true box center. RMSD is taken over the
    covered centers.
    """
    if match_radius < 0:
        raise ValueError("match_radius must be >= 0")
    T = len(gt)
    path = list(result.path)[:T] + [None] * max(0, T - len(result.path))
    gt_centers = gt.centers()
    covered, dists = [], []
    for t, idx in enumerate(path):
        if idx is None:
            covered.append(False)
            dists.append(None)
            continue
        p = proposals[idx]
        d = float(np.linalg.norm(p.center - gt_centers[t]))
        dists.append(d)
        covered.append(bool(p.matches(gt.sequence[t]) and d <= match_radius))
    sq = [d * d for c, d in zip(covered, dists) if c]
    coverage = len(sq) / T if T else 0.0
    rmsd = float(np.sqrt(np.mean(sq))) if sq else None
    return EvalReport(coverage, rmsd, covered, dists)

"""Detection and pose losses with analytic gradients.

All losses return ``(value, grad)`` where ``grad`` has the shape of the
differentiated input (or is a dict of such arrays for multi-input losses).
"""

from dataclasses import dataclass

import numpy as np


class LossDomainError(ValueError):
    pass


class HeatmapError(ValueError):
    pass


@dataclass(frozen=True)
class LossConfig:
    lam: float = 2.0
    beta: float = 1.0
    n_cls: float = None  # defaults to the number of anchors
    n_reg: float = None  # defaults to the number of positive anchors

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        for name in ("n_cls", "n_reg"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")


# -- neighbor loss -----------------------------------------------------


def neighbor_loss(p, m, lam=2.0):
    """Elementwise ``-((1 - p)**lam * m + 1) * log(p)`` and its derivative in ``p``."""
    p = np.asarray(p, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if np.any(p <= 0) or np.any(p > 1):
        raise LossDomainError("neighbor loss needs p in (0, 1]")
    q = 1.0 - p
    weight = q**lam * m + 1.0
    # d/dp (1-p)**lam = -lam (1-p)**(lam-1); zero when lam == 0 or m == 0
    if lam == 0:
        dweight = np.zeros_like(p)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            dweight = np.where(m != 0, -lam * q ** (lam - 1.0) * m, 0.0)
    logp = np.log(p)
    value = -weight * logp
    with np.errstate(invalid="ignore"):
        grad = -(dweight * logp) - weight / p
    # at p == 1 the log factor vanishes; (1-p)**(lam-1) may be infinite for lam < 1
    grad = np.where(p == 1.0, -weight, grad)
    return value, grad


def mine_neighbors(anchors, labels, structure):
    """Flag positive anchors that lie closer to a chain neighbour of their ground truth
    than the two neighbours are to each other.

    ``anchors`` is an ``(n, 6)`` box array, ``labels`` the per-anchor ground
    truth index (``-1`` for negatives). For a chain end the single neighbour
    is used and the bound is that neighbour's distance to the residue itself.
    """
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 6)
    labels = np.asarray(labels, dtype=np.int64)
    centers = structure.centers()
    T = len(centers)
    ac = anchors[:, :3] + anchors[:, 3:] / 2
    m = np.zeros(len(anchors), dtype=np.int8)
    for i in np.flatnonzero(labels >= 0):
        t = int(labels[i])
        nbrs = [n for n in (t - 1, t + 1) if 0 <= n < T]
        if not nbrs:
            continue
        if len(nbrs) == 2:
            bound = np.linalg.norm(centers[nbrs[0]] - centers[nbrs[1]])
        else:
            bound = np.linalg.norm(centers[t] - centers[nbrs[0]])
        if any(np.linalg.norm(ac[i] - centers[n]) < bound for n in nbrs):
            m[i] = 1
    return m


# -- regression --------------------------------------------------------


def smooth_l1(x):
    """Summed smooth-L1 (Huber, delta 1) and its gradient."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    quad = ax < 1.0
    value = np.where(quad, 0.5 * x * x, ax - 0.5).sum()
    grad = np.where(quad, x, np.sign(x))
    return float(value), grad


@dataclass
class DetectionTargets:
    """Per-anchor supervision: ``labels`` index the column of ``cls_probs`` holding the
    probability of the correct outcome (a class for positives, background otherwise)."""

    labels: np.ndarray
    positive: np.ndarray
    u_star: np.ndarray
    v_star: np.ndarray


def detection_loss(cls_probs, neighbor_labels, reg_u, reg_v, targets, cfg=LossConfig()):
    """Neighbor-weighted classification plus gated smooth-L1 regression.

    ``loss = sum_i L_nb(p_i) / N_cls + beta * sum_j p*_j (L1s(u_j - u*_j) + L1s(v_j - v*_j)) / N_reg``

    Returns ``(value, {"cls_probs": ..., "reg_u": ..., "reg_v": ...})``.
    """
    probs = np.asarray(cls_probs, dtype=np.float64)
    n = probs.shape[0]
    labels = np.asarray(targets.labels, dtype=np.int64)
    pos = np.asarray(targets.positive, dtype=bool)
    m = np.asarray(neighbor_labels)
    reg_u = np.asarray(reg_u, dtype=np.float64)
    reg_v = np.asarray(reg_v, dtype=np.float64)
    for name, arr, shape in (
        ("labels", labels, (n,)), ("positive", pos, (n,)), ("neighbor_labels", m, (n,)),
        ("reg_u", reg_u, (n, 3)), ("reg_v", reg_v, (n, 3)),
        ("u_star", np.asarray(targets.u_star), (n, 3)), ("v_star", np.asarray(targets.v_star), (n, 3)),
    ):
        if arr.shape != shape:
            raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")

    n_cls = cfg.n_cls if cfg.n_cls is not None else max(n, 1)
    n_reg = cfg.n_reg if cfg.n_reg is not None else max(int(pos.sum()), 1)

    rows = np.arange(n)
    p = probs[rows, labels]
    cls_val, dp = neighbor_loss(p, m, cfg.lam)
    g_probs = np.zeros_like(probs)
    g_probs[rows, labels] = dp / n_cls
    value = cls_val.sum() / n_cls

    gate = pos.astype(np.float64)[:, None]
    du = (reg_u - targets.u_star) * gate
    dv = (reg_v - targets.v_star) * gate
    lu, gu = smooth_l1(du)
    lv, gv = smooth_l1(dv)
    scale = cfg.beta / n_reg
    value += scale * (lu + lv)
    return float(value), {"cls_probs": g_probs, "reg_u": scale * gu * gate, "reg_v": scale * gv * gate}


# -- pose heatmaps -----------------------------------------------------


@dataclass(frozen=True)
class HeatmapGrid:
    """Voxel frame of a heatmap: voxel ``v`` is centred at ``origin + v * voxel_size``."""

    shape: tuple
    origin: tuple = (0.0, 0.0, 0.0)
    voxel_size: float = 1.0

    def to_voxel(self, xyz):
        return (np.asarray(xyz, dtype=np.float64) - np.asarray(self.origin)) / self.voxel_size

    def to_world(self, ijk):
        return np.asarray(self.origin) + np.asarray(ijk, dtype=np.float64) * self.voxel_size


def encode_heatmap(atoms, grid, names=None):
    """One channel per atom with ones on the 2x2x2 voxels around the atom."""
    atoms = np.asarray(atoms, dtype=np.float64).reshape(-1, 3)
    shape = tuple(int(s) for s in grid.shape)
    out = np.zeros((len(atoms),) + shape, dtype=np.float32)
    for n, xyz in enumerate(atoms):
        base = np.floor(grid.to_voxel(xyz)).astype(np.int64)
        if np.any(base < 0) or np.any(base + 1 >= np.array(shape)):
            label = names[n] if names is not None else f"#{n}"
            raise HeatmapError(f"atom {label} at {tuple(np.round(xyz, 3))} falls outside the heatmap grid")
        i, j, k = base
        out[n, i:i + 2, j:j + 2, k:k + 2] = 1.0
    return out


def decode_heatmap(channel, grid):
    """Value-weighted centroid of the 8 strongest voxels, in Angstrom."""
    channel = np.asarray(channel, dtype=np.float64)
    flat = channel.ravel()
    if not np.any(flat > 0):
        raise HeatmapError("cannot decode an all-zero heatmap channel")
    top = np.argsort(-flat, kind="stable")[:8]
    w = np.clip(flat[top], 0.0, None)
    ijk = np.stack(np.unravel_index(top, channel.shape), axis=1).astype(np.float64)
    centroid = (w[:, None] * ijk).sum(axis=0) / w.sum()
    return grid.to_world(centroid)


def pose_loss(pred, target):
    """Summed squared error over stacks, channels and voxels; gradient w.r.t. ``pred``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"pred shape {pred.shape} does not match target {target.shape}")
    diff = pred - target
    return float(np.sum(diff * diff)), 2.0 * diff

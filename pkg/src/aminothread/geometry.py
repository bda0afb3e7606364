"""Axis-aligned 3D boxes, IoU, anchors and residual box encoding.

Boxes are stored as ``(x, y, z, w, h, l)``: the minimum ("front left top")
corner followed by the extents along x, y and z, all in Angstrom.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .residues import AMINO_ACIDS, NUM_CLASSES, class_id


class GeometryDomainError(ValueError):
    """A residual encoding would take the log of a non-positive number."""

    def __init__(self, axis, value):
        super().__init__(f"log argument on axis {axis!r} is {value:.6g} (must be > 0)")
        self.axis = axis
        self.value = value


@dataclass(frozen=True)
class Box3:
    x: float
    y: float
    z: float
    w: float
    h: float
    l: float

    def __post_init__(self):
        vals = (self.x, self.y, self.z, self.w, self.h, self.l)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box field in {vals}")
        if min(self.w, self.h, self.l) <= 0:
            raise ValueError(f"box extents must be positive, got {(self.w, self.h, self.l)}")

    @classmethod
    def from_array(cls, arr):
        return cls(*(float(v) for v in arr))

    @classmethod
    def from_center(cls, center, size):
        cx, cy, cz = (float(c) for c in center)
        w, h, l = (float(s) for s in size)
        return cls(cx - w / 2, cy - h / 2, cz - l / 2, w, h, l)

    @classmethod
    def bounding(cls, points):
        """Tight axis-aligned bound of an ``(n, 3)`` point set."""
        pts = np.asarray(points, dtype=np.float64)
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        return cls(*lo, *(hi - lo))

    def as_array(self):
        return np.array([self.x, self.y, self.z, self.w, self.h, self.l], dtype=np.float64)

    @property
    def corner(self):
        return np.array([self.x, self.y, self.z])

    @property
    def size(self):
        return np.array([self.w, self.h, self.l])

    @property
    def center(self):
        return self.corner + self.size / 2

    @property
    def volume(self):
        return self.w * self.h * self.l


def boxes_to_array(boxes):
    if len(boxes) == 0:
        return np.zeros((0, 6))
    return np.stack([b.as_array() for b in boxes])


def iou(a, b):
    """Intersection over union of two boxes."""
    a_lo, a_hi = a.corner, a.corner + a.size
    b_lo, b_hi = b.corner, b.corner + b.size
    inter = float(np.prod(np.clip(np.minimum(a_hi, b_hi) - np.maximum(a_lo, b_lo), 0.0, None)))
    if inter == 0.0:
        return 0.0
    # volumes from the same rounded extents as the overlap, so iou(a, a) == 1 exactly
    va = float(np.prod(a_hi - a_lo))
    vb = float(np.prod(b_hi - b_lo))
    return min(inter / (va + vb - inter), 1.0)


def iou_matrix(boxes_a, boxes_b):
    """Pairwise IoU between two ``(n, 6)`` / ``(m, 6)`` box arrays."""
    a = np.ascontiguousarray(boxes_a, dtype=np.float64).reshape(-1, 6)
    b = np.ascontiguousarray(boxes_b, dtype=np.float64).reshape(-1, 6)
    return kernels.iou_matrix(a, b)


# -- template sizes -------------------------------------------------------


class TemplateSizes:
    """Per-class reference extents ``(w^c, h^c, l^c)`` used by the size residuals."""

    def __init__(self, extents):
        extents = np.asarray(extents, dtype=np.float64)
        if extents.shape != (NUM_CLASSES, 3):
            raise ValueError(f"expected ({NUM_CLASSES}, 3) extents, got {extents.shape}")
        if not np.all(np.isfinite(extents)) or np.any(extents <= 0):
            raise ValueError("template extents must be finite and positive")
        self.extents = extents

    def __getitem__(self, cls):
        if isinstance(cls, str):
            cls = class_id(cls)
        return self.extents[int(cls)]

    def __eq__(self, other):
        return isinstance(other, TemplateSizes) and np.array_equal(self.extents, other.extents)

    @classmethod
    def from_structures(cls, structures, fraction=0.5, fallback=1.0):
        """Derive templates as ``fraction`` times the smallest observed extent per class.

        Using a fraction of the per-class minimum keeps every training box
        strictly larger than its template, so the log residuals are defined.
        Classes absent from the data get ``fallback`` on every axis.
        """
        if not 0 < fraction < 1:
            raise ValueError("fraction must lie in (0, 1)")
        mins = np.full((NUM_CLASSES, 3), np.inf)
        for s in structures:
            for res in s.residues:
                mins[res.class_id] = np.minimum(mins[res.class_id], res.gt_box.size)
        out = np.where(np.isfinite(mins), mins * fraction, fallback)
        return cls(out)

    def dumps(self):
        lines = []
        for name, (w, h, l) in zip(AMINO_ACIDS, self.extents):
            lines.append(f"{name} {w:.6f} {h:.6f} {l:.6f}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        extents = np.full((NUM_CLASSES, 3), np.nan)
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"line {lineno}: expected '<CODE> <w> <h> <l>', got {line!r}")
            extents[class_id(parts[0])] = [float(p) for p in parts[1:]]
        missing = [AMINO_ACIDS[i] for i in range(NUM_CLASSES) if np.isnan(extents[i, 0])]
        if missing:
            raise ValueError(f"template file missing classes: {', '.join(missing)}")
        return cls(extents)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


# -- residual parameterization -------------------------------------------


@dataclass(frozen=True)
class ResidualVec:
    u: tuple  # (dx, dy, dz), corner offsets in units of anchor extent
    v: tuple  # (dw, dh, dl), log-space size residuals

    def as_array(self):
        return np.array([*self.u, *self.v], dtype=np.float64)

    @classmethod
    def from_array(cls, arr):
        arr = [float(a) for a in arr]
        return cls(tuple(arr[:3]), tuple(arr[3:]))


def encode_residuals(gt, anchor, template):
    """Regression targets of ``gt`` relative to ``anchor`` and a class template.

    ``dx = (x_g - x_a) / w_a`` for the corner, and
    ``dw = log((w_g - w_c) / w_a)`` for the size, likewise for the other axes.
    """
    template = np.asarray(template, dtype=np.float64)
    g, a = gt.as_array(), anchor.as_array()
    u = (g[:3] - a[:3]) / a[3:]
    diff = g[3:] - template
    for axis, d in zip("whl", diff):
        if not d > 0:
            raise GeometryDomainError(axis, float(d))
    v = np.log(diff / a[3:])
    return ResidualVec(tuple(u.tolist()), tuple(v.tolist()))


def decode_residuals(res, anchor, template):
    """Inverse of :func:`encode_residuals`."""
    template = np.asarray(template, dtype=np.float64)
    r = res.as_array()
    a = anchor.as_array()
    corner = a[:3] + r[:3] * a[3:]
    size = template + a[3:] * np.exp(r[3:])
    return Box3(*corner, *size)


def encode_residuals_array(gt, anchors, templates):
    """Vectorized encoding for ``(n, 6)`` arrays; ``templates`` is ``(n, 3)``."""
    gt = np.asarray(gt, dtype=np.float64)
    anchors = np.asarray(anchors, dtype=np.float64)
    diff = gt[:, 3:] - templates
    if np.any(diff <= 0):
        i, j = np.argwhere(diff <= 0)[0]
        raise GeometryDomainError("whl"[j], float(diff[i, j]))
    u = (gt[:, :3] - anchors[:, :3]) / anchors[:, 3:]
    v = np.log(diff / anchors[:, 3:])
    return np.hstack([u, v])


def decode_residuals_array(res, anchors, templates):
    res = np.asarray(res, dtype=np.float64)
    anchors = np.asarray(anchors, dtype=np.float64)
    corner = anchors[:, :3] + res[:, :3] * anchors[:, 3:]
    size = templates + anchors[:, 3:] * np.exp(res[:, 3:])
    return np.hstack([corner, size])


# -- anchors --------------------------------------------------------------

DEFAULT_ASPECT_RATIOS = (
    (1, 1, 1), (2, 1, 1), (1, 2, 1), (1, 1, 2), (2, 2, 1), (2, 1, 2), (1, 2, 2),
)
DEFAULT_SCALES = (4.0, 6.0, 8.0)


@dataclass(frozen=True)
class AnchorConfig:
    aspect_ratios: tuple = DEFAULT_ASPECT_RATIOS
    scales: tuple = DEFAULT_SCALES
    stride: int = 4

    def __post_init__(self):
        if len(self.aspect_ratios) != 7:
            raise ValueError(f"need 7 aspect ratios, got {len(self.aspect_ratios)}")
        if len(self.scales) != 3:
            raise ValueError(f"need 3 scales, got {len(self.scales)}")
        if any(min(r) <= 0 for r in self.aspect_ratios) or min(self.scales) <= 0:
            raise ValueError("aspect ratios and scales must be positive")
        if int(self.stride) < 1:
            raise ValueError("stride must be >= 1")

    @property
    def k(self):
        return len(self.aspect_ratios) * len(self.scales)

    def shapes(self):
        """``(k, 3)`` anchor extents, scale-major then aspect ratio.

        Each ratio triple is normalized to unit geometric mean so that every
        anchor of a given scale has volume ``scale**3``.
        """
        out = []
        for s in self.scales:
            for r in self.aspect_ratios:
                r = np.asarray(r, dtype=np.float64)
                out.append(s * r / np.cbrt(np.prod(r)))
        return np.array(out)


def anchor_array(volume_shape, cfg=AnchorConfig(), voxel_size=1.0, origin=(0.0, 0.0, 0.0)):
    """Anchors as a ``(positions * k, 6)`` array.

    Positions are the centers of ``stride``-sized cells tiling the volume;
    order is position-major (x slowest), then scale, then aspect ratio.
    """
    shape = tuple(int(n) for n in volume_shape)
    if len(shape) != 3 or min(shape) < 1:
        raise ValueError(f"volume shape must be three positive ints, got {volume_shape}")
    stride = int(cfg.stride)
    axes = [(np.arange(math.ceil(n / stride)) + 0.5) * stride for n in shape]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    centers = np.asarray(origin, dtype=np.float64) + grid * float(voxel_size)
    shapes = cfg.shapes()
    c = np.repeat(centers, len(shapes), axis=0)
    s = np.tile(shapes, (len(centers), 1))
    return np.hstack([c - s / 2, s])


def generate_anchors(volume_shape, cfg=AnchorConfig(), voxel_size=1.0, origin=(0.0, 0.0, 0.0)):
    return [Box3.from_array(row) for row in anchor_array(volume_shape, cfg, voxel_size, origin)]


def assign_anchor_labels(anchors, gts, threshold=0.8):
    """Per-anchor ground-truth index, or -1 for negatives.

    An anchor is positive when its best IoU with any ground truth is strictly
    greater than ``threshold``; ties go to the lowest ground-truth index.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    a = anchors if isinstance(anchors, np.ndarray) else boxes_to_array(anchors)
    g = gts if isinstance(gts, np.ndarray) else boxes_to_array(gts)
    if len(a) == 0:
        return np.zeros(0, dtype=np.int64)
    if len(g) == 0:
        return np.full(len(a), -1, dtype=np.int64)
    ious = iou_matrix(a, g)
    best = np.argmax(ious, axis=1)
    best_iou = ious[np.arange(len(a)), best]
    return np.where(best_iou > threshold, best, -1).astype(np.int64)

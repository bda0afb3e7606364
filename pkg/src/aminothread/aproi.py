"""Aspect-ratio preserving RoI extraction.

Each RoI is copied into a fixed ``W_T x H_T x L_T`` grid without resampling.
Smaller RoIs are centered and zero padded; larger ones are center cropped.
The backward pass routes gradients only to the input voxels that were
copied, so it is the exact adjoint of the forward pass.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AproiConfig:
    target: tuple = (16, 16, 16)

    def __post_init__(self):
        t = tuple(int(v) for v in self.target)
        if len(t) != 3 or min(t) < 1:
            raise ValueError(f"target must be three ints >= 1, got {self.target}")
        object.__setattr__(self, "target", t)


@dataclass(frozen=True)
class Roi:
    corner: tuple
    size: tuple

    def __post_init__(self):
        c = tuple(int(v) for v in self.corner)
        s = tuple(int(v) for v in self.size)
        if len(c) != 3 or len(s) != 3 or min(s) < 1:
            raise ValueError(f"invalid RoI corner={self.corner} size={self.size}")
        object.__setattr__(self, "corner", c)
        object.__setattr__(self, "size", s)

    @classmethod
    def from_box(cls, box, volume):
        """Snap an Angstrom box onto ``volume``'s voxel grid (corner down, far face up)."""
        lo = volume.world_to_voxel(box.corner)
        hi = volume.world_to_voxel(box.corner + box.size)
        c = [math.floor(v + 1e-9) for v in lo]
        e = [math.ceil(v - 1e-9) for v in hi]
        return cls(tuple(c), tuple(max(1, b - a) for a, b in zip(c, e)))


def _windows(roi, cfg):
    """Per axis: (dst_start, dst_end, src_offset) inside the RoI."""
    out = []
    for size, target in zip(roi.size, cfg.target):
        start = max(0, (target - size) // 2)
        end = start + min(size, target)
        src = max(0, (size - target) // 2)
        out.append((start, end, src))
    return out


def _slices(roi, cfg, input_shape):
    """Matching (dst, src) slices, clipped to the input bounds, or None if disjoint."""
    dst, src = [], []
    for (start, end, off), c, n in zip(_windows(roi, cfg), roi.corner, input_shape):
        s0 = c + off
        lo = max(s0, 0)
        hi = min(s0 + (end - start), n)
        if lo >= hi:
            return None
        dst.append(slice(start + lo - s0, start + hi - s0))
        src.append(slice(lo, hi))
    return tuple(dst), tuple(src)


def copied_window(roi, cfg):
    """Index ranges ``[(i_s, i_e), (j_s, j_e), (k_s, k_e)]`` written in the output."""
    return [(s, e) for s, e, _ in _windows(roi, cfg)]


def aproi_forward(x, rois, cfg=AproiConfig()):
    data = getattr(x, "data", x)
    data = np.asarray(data)
    if not rois:
        raise ValueError("aproi_forward needs at least one RoI")
    out = np.zeros((len(rois),) + cfg.target, dtype=np.result_type(data.dtype, np.float32))
    for r, roi in enumerate(rois):
        sl = _slices(roi, cfg, data.shape)
        if sl is not None:
            out[(r,) + sl[0]] = data[sl[1]]
    return out


def aproi_backward(grad_out, rois, cfg, input_shape):
    grad_out = np.asarray(grad_out)
    expected = (len(rois),) + cfg.target
    if grad_out.shape != expected:
        raise ValueError(f"grad_out shape {grad_out.shape} does not match {expected}")
    grad_in = np.zeros(tuple(input_shape), dtype=np.result_type(grad_out.dtype, np.float64))
    for r, roi in enumerate(rois):
        sl = _slices(roi, cfg, input_shape)
        if sl is not None:
            grad_in[sl[1]] += grad_out[(r,) + sl[0]]
    return grad_in

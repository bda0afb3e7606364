"""Hot numeric loops.

Every kernel exists twice: a loop version compiled with numba (``*_nb``) and
a vectorized numpy version (``*_np``). The public name dispatches to the
numba version when numba is importable and not disabled through
``AMINOTHREAD_DISABLE_NUMBA``. Both versions are tested against each other.
"""

import numpy as np

from ._accel import HAVE_NUMBA, njit

# -- pairwise IoU -------------------------------------------------------


@njit
def iou_matrix_nb(a, b):
    n, m = a.shape[0], b.shape[0]
    out = np.zeros((n, m))
    for i in range(n):
        # rounded extents (x + w) - x, the same ones the overlap sees
        va = 1.0
        for d in range(3):
            va *= (a[i, d] + a[i, d + 3]) - a[i, d]
        for j in range(m):
            inter = 1.0
            for d in range(3):
                lo = max(a[i, d], b[j, d])
                hi = min(a[i, d] + a[i, d + 3], b[j, d] + b[j, d + 3])
                if hi <= lo:
                    inter = 0.0
                    break
                inter *= hi - lo
            if inter > 0.0:
                vb = 1.0
                for d in range(3):
                    vb *= (b[j, d] + b[j, d + 3]) - b[j, d]
                out[i, j] = min(inter / (va + vb - inter), 1.0)
    return out


def iou_matrix_np(a, b):
    lo = np.maximum(a[:, None, :3], b[None, :, :3])
    hi = np.minimum(a[:, None, :3] + a[:, None, 3:], b[None, :, :3] + b[None, :, 3:])
    inter = np.prod(np.clip(hi - lo, 0.0, None), axis=-1)
    # volumes from the rounded extents (x + w) - x, matching the overlap term
    va = np.prod((a[:, :3] + a[:, 3:]) - a[:, :3], axis=-1)[:, None]
    vb = np.prod((b[:, :3] + b[:, 3:]) - b[:, :3], axis=-1)[None, :]
    out = np.zeros_like(inter)
    np.divide(inter, va + vb - inter, out=out, where=inter > 0)
    return np.minimum(out, 1.0, out=out)


# -- Gaussian density splatting ------------------------------------------


@njit
def splat_gaussians_nb(coords, amps, sigma, shape, radius):
    """Accumulate isotropic Gaussians; ``coords`` are in voxel units."""
    nx, ny, nz = shape[0], shape[1], shape[2]
    grid = np.zeros((nx, ny, nz))
    inv = 1.0 / (2.0 * sigma * sigma)
    for a in range(coords.shape[0]):
        cx, cy, cz = coords[a, 0], coords[a, 1], coords[a, 2]
        x0 = max(0, int(np.floor(cx - radius)))
        x1 = min(nx, int(np.ceil(cx + radius)) + 1)
        y0 = max(0, int(np.floor(cy - radius)))
        y1 = min(ny, int(np.ceil(cy + radius)) + 1)
        z0 = max(0, int(np.floor(cz - radius)))
        z1 = min(nz, int(np.ceil(cz + radius)) + 1)
        if x0 >= x1 or y0 >= y1 or z0 >= z1:
            continue
        gy = np.empty(y1 - y0)
        for j in range(y0, y1):
            gy[j - y0] = np.exp(-((j - cy) ** 2) * inv)
        gz = np.empty(z1 - z0)
        for k in range(z0, z1):
            gz[k - z0] = np.exp(-((k - cz) ** 2) * inv)
        for i in range(x0, x1):
            gx = amps[a] * np.exp(-((i - cx) ** 2) * inv)
            for j in range(y0, y1):
                gxy = gx * gy[j - y0]
                for k in range(z0, z1):
                    grid[i, j, k] += gxy * gz[k - z0]
    return grid


def splat_gaussians_np(coords, amps, sigma, shape, radius):
    shape = tuple(int(s) for s in shape)
    grid = np.zeros(shape)
    inv = 1.0 / (2.0 * sigma * sigma)
    for (cx, cy, cz), amp in zip(coords, amps):
        bounds = []
        for c, n in zip((cx, cy, cz), shape):
            lo = max(0, int(np.floor(c - radius)))
            hi = min(n, int(np.ceil(c + radius)) + 1)
            bounds.append((lo, hi))
        if any(lo >= hi for lo, hi in bounds):
            continue
        (x0, x1), (y0, y1), (z0, z1) = bounds
        gx = amp * np.exp(-((np.arange(x0, x1) - cx) ** 2) * inv)
        gy = np.exp(-((np.arange(y0, y1) - cy) ** 2) * inv)
        gz = np.exp(-((np.arange(z0, z1) - cz) ** 2) * inv)
        grid[x0:x1, y0:y1, z0:z1] += (gx[:, None] * gy[None, :])[:, :, None] * gz[None, None, :]
    return grid


# -- k nearest neighbours -----------------------------------------------


@njit
def knn_nb(points, k):
    """Indices and distances of the ``k`` nearest other points, ties to lower index."""
    n = points.shape[0]
    kk = min(k, n - 1)
    idx = np.empty((n, kk), dtype=np.int64)
    dist = np.empty((n, kk))
    d2 = np.empty(n)
    for i in range(n):
        for j in range(n):
            dx = points[i, 0] - points[j, 0]
            dy = points[i, 1] - points[j, 1]
            dz = points[i, 2] - points[j, 2]
            d2[j] = dx * dx + dy * dy + dz * dz
        d2[i] = np.inf
        order = np.argsort(d2, kind="mergesort")
        for r in range(kk):
            idx[i, r] = order[r]
            dist[i, r] = np.sqrt(d2[order[r]])
    return idx, dist


def knn_np(points, k):
    n = points.shape[0]
    kk = min(k, n - 1)
    diff = points[:, None, :] - points[None, :, :]
    d2 = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1] + diff[..., 2] * diff[..., 2]
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")[:, :kk]
    return order.astype(np.int64), np.sqrt(np.take_along_axis(d2, order, axis=1))


# -- random rollout over a CSR graph -------------------------------------


@njit
def rollout_nb(indptr, indices, edge_iou, scores, match, seq, start_node, start_pos, used, uniforms, out_path):
    """Extend a partial path by uniformly random legal steps.

    ``match[node, cls]`` says whether ``node`` may stand for class ``cls``;
    ``used`` marks proposals already on the path and is restored on exit.
    Positions are 0-based; the step from position ``t`` to ``t + 1`` adds
    ``(t + 1) * iou + (t + 2) * score[next]`` to the reward. Returns the
    number of nodes written to ``out_path`` and the reward increment.
    """
    T = seq.shape[0]
    node = start_node
    pos = start_pos
    added = 0
    gain = 0.0
    cand = np.empty(indices.shape[0] + 1, dtype=np.int64)
    cedge = np.empty(indices.shape[0] + 1, dtype=np.int64)
    while pos + 1 < T:
        target = seq[pos + 1]
        nc = 0
        for e in range(indptr[node], indptr[node + 1]):
            nb = indices[e]
            if not used[nb] and match[nb, target]:
                cand[nc] = nb
                cedge[nc] = e
                nc += 1
        if nc == 0:
            break
        pick = int(uniforms[added] * nc)
        if pick >= nc:
            pick = nc - 1
        gain += (pos + 1) * edge_iou[cedge[pick]] + (pos + 2) * scores[cand[pick]]
        node = cand[pick]
        used[node] = True
        out_path[added] = node
        added += 1
        pos += 1
    for r in range(added):
        used[out_path[r]] = False
    return added, gain


def rollout_np(indptr, indices, edge_iou, scores, match, seq, start_node, start_pos, used, uniforms, out_path):
    T = len(seq)
    node, pos, added, gain = start_node, start_pos, 0, 0.0
    while pos + 1 < T:
        lo, hi = indptr[node], indptr[node + 1]
        nbrs = indices[lo:hi]
        ok = np.flatnonzero(match[nbrs, seq[pos + 1]] & ~used[nbrs])
        if len(ok) == 0:
            break
        pick = ok[min(int(uniforms[added] * len(ok)), len(ok) - 1)]
        gain += (pos + 1) * edge_iou[lo + pick] + (pos + 2) * scores[nbrs[pick]]
        node = nbrs[pick]
        used[node] = True
        out_path[added] = node
        added += 1
        pos += 1
    used[out_path[:added]] = False
    return added, gain


if HAVE_NUMBA:
    iou_matrix = iou_matrix_nb
    splat_gaussians = splat_gaussians_nb
    knn = knn_nb
    rollout = rollout_nb
else:
    iou_matrix = iou_matrix_np
    splat_gaussians = splat_gaussians_np
    knn = knn_np
    rollout = rollout_np

"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5] [--size medium]

With ``AMINOTHREAD_DISABLE_NUMBA=1`` the ``*_nb`` functions run as plain
Python, which shows what the fallback path costs without numpy vectorization.
"""

import argparse
import time

import numpy as np

from aminothread import kernels
from aminothread._accel import backend
from aminothread.graph import build_knn_graph
from aminothread.proposals import NoiseConfig, match_matrix, oracle_detect
from aminothread.synthetic import helix

SIZES = {"small": 60, "medium": 200, "large": 500}


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n, rng):
    boxes = np.hstack([rng.uniform(0, 40, (n, 3)), rng.uniform(2, 8, (n, 3))])
    points = rng.uniform(0, 60, (n, 3))
    atoms = rng.uniform(6, 40, (20 * n, 3))
    amps = rng.choice([6.0, 7.0, 8.0, 16.0], 20 * n)
    shape = np.array([48, 48, 48], dtype=np.int64)

    s = helix(min(n, 200), seed=1)
    props = oracle_detect(s, NoiseConfig(fp_rate=0.3, seed=2))
    g = build_knn_graph(props, 8)
    indptr, indices = g.csr()
    edge_iou = rng.uniform(0, 0.3, len(indices))
    scores = np.array([p.score for p in props])
    match = match_matrix(props)
    seq = np.asarray(s.sequence, dtype=np.int64)
    used = np.zeros(len(props), dtype=bool)
    uniforms = rng.random(len(seq))
    out = np.empty(len(seq), dtype=np.int64)
    start = next(i for i, p in enumerate(props) if p.source == 0)

    def rollout(fn):
        return lambda: [fn(indptr, indices, edge_iou, scores, match, seq, start, 0, used, uniforms, out)
                        for _ in range(200)]

    return {
        "iou_matrix": (lambda: kernels.iou_matrix_nb(boxes, boxes), lambda: kernels.iou_matrix_np(boxes, boxes)),
        "knn": (lambda: kernels.knn_nb(points, 8), lambda: kernels.knn_np(points, 8)),
        "splat_gaussians": (
            lambda: kernels.splat_gaussians_nb(atoms, amps, 0.675, shape, 3.4),
            lambda: kernels.splat_gaussians_np(atoms, amps, 0.675, shape, 3.4),
        ),
        "rollout x200": (rollout(kernels.rollout_nb), rollout(kernels.rollout_np)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", choices=SIZES, default="medium")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"backend={backend()} size={args.size} (n={SIZES[args.size]}) repeat={args.repeat}")
    print(f"{'kernel':<18}{'numba/loop (ms)':>16}{'numpy (ms)':>12}{'speedup':>9}")
    for name, (nb, np_) in cases(SIZES[args.size], rng).items():
        t_nb = best_of(nb, args.repeat)
        t_np = best_of(np_, args.repeat)
        print(f"{name:<18}{1e3 * t_nb:>16.3f}{1e3 * t_np:>12.3f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()

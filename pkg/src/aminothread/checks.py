"""Finite-difference gradient checks and the RoI adjoint test.

These back the ``losscheck`` subcommand and are reused by the test-suite.
Gradient agreement is measured as ``||g - g_fd|| / max(||g||, ||g_fd||)``.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np

from .aproi import AproiConfig, Roi, aproi_backward, aproi_forward
from .losses import DetectionTargets, LossConfig, detection_loss, neighbor_loss, pose_loss, smooth_l1

log = logging.getLogger(__name__)

FD_STEP = 1e-5
GRAD_TOL = 1e-5
ADJOINT_TOL = 1e-12


@dataclass
class CheckResult:
    name: str
    worst: float
    tol: float
    n: int
    seconds: float

    @property
    def passed(self):
        return bool(self.worst < self.tol)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: worst={self.worst:.3e} tol={self.tol:.0e} n={self.n} ({self.seconds:.2f}s)"


def relative_error(a, b):
    a = np.ravel(np.asarray(a, dtype=np.float64))
    b = np.ravel(np.asarray(b, dtype=np.float64))
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


def numeric_gradient(f, x, h=FD_STEP):
    """Central differences of scalar ``f`` at array ``x`` (not modified)."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def _timed(name, tol, n, fn):
    t0 = time.perf_counter()
    worst = max(fn(i) for i in range(n))
    return CheckResult(name, worst, tol, n, time.perf_counter() - t0)


# -- instances ------------------------------------------------------


def random_rois(rng, shape, count):
    rois = []
    for _ in range(count):
        size = tuple(int(rng.integers(1, s + 3)) for s in shape)
        corner = tuple(int(rng.integers(-2, s)) for s in shape)
        rois.append(Roi(corner, size))
    return rois


def random_detection_case(rng, n=None, k=21):
    n = n or int(rng.integers(4, 24))
    probs = rng.uniform(0.05, 0.95, (n, k))
    labels = rng.integers(0, k, n)
    positive = rng.random(n) < 0.5
    m = (rng.random(n) < 0.5).astype(np.int8) * positive
    targets = DetectionTargets(labels, positive, rng.normal(0, 0.5, (n, 3)), rng.normal(0, 0.5, (n, 3)))
    reg_u = rng.normal(0, 1.5, (n, 3))
    reg_v = rng.normal(0, 1.5, (n, 3))
    cfg = LossConfig(lam=float(rng.uniform(0.5, 3.0)), beta=float(rng.uniform(0.5, 2.0)))
    return probs, m, reg_u, reg_v, targets, cfg


# -- individual checks -------------------------------------------------


def check_aproi_adjoint(n=100, seed=0):
    """Largest relative mismatch of <forward(x), g> against <x, backward(g)>."""
    rng = np.random.default_rng(seed)

    def one(_):
        shape = tuple(int(v) for v in rng.integers(3, 14, 3))
        cfg = AproiConfig(tuple(int(v) for v in rng.integers(2, 10, 3)))
        rois = random_rois(rng, shape, int(rng.integers(1, 6)))
        x = rng.normal(size=shape)
        g = rng.normal(size=(len(rois),) + cfg.target)
        lhs = float(np.sum(aproi_forward(x, rois, cfg) * g))
        rhs = float(np.sum(x * aproi_backward(g, rois, cfg, shape)))
        scale = max(abs(lhs), abs(rhs))
        return abs(lhs - rhs) / scale if scale else 0.0

    return _timed("aproi adjoint", ADJOINT_TOL, n, one)


def check_aproi_backward_fd(n=100, seed=1):
    rng = np.random.default_rng(seed)

    def one(_):
        shape = tuple(int(v) for v in rng.integers(2, 7, 3))
        cfg = AproiConfig(tuple(int(v) for v in rng.integers(2, 6, 3)))
        rois = random_rois(rng, shape, int(rng.integers(1, 4)))
        x = rng.normal(size=shape)
        g = rng.normal(size=(len(rois),) + cfg.target)
        fd = numeric_gradient(lambda v: float(np.sum(aproi_forward(v, rois, cfg) * g)), x)
        return relative_error(aproi_backward(g, rois, cfg, shape), fd)

    return _timed("aproi backward vs finite differences", GRAD_TOL, n, one)


def check_neighbor_loss(n=100, seed=2):
    rng = np.random.default_rng(seed)

    def one(_):
        size = int(rng.integers(1, 40))
        p = rng.uniform(0.02, 0.98, size)
        m = rng.integers(0, 2, size)
        lam = float(rng.uniform(0.0, 4.0))
        _, grad = neighbor_loss(p, m, lam)
        fd = numeric_gradient(lambda v: float(neighbor_loss(v, m, lam)[0].sum()), p)
        return relative_error(grad, fd)

    return _timed("neighbor loss gradient", GRAD_TOL, n, one)


def check_smooth_l1(n=100, seed=3):
    rng = np.random.default_rng(seed)

    def one(_):
        x = rng.normal(0.0, 2.0, int(rng.integers(1, 40)))
        _, grad = smooth_l1(x)
        return relative_error(grad, numeric_gradient(lambda v: smooth_l1(v)[0], x))

    return _timed("smooth-l1 gradient", GRAD_TOL, n, one)


def check_detection_loss(n=100, seed=4):
    rng = np.random.default_rng(seed)

    def one(_):
        probs, m, u, v, targets, cfg = random_detection_case(rng)
        _, grads = detection_loss(probs, m, u, v, targets, cfg)
        worst = 0.0
        fd = numeric_gradient(lambda a: detection_loss(a, m, u, v, targets, cfg)[0], probs)
        worst = max(worst, relative_error(grads["cls_probs"], fd))
        fd = numeric_gradient(lambda a: detection_loss(probs, m, a, v, targets, cfg)[0], u)
        worst = max(worst, relative_error(grads["reg_u"], fd))
        fd = numeric_gradient(lambda a: detection_loss(probs, m, u, a, targets, cfg)[0], v)
        return max(worst, relative_error(grads["reg_v"], fd))

    return _timed("detection loss gradient", GRAD_TOL, n, one)


def check_pose_loss(n=100, seed=5):
    rng = np.random.default_rng(seed)

    def one(_):
        stacks, channels = int(rng.integers(1, 3)), int(rng.integers(1, 4))
        side = int(rng.integers(2, 5))
        shape = (stacks, channels, side, side, side)
        pred, target = rng.normal(size=shape), rng.normal(size=shape)
        _, grad = pose_loss(pred, target)
        return relative_error(grad, numeric_gradient(lambda a: pose_loss(a, target)[0], pred))

    return _timed("pose mse gradient", GRAD_TOL, n, one)


ALL_CHECKS = (
    check_aproi_adjoint,
    check_aproi_backward_fd,
    check_neighbor_loss,
    check_smooth_l1,
    check_detection_loss,
    check_pose_loss,
)


def run_all(n=100, seed=0):
    results = []
    for i, check in enumerate(ALL_CHECKS):
        res = check(n=n, seed=seed * 97 + i)
        log.info(res.line())
        results.append(res)
    return results

"""Sequence-guided main-chain threading over a proposal graph.

A thread assigns one proposal to each sequence position, starting from a
root fragment that matches the first ``L`` residues. Consecutive proposals
must be graph neighbours, each proposal is used at most once, and the
proposal at position ``t`` must match the sequence class there. Paths are
scored with

    R = sum_t t * (score(S_t) + IoU(S_t, S_{t+1}))

with 1-based positions ``t`` and no compatibility term after the last step.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import iou
from .proposals import match_matrix


class NoRootError(RuntimeError):
    """No proposal fragment matches the start of the sequence."""


@dataclass
class SearchConfig:
    c: float = math.sqrt(2.0)
    n_simulations: int = None  # defaults to 200 * T per root
    L: int = 3
    max_roots: int = 5
    dfs_budget: int = None  # node expansions per root, defaults to 200 * T
    seed: int = 0

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError("exploration constant must be >= 0")
        if self.n_simulations is not None and self.n_simulations < 1:
            raise ValueError("n_simulations must be >= 1")
        if self.L < 1 or self.max_roots < 1:
            raise ValueError("L and max_roots must be >= 1")
        if self.dfs_budget is not None and self.dfs_budget < 1:
            raise ValueError("dfs_budget must be >= 1")


@dataclass
class ThreadResult:
    path: list  # proposal index per sequence position, None when unassigned
    total_reward: float
    runtime: float = 0.0
    algo: str = ""
    info: dict = field(default_factory=dict)

    @property
    def assigned(self):
        return sum(p is not None for p in self.path)


# -- reward -----------------------------------------------------------


def step_value(s_t, s_next, t):
    """Value of step ``t`` (1-based): ``t * (score + IoU with the next proposal)``."""
    compat = iou(s_t.box, s_next.box) if s_next is not None else 0.0
    return t * (s_t.score + compat)


def path_reward(proposals, path):
    nodes = [p for p in path if p is not None]
    total = 0.0
    for t, idx in enumerate(nodes, 1):
        nxt = proposals[nodes[t]] if t < len(nodes) else None
        total += step_value(proposals[idx], nxt, t)
    return total


# -- shared search context -------------------------------------------


class _Context:
    """Array view of a graph for one sequence."""

    def __init__(self, graph, sequence):
        self.graph = graph
        self.props = graph.nodes
        self.seq = np.asarray(sequence, dtype=np.int64)
        self.T = len(self.seq)
        self.match = match_matrix(self.props)
        self.scores = np.array([p.score for p in self.props], dtype=np.float64)
        self.indptr, self.indices = graph.csr()
        self.centers = np.array([p.center for p in self.props])
        boxes = np.array([p.box.as_array() for p in self.props])
        src = np.repeat(np.arange(len(self.props)), np.diff(self.indptr))
        self.edge_iou = np.empty(len(self.indices))
        for e, (a, b) in enumerate(zip(src, self.indices)):
            self.edge_iou[e] = kernels.iou_matrix(boxes[a:a + 1], boxes[b:b + 1])[0, 0]
        self._iou = {(int(a), int(b)): float(v) for a, b, v in zip(src, self.indices, self.edge_iou)}

    def iou(self, a, b):
        return self._iou[(a, b)]

    def legal(self, node, pos, used):
        """Neighbours that may fill position ``pos + 1``, ascending index."""
        if pos + 1 >= self.T:
            return []
        lo, hi = self.indptr[node], self.indptr[node + 1]
        nbrs = self.indices[lo:hi]
        ok = self.match[nbrs, self.seq[pos + 1]] & ~used[nbrs]
        return [int(n) for n in nbrs[ok]]

    def reward(self, nodes):
        total = 0.0
        for t, n in enumerate(nodes, 1):
            total += t * self.scores[n]
            if t < len(nodes):
                total += t * self.iou(n, nodes[t])
        return total

    def result(self, nodes, algo, start, info=None):
        path = list(nodes) + [None] * (self.T - len(nodes))
        return ThreadResult(path, path_reward(self.props, path), time.perf_counter() - start, algo, info or {})


def find_roots(graph, sequence, cfg=None):
    """Candidate starting fragments matching the first ``L`` sequence classes.

    Fragments are ranked by summed detection score, then by their partial
    reward, then lexicographically by proposal index.
    """
    cfg = cfg or SearchConfig()
    ctx = graph if isinstance(graph, _Context) else _Context(graph, sequence)
    L = min(cfg.L, ctx.T)
    if L < 1:
        raise NoRootError("empty sequence")
    frags = []
    used = np.zeros(len(ctx.props), dtype=bool)

    def extend(path):
        if len(path) == L:
            frags.append(tuple(path))
            return
        for nb in ctx.legal(path[-1], len(path) - 1, used):
            used[nb] = True
            path.append(nb)
            extend(path)
            path.pop()
            used[nb] = False

    for start in np.flatnonzero(ctx.match[:, ctx.seq[0]]):
        start = int(start)
        used[start] = True
        extend([start])
        used[start] = False
    if not frags:
        raise NoRootError(f"no proposal fragment matches the first {L} sequence positions")
    frags.sort(key=lambda f: (-sum(ctx.scores[n] for n in f), -ctx.reward(f), f))
    return [list(f) for f in frags[: cfg.max_roots]]


# -- MCTS -------------------------------------------------------------


class MctsNode:
    __slots__ = ("proposal", "depth", "parent", "children", "untried", "V", "n", "done")

    def __init__(self, proposal, depth, parent=None):
        self.proposal = proposal
        self.depth = depth  # 1-based sequence position
        self.parent = parent
        self.children = []
        self.untried = []
        self.V = 0.0
        self.n = 0
        self.done = False  # subtree fully enumerated


def uct_value(child, parent_visits, c):
    return child.V / child.n + c * math.sqrt(2.0 * math.log(parent_visits) / child.n)


def uct_select(children, parent_visits, c):
    """Child maximizing ``V/n + c * sqrt(2 ln N / n)``; ties go to the lowest proposal index."""
    if not children:
        raise ValueError("uct_select needs at least one child")
    if any(ch.n < 1 for ch in children):
        raise ValueError("every child must be visited before UCT selection")
    best, best_key = None, None
    for ch in children:
        key = (uct_value(ch, parent_visits, c), -ch.proposal)
        if best_key is None or key > best_key:
            best, best_key = ch, key
    return best


def _mcts_root(ctx, frag, n_sim, c, seed):
    """One search from root fragment ``frag``; returns (best reward, best nodes, iterations).

    The budget is spread over the remaining depth. After each slice the
    search commits to the child on the best path found so far and re-roots
    there, keeping that subtree's statistics.
    """
    rng = np.random.default_rng(seed)
    T = ctx.T
    used = np.zeros(len(ctx.props), dtype=bool)
    used[frag] = True
    root = MctsNode(frag[-1], len(frag))
    root.untried = ctx.legal(frag[-1], len(frag) - 1, used)
    prefix = list(frag)
    prefix_reward = ctx.reward(frag)
    best_reward, best_nodes = prefix_reward, list(frag)
    # tree statistics use rewards scaled by the maximum attainable sum of t * 2
    rmax = float(T * (T + 1))
    per_step = max(1, -(-n_sim // max(1, T - len(frag))))
    out = np.empty(T, dtype=np.int64)
    sims = 0
    while sims < n_sim:
        for _ in range(min(per_step, n_sim - sims)):
            sims += 1
            node = root
            trail = []
            reward = prefix_reward
            while not node.untried and node.children:
                child = uct_select(node.children, node.n, c)
                reward += node.depth * ctx.iou(node.proposal, child.proposal) + child.depth * ctx.scores[child.proposal]
                node = child
                trail.append(node.proposal)
                used[node.proposal] = True
            if node.untried:
                a = node.untried.pop(0)
                child = MctsNode(a, node.depth + 1, node)
                node.children.append(child)
                reward += node.depth * ctx.iou(node.proposal, a) + child.depth * ctx.scores[a]
                node = child
                trail.append(a)
                used[a] = True
                node.untried = ctx.legal(a, node.depth - 1, used)
            added, gain = kernels.rollout(
                ctx.indptr, ctx.indices, ctx.edge_iou, ctx.scores, ctx.match, ctx.seq,
                node.proposal, node.depth - 1, used, rng.random(T), out,
            )
            reward += gain
            if reward > best_reward + 1e-12:
                best_reward = reward
                best_nodes = prefix + trail + out[:added].tolist()
            q = reward / rmax
            while node is not None:
                node.V += q
                node.n += 1
                node.done = not node.untried and all(ch.done for ch in node.children)
                node = node.parent
            used[trail] = False
            if root.done:
                break
        # an exhausted subtree means best_nodes is optimal below the current prefix
        if root.done or len(best_nodes) <= len(prefix):
            break
        nxt = best_nodes[len(prefix)]
        child = next((ch for ch in root.children if ch.proposal == nxt), None)
        if child is None:  # reached only by a rollout so far
            root.untried.remove(nxt)
            used[nxt] = True
            child = MctsNode(nxt, root.depth + 1)
            child.untried = ctx.legal(nxt, root.depth, used)
        used[nxt] = True
        prefix_reward += root.depth * ctx.iou(root.proposal, nxt) + child.depth * ctx.scores[nxt]
        prefix.append(nxt)
        child.parent = None
        root = child
    return best_reward, best_nodes, sims


def mcts_thread(graph, sequence, cfg=None, workers=1):
    """Thread ``sequence`` through ``graph`` with one UCT search per root fragment.

    Each iteration selects down the tree by UCT, expands one untried legal
    action, finishes the path with a uniformly random legal rollout and
    backs the path reward up the selected branch. The search commits one
    position at a time (see ``_mcts_root``). The best complete or partial
    path seen over all roots is returned. Roots are independent and
    run in up to ``workers`` processes; the result does not depend on it.
    """
    cfg = cfg or SearchConfig()
    start = time.perf_counter()
    ctx = _Context(graph, sequence)
    roots = find_roots(ctx, sequence, cfg)
    n_sim = cfg.n_simulations or 200 * ctx.T
    jobs = [(ctx, frag, n_sim, cfg.c, [cfg.seed, rank]) for rank, frag in enumerate(roots)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            outcomes = list(ex.map(_mcts_root, *zip(*jobs)))
    else:
        outcomes = [_mcts_root(*job) for job in jobs]
    best = None
    for rank, (reward, nodes, _) in enumerate(outcomes):
        if best is None or reward > best[0] + 1e-12:
            best = (reward, nodes, rank)
    info = {"roots": len(roots), "root_rank": best[2], "simulations": sum(o[2] for o in outcomes)}
    return ctx.result(best[1], "mcts", start, info)


# -- DFS baselines ----------------------------------------------------


def _dfs_root(ctx, frag, criterion, budget):
    used = np.zeros(len(ctx.props), dtype=bool)
    used[frag] = True
    path = list(frag)
    best = list(path)

    def ordered(node, pos):
        cand = ctx.legal(node, pos, used)
        if criterion == "overlap":
            return sorted(cand, key=lambda n: (-ctx.iou(node, n), n))
        d = np.linalg.norm(ctx.centers[cand] - ctx.centers[node], axis=1) if cand else []
        return [n for _, n in sorted(zip(d, cand))]

    stack = [iter(ordered(path[-1], len(path) - 1))]
    expansions = 0
    while stack and expansions < budget:
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            if len(path) > len(frag):
                used[path.pop()] = False
            continue
        expansions += 1
        path.append(nxt)
        used[nxt] = True
        if len(path) > len(best):
            best = list(path)
        if len(path) == ctx.T:
            break
        stack.append(iter(ordered(nxt, len(path) - 1)))
    return best, expansions


def dfs_thread(graph, sequence, criterion="distance", cfg=None):
    """Depth-first threading that tries neighbours by max IoU (``overlap``) or
    min center distance (``distance``), backtracking from dead ends.

    Stops at the first complete path; otherwise returns the longest path
    found within the per-root expansion budget.
    """
    if criterion not in ("overlap", "distance"):
        raise ValueError(f"unknown DFS criterion {criterion!r}")
    cfg = cfg or SearchConfig()
    start = time.perf_counter()
    ctx = _Context(graph, sequence)
    roots = find_roots(ctx, sequence, cfg)
    budget = cfg.dfs_budget or 200 * ctx.T
    best, best_rank, total = None, 0, 0
    for rank, frag in enumerate(roots):
        nodes, used = _dfs_root(ctx, frag, criterion, budget)
        total += used
        if best is None or len(nodes) > len(best):
            best, best_rank = nodes, rank
        if len(best) == ctx.T:
            break
    algo = "dfs-o" if criterion == "overlap" else "dfs-d"
    return ctx.result(best, algo, start, {"roots": len(roots), "root_rank": best_rank, "expansions": total})


# -- serialization ---------------------------------------------------


def format_thread(result, proposals, sequence):
    lines = [f"# algo={result.algo} reward={result.total_reward:.6f}"]
    for t, (cls, idx) in enumerate(zip(sequence, result.path)):
        if idx is None:
            lines.append(f"{t} {cls} -")
        else:
            x, y, z = proposals[idx].center
            lines.append(f"{t} {cls} {idx} {x:.6f} {y:.6f} {z:.6f}")
    return "\n".join(lines) + "\n"


def parse_thread(text):
    """Returns ``(sequence, ThreadResult)``; the reward is recomputed by callers if needed."""
    seq, path, algo, reward = [], [], "", 0.0
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for kv in line[1:].split():
                k, _, v = kv.partition("=")
                if k == "algo":
                    algo = v
                elif k == "reward":
                    reward = float(v)
            continue
        tok = line.split()
        if len(tok) not in (3, 6) or int(tok[0]) != len(seq):
            raise ValueError(f"line {lineno}: malformed thread record {line!r}")
        seq.append(int(tok[1]))
        path.append(None if tok[2] == "-" else int(tok[2]))
    return seq, ThreadResult(path, reward, 0.0, algo)


def write_thread(path, result, proposals, sequence):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_thread(result, proposals, sequence))


def read_thread(path):
    with open(path, encoding="utf-8") as fh:
        return parse_thread(fh.read())

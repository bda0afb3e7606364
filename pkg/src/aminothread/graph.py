"""KNN proposal graph and peptide-bond pruning."""

from dataclasses import dataclass, field

import numpy as np

from . import kernels

CN_BOND = (1.1, 1.6)
CENTER_BOND = (2.8, 4.8)


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    node: int
    dist: float
    bonded: bool


@dataclass
class SearchGraph:
    nodes: list
    adjacency: list  # per node, Edges sorted by neighbour index
    removed_fraction: float = 0.0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.nodes)

    def neighbors(self, i):
        return [e.node for e in self.adjacency[i]]

    def edge_set(self):
        return {(i, e.node) for i, edges in enumerate(self.adjacency) for e in edges if i < e.node}

    @property
    def n_edges(self):
        return sum(len(a) for a in self.adjacency) // 2

    def has_edge(self, i, j):
        return any(e.node == j for e in self.adjacency[i])

    def csr(self):
        """``(indptr, indices)`` arrays of the adjacency, neighbours in ascending order."""
        indptr = np.zeros(len(self.nodes) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(a) for a in self.adjacency])
        indices = np.array([e.node for a in self.adjacency for e in a], dtype=np.int64)
        return indptr, indices


def classify_bond(a, b):
    """Geometric peptide-bond test between two proposals.

    With atoms on both sides, bonded iff some carbonyl C to amide N distance
    (either direction) lies in [1.1, 1.6] A; otherwise bonded iff the box
    centers are 2.8 to 4.8 A apart.
    """
    if a.atoms is not None and b.atoms is not None:
        best = np.inf
        for x, y in ((a, b), (b, a)):
            c, n = x.atom("C"), y.atom("N")
            if c is not None and n is not None:
                best = min(best, float(np.linalg.norm(c - n)))
        if np.isfinite(best):
            return CN_BOND[0] <= best <= CN_BOND[1]
    d = float(np.linalg.norm(a.center - b.center))
    return CENTER_BOND[0] <= d <= CENTER_BOND[1]


def proposal_centers(proposals):
    return np.ascontiguousarray([p.center for p in proposals], dtype=np.float64).reshape(-1, 3)


def build_knn_graph(proposals, k=8):
    """Union-symmetrized KNN graph on box centers; bond flags computed per edge."""
    if k < 1:
        raise GraphError("k must be >= 1")
    if len(proposals) < 2:
        raise GraphError(f"need at least 2 proposals, got {len(proposals)}")
    centers = proposal_centers(proposals)
    idx, dist = kernels.knn(centers, int(k))
    nbrs = [dict() for _ in proposals]
    for i in range(len(proposals)):
        for j, d in zip(idx[i], dist[i]):
            j = int(j)
            nbrs[i][j] = float(d)
            nbrs[j][i] = float(d)
    adjacency = []
    bond_cache = {}
    for i, row in enumerate(nbrs):
        edges = []
        for j in sorted(row):
            key = (min(i, j), max(i, j))
            if key not in bond_cache:
                bond_cache[key] = classify_bond(proposals[key[0]], proposals[key[1]])
            edges.append(Edge(j, row[j], bond_cache[key]))
        adjacency.append(edges)
    return SearchGraph(list(proposals), adjacency, meta={"k": int(k), "pruned": False})


def prune_graph(g):
    """Drop every edge not classified as a peptide bond."""
    before = g.n_edges
    adjacency = [[e for e in edges if e.bonded] for edges in g.adjacency]
    after = sum(len(a) for a in adjacency) // 2
    removed = (before - after) / before if before else 0.0
    meta = dict(g.meta, pruned=True)
    return SearchGraph(g.nodes, adjacency, removed, meta)


# -- serialization -----------------------------------------------------


def format_graph(g):
    """``i j dist bonded`` per undirected edge (``i < j``) after a ``#`` header."""
    head = f"# nodes={len(g)} k={g.meta.get('k', 0)} pruned={int(bool(g.meta.get('pruned')))}"
    lines = [head + f" removed_fraction={g.removed_fraction:.6f}"]
    for i, edges in enumerate(g.adjacency):
        for e in edges:
            if i < e.node:
                lines.append(f"{i} {e.node} {e.dist:.6f} {int(e.bonded)}")
    return "\n".join(lines) + "\n"


def parse_graph(text, proposals):
    meta, removed = {}, 0.0
    adjacency = [[] for _ in proposals]
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for kv in line[1:].split():
                key, _, val = kv.partition("=")
                if key == "nodes" and int(val) != len(proposals):
                    raise GraphError(f"graph has {val} nodes but {len(proposals)} proposals were given")
                if key == "k":
                    meta["k"] = int(val)
                elif key == "pruned":
                    meta["pruned"] = val == "1"
                elif key == "removed_fraction":
                    removed = float(val)
            continue
        tok = line.split()
        if len(tok) != 4:
            raise GraphError(f"line {lineno}: expected 'i j dist bonded'")
        i, j, d, b = int(tok[0]), int(tok[1]), float(tok[2]), tok[3] == "1"
        if not (0 <= i < j < len(proposals)):
            raise GraphError(f"line {lineno}: bad edge ({i}, {j})")
        adjacency[i].append(Edge(j, d, b))
        adjacency[j].append(Edge(i, d, b))
    for edges in adjacency:
        edges.sort(key=lambda e: e.node)
    return SearchGraph(list(proposals), adjacency, removed, meta)


def write_graph(path, g):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_graph(g))


def read_graph(path, proposals):
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read(), proposals)

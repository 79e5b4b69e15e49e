"""Simple loops, loop families, and the shortest-loop search.

A loop is a simple cycle stored in canonical form: the node sequence is
rotated to start at its smallest node id and reflected so the second
entry is the smaller of that node's two cycle neighbors. Two equal
loops therefore compare equal, and sets of loops have set semantics.

``shortest_loop`` is an exact separation oracle: for every candidate
edge e=(u,v) of the family it computes the cost-shortest u-v path in
the graph with e removed and closes it through e, then minimizes over
candidates. Nonnegative per-edge costs only; zero-cost edges are fine.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .graph import Graph

__all__ = [
    "Loop",
    "FamilySelector",
    "LoopCountOverflow",
    "rho_length",
    "shortest_loop",
    "violated_loops",
    "enumerate_loops",
    "overlap",
]

# smallest positive double; stands in for zero costs inside scipy's CSR
# (csgraph treats stored zeros as missing edges)
_TINY = 5e-324

# below this edge count the pure-python search wins over scipy call overhead
_SCIPY_MIN_EDGES = 25


class LoopCountOverflow(RuntimeError):
    """Loop enumeration exceeded the caller-supplied guard."""


def _canonical(seq):
    seq = tuple(int(v) for v in seq)
    i = seq.index(min(seq))
    rot = seq[i:] + seq[:i]
    if rot[1] > rot[-1]:
        rot = (rot[0],) + rot[1:][::-1]
    return rot


@dataclass(frozen=True)
class Loop:
    """A simple cycle: canonical node sequence plus traversed edge indices."""

    nodes: tuple[int, ...]
    edge_set: frozenset[int]

    @staticmethod
    def from_nodes(graph: Graph, seq) -> "Loop":
        seq = [int(v) for v in seq]
        if len(seq) >= 2 and seq[0] == seq[-1]:
            seq = seq[:-1]
        if len(seq) < 3:
            raise ValueError("a simple loop has hop-length >= 3")
        if len(set(seq)) != len(seq):
            raise ValueError(f"nodes repeat in loop {seq}")
        edge_set = set()
        for a, b in zip(seq, seq[1:] + seq[:1]):
            k = graph.edge_index(a, b)
            if k is None:
                raise ValueError(f"nodes {a} and {b} are not adjacent")
            edge_set.add(k)
        return Loop(nodes=_canonical(seq), edge_set=frozenset(edge_set))

    @property
    def hop_length(self) -> int:
        return len(self.nodes)

    def __lt__(self, other):
        return self.nodes < other.nodes


@dataclass(frozen=True)
class FamilySelector:
    """Which loops belong to the family: a base kind plus an optional hop cap.

    kind is one of ``all``, ``node`` (loops through a given node) or
    ``edge`` (loops through a given edge index). ``max_hop`` restricts
    the family to loops of at most that many edges.
    """

    kind: str = "all"
    node: int | None = None
    edge: int | None = None
    max_hop: int | None = None

    def __post_init__(self):
        if self.kind not in ("all", "node", "edge"):
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.kind == "node" and self.node is None:
            raise ValueError("node family needs a node id")
        if self.kind == "edge" and self.edge is None:
            raise ValueError("edge family needs an edge index")
        if self.max_hop is not None and self.max_hop < 3:
            raise ValueError("hop cap must be at least 3")

    @staticmethod
    def all_loops(max_hop=None) -> "FamilySelector":
        return FamilySelector(kind="all", max_hop=max_hop)

    @staticmethod
    def through_node(v, max_hop=None) -> "FamilySelector":
        return FamilySelector(kind="node", node=int(v), max_hop=max_hop)

    @staticmethod
    def through_edge(e, max_hop=None) -> "FamilySelector":
        return FamilySelector(kind="edge", edge=int(e), max_hop=max_hop)

    def contains(self, loop: Loop) -> bool:
        if self.max_hop is not None and loop.hop_length > self.max_hop:
            return False
        if self.kind == "node":
            return self.node in loop.nodes
        if self.kind == "edge":
            return self.edge in loop.edge_set
        return True

    def describe(self) -> str:
        base = {
            "all": "all loops",
            "node": f"loops through node {self.node}",
            "edge": f"loops through edge {self.edge}",
        }[self.kind]
        if self.max_hop is not None:
            base += f" with at most {self.max_hop} hops"
        return base


def rho_length(loop: Loop, rho) -> float:
    """Sum of the density over the loop's edges."""
    rho = np.asarray(rho, dtype=float)
    idx = np.fromiter(sorted(loop.edge_set), dtype=int)
    return float(rho[idx].sum())


def overlap(a: Loop, b: Loop) -> int:
    """Number of edges two loops share."""
    return len(a.edge_set & b.edge_set)


def _candidate_edges(graph: Graph, family: FamilySelector):
    if family.kind == "edge":
        if not (0 <= family.edge < graph.m):
            raise ValueError(f"edge index {family.edge} out of range")
        return [family.edge]
    if family.kind == "node":
        if not (0 <= family.node < graph.n):
            raise ValueError(f"node id {family.node} out of range")
        return sorted(k for _, k in graph.neighbors(family.node))
    return list(range(graph.m))


def _dijkstra_exact(graph: Graph, rho, source, target, banned_edge):
    """Shortest path with (cost, hops, predecessor-id) tie-breaking.

    Returns (cost, hops, node path) from source to target in the graph
    without banned_edge, or None if unreachable.
    """
    n = graph.n
    dist = np.full(n, np.inf)
    hops = np.full(n, n + 1, dtype=int)
    pred = np.full(n, -1, dtype=int)
    dist[source] = 0.0
    hops[source] = 0
    heap = [(0.0, 0, source)]
    while heap:
        d, h, u = heapq.heappop(heap)
        if d > dist[u] or (d == dist[u] and h > hops[u]):
            continue
        for v, k in graph.neighbors(u):
            if k == banned_edge:
                continue
            nd = d + rho[k]
            nh = h + 1
            if nd < dist[v] or (
                nd == dist[v]
                and (nh < hops[v] or (nh == hops[v] and pred[v] >= 0 and u < pred[v]))
            ):
                dist[v] = nd
                hops[v] = nh
                pred[v] = u
                heapq.heappush(heap, (nd, nh, v))
    if not np.isfinite(dist[target]):
        return None
    path = [target]
    while path[-1] != source:
        path.append(int(pred[path[-1]]))
    path.reverse()
    return float(dist[target]), int(hops[target]), path


def _dijkstra_hop_capped(graph: Graph, rho, source, target, banned_edge, max_path_hops):
    """Like _dijkstra_exact but allowing at most max_path_hops edges."""
    n = graph.n
    width = max_path_hops + 1
    dist = np.full((n, width), np.inf)
    pred = np.full((n, width), -1, dtype=int)
    dist[source, 0] = 0.0
    heap = [(0.0, 0, source)]
    while heap:
        d, h, u = heapq.heappop(heap)
        if d > dist[u, h]:
            continue
        if h == max_path_hops:
            continue
        for v, k in graph.neighbors(u):
            if k == banned_edge:
                continue
            nd = d + rho[k]
            nh = h + 1
            if nd < dist[v, nh] or (nd == dist[v, nh] and pred[v, nh] >= 0 and u < pred[v, nh]):
                dist[v, nh] = nd
                pred[v, nh] = u
                heapq.heappush(heap, (nd, nh, v))
    best = None
    for h in range(width):
        if np.isfinite(dist[target, h]):
            if best is None or dist[target, h] < best[0]:
                best = (float(dist[target, h]), h)
    if best is None:
        return None
    d, h = best
    path = [target]
    hh = h
    while path[-1] != source or hh > 0:
        u = int(pred[path[-1], hh])
        path.append(u)
        hh -= 1
    path.reverse()
    return d, h, path


def _scipy_distance_scan(graph: Graph, rho, candidates):
    """Approximate loop cost per candidate edge via scipy's Dijkstra.

    Zero costs are replaced by the smallest subnormal so the CSR keeps
    the edge; the resulting distances are exact for paths of nonzero
    cost and off by at most n*5e-324 otherwise.
    """
    n, m = graph.n, graph.m
    w = np.maximum(np.asarray(rho, dtype=float), _TINY)
    row = np.empty(2 * m, dtype=np.int32)
    col = np.empty(2 * m, dtype=np.int32)
    val = np.empty(2 * m)
    for k, (u, v) in enumerate(graph.edges):
        row[2 * k], col[2 * k], val[2 * k] = u, v, w[k]
        row[2 * k + 1], col[2 * k + 1], val[2 * k + 1] = v, u, w[k]
    mat = csr_matrix((val, (row, col)), shape=(n, n))
    # locate each edge's two stored positions for in-place banning
    pos = np.empty((m, 2), dtype=np.int64)
    indptr, indices = mat.indptr, mat.indices
    for k, (u, v) in enumerate(graph.edges):
        s, e = indptr[u], indptr[u + 1]
        pos[k, 0] = s + np.searchsorted(indices[s:e], v)
        s, e = indptr[v], indptr[v + 1]
        pos[k, 1] = s + np.searchsorted(indices[s:e], u)

    out = {}
    for k in candidates:
        u, v = graph.edges[k]
        saved = (mat.data[pos[k, 0]], mat.data[pos[k, 1]])
        mat.data[pos[k, 0]] = np.inf
        mat.data[pos[k, 1]] = np.inf
        d = _csgraph_dijkstra(mat, directed=True, indices=u)
        mat.data[pos[k, 0]], mat.data[pos[k, 1]] = saved
        out[k] = float(rho[k] + d[v])
    return out


def shortest_loop(graph: Graph, rho, family: FamilySelector = FamilySelector()):
    """Find the loop of globally minimal density-length in a family.

    Parameters
    ----------
    graph : Graph
    rho : array_like
        Nonnegative cost per edge, indexed like graph.edges.
    family : FamilySelector

    Returns
    -------
    (Loop, float) or None
        The minimizing loop and its length; None when the family is
        empty. Ties go to the smaller hop-length, then to the
        lexicographically smallest canonical node sequence.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (graph.m,):
        raise ValueError(f"expected {graph.m} densities, got shape {rho.shape}")
    if graph.m and rho.min() < 0:
        raise ValueError("densities must be nonnegative")
    candidates = _candidate_edges(graph, family)
    if not candidates:
        return None

    if family.max_hop is None and graph.m >= _SCIPY_MIN_EDGES:
        approx = _scipy_distance_scan(graph, rho, candidates)
        finite = [t for t in approx.values() if np.isfinite(t)]
        if not finite:
            return None
        lo = min(finite)
        slack = 1e-9 * max(1.0, abs(lo))
        candidates = [k for k in candidates if approx[k] <= lo + slack]

    best = None
    for k in candidates:
        u, v = graph.edges[k]
        if family.max_hop is None:
            found = _dijkstra_exact(graph, rho, u, v, k)
        else:
            found = _dijkstra_hop_capped(graph, rho, u, v, k, family.max_hop - 1)
        if found is None:
            continue
        d, h, path = found
        loop = Loop.from_nodes(graph, path)
        key = (d + rho[k], h + 1, loop.nodes)
        if best is None or key < best[0]:
            best = (key, loop)
    if best is None:
        return None
    (length, _, _), loop = best
    return loop, float(length)


def violated_loops(graph: Graph, rho, family: FamilySelector, threshold):
    """Per-candidate-edge shortest loops with length strictly below threshold.

    One loop per candidate edge at most, deduplicated by canonical form
    and sorted by (length, hop-length, node sequence). Used to add
    constraints in batches.
    """
    rho = np.asarray(rho, dtype=float)
    candidates = _candidate_edges(graph, family)
    if not candidates:
        return []
    if family.max_hop is None and graph.m >= _SCIPY_MIN_EDGES:
        approx = _scipy_distance_scan(graph, rho, candidates)
        slack = 1e-9 * max(1.0, abs(threshold))
        candidates = [k for k in candidates if approx[k] < threshold + slack]
    out = {}
    for k in candidates:
        u, v = graph.edges[k]
        if family.max_hop is None:
            found = _dijkstra_exact(graph, rho, u, v, k)
        else:
            found = _dijkstra_hop_capped(graph, rho, u, v, k, family.max_hop - 1)
        if found is None:
            continue
        d, h, path = found
        length = d + rho[k]
        if length >= threshold:
            continue
        loop = Loop.from_nodes(graph, path)
        key = (float(length), h + 1, loop.nodes)
        if loop.nodes not in out or key < out[loop.nodes][0]:
            out[loop.nodes] = (key, loop)
    ranked = sorted(out.values(), key=lambda t: t[0])
    return [(loop, key[0]) for key, loop in ranked]


def enumerate_loops(graph: Graph, family: FamilySelector = FamilySelector(), max_count=100000):
    """All distinct simple loops of a family, in canonical order.

    Intended for small graphs; raises LoopCountOverflow once more than
    ``max_count`` loops are found.
    """
    cap = family.max_hop if family.max_hop is not None else graph.n
    found = []

    def extend(path, on_path, root):
        u = path[-1]
        for v, _ in graph.neighbors(u):
            if v == root and len(path) >= 3 and path[1] < path[-1]:
                loop = Loop.from_nodes(graph, path)
                if family.contains(loop):
                    found.append(loop)
                    if len(found) > max_count:
                        raise LoopCountOverflow(
                            f"more than {max_count} loops in {family.describe()}"
                        )
            elif v > root and v not in on_path and len(path) < cap:
                path.append(v)
                on_path.add(v)
                extend(path, on_path, root)
                path.pop()
                on_path.remove(v)

    for root in range(graph.n):
        extend([root], {root}, root)
    found.sort()
    return found

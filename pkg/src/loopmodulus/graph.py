"""Graph container, validation, file ingestion and emission.

Graphs are simple (no self-loops, no parallel edges), undirected, with
strictly positive edge weights and a stable edge indexing: the k-th
distinct edge encountered while loading keeps index k for its lifetime.
Node ids are normalized to ``0..n-1`` internally; the original node
tokens from input files are retained for output.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

__all__ = [
    "Graph",
    "Partition",
    "GraphFormatError",
    "load_edge_list",
    "load_lfr",
    "write_weighted_edge_list",
    "builtin_graph",
    "BUILTIN_NAMES",
]


class GraphFormatError(ValueError):
    """Raised for malformed input files or invalid graph parameters."""


@dataclass(frozen=True)
class Graph:
    """Simple undirected weighted graph with stable edge indices.

    Attributes
    ----------
    n : int
        Number of nodes; ids are the contiguous range ``0..n-1``.
    edges : tuple of (int, int)
        Edge endpoints; ``edges[k]`` is the edge with index k.
    weights : np.ndarray
        Positive weight per edge, aligned with ``edges``.
    tokens : tuple of str
        Original node labels, ``tokens[i]`` names node i.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    weights: np.ndarray
    tokens: tuple[str, ...]
    _adj: tuple[tuple[tuple[int, int], ...], ...] = field(repr=False, compare=False, default=())

    @staticmethod
    def build(n, edges, weights=None, tokens=None) -> "Graph":
        """Validate and construct a Graph.

        ``edges`` is an iterable of (u, v) pairs; ``weights`` defaults to 1
        per edge; ``tokens`` defaults to the decimal node ids.
        """
        edges = tuple((int(u), int(v)) for u, v in edges)
        m = len(edges)
        if weights is None:
            w = np.ones(m)
        else:
            w = np.asarray(weights, dtype=float).copy()
        if w.shape != (m,):
            raise GraphFormatError(f"expected {m} weights, got shape {w.shape}")
        if m and (not np.all(np.isfinite(w)) or np.any(w <= 0)):
            raise GraphFormatError("edge weights must be strictly positive and finite")
        if tokens is None:
            tokens = tuple(str(i) for i in range(n))
        else:
            tokens = tuple(tokens)
        if len(tokens) != n:
            raise GraphFormatError(f"expected {n} node tokens, got {len(tokens)}")
        seen = set()
        for k, (u, v) in enumerate(edges):
            if u == v:
                raise GraphFormatError(f"self-loop at edge index {k}: ({u}, {v})")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(f"edge index {k} references node outside 0..{n - 1}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphFormatError(f"duplicate edge at index {k}: ({u}, {v})")
            seen.add(key)
        adj = [[] for _ in range(n)]
        for k, (u, v) in enumerate(edges):
            adj[u].append((v, k))
            adj[v].append((u, k))
        adj = tuple(tuple(sorted(a)) for a in adj)
        w.setflags(write=False)
        return Graph(n=n, edges=edges, weights=w, tokens=tokens, _adj=adj)

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, u):
        """Sorted (neighbor, edge_index) pairs of node u."""
        return self._adj[u]

    def degree(self, u) -> int:
        return len(self._adj[u])

    def edge_index(self, u, v):
        """Index of edge (u, v), or None if absent."""
        for nbr, k in self._adj[u]:
            if nbr == v:
                return k
        return None

    def with_weights(self, weights) -> "Graph":
        """Same topology and tokens with a new weight vector."""
        return Graph.build(self.n, self.edges, weights, self.tokens)

    def node_id(self, token) -> int:
        """Node id for an original token (str(token) is looked up)."""
        token = str(token)
        try:
            return self.tokens.index(token)
        except ValueError:
            raise GraphFormatError(f"unknown node token {token!r}") from None

    def components(self):
        """Connected components as lists of node ids, smallest id first."""
        seen = np.zeros(self.n, dtype=bool)
        comps = []
        for s in range(self.n):
            if seen[s]:
                continue
            stack, comp = [s], []
            seen[s] = True
            while stack:
                u = stack.pop()
                comp.append(u)
                for v, _ in self._adj[u]:
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
            comps.append(sorted(comp))
        return comps

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and self.tokens == other.tokens
            and self.edges == other.edges
            and self.weights.shape == other.weights.shape
            and bool(np.all(self.weights == other.weights))
        )

    def __hash__(self):
        return hash((self.n, self.edges, self.tokens))


@dataclass(frozen=True)
class Partition:
    """Community labels, one small nonnegative integer per node."""

    labels: np.ndarray

    @staticmethod
    def from_labels(labels) -> "Partition":
        lab = np.asarray(labels, dtype=int)
        if lab.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if lab.size and lab.min() < 0:
            raise ValueError("labels must be nonnegative")
        arr = lab.copy()
        arr.setflags(write=False)
        return Partition(arr)

    @property
    def n(self) -> int:
        return self.labels.size

    def canonical(self) -> "Partition":
        """Relabel communities by first appearance to 0..k-1."""
        remap, out = {}, np.empty_like(self.labels)
        for i, lab in enumerate(self.labels):
            if lab not in remap:
                remap[lab] = len(remap)
            out[i] = remap[lab]
        out.setflags(write=False)
        return Partition(out)

    def num_communities(self) -> int:
        return len(set(self.labels.tolist()))

    def groups(self):
        """Communities as sorted node lists, keyed by canonical label."""
        canon = self.canonical()
        out = [[] for _ in range(canon.num_communities())]
        for i, lab in enumerate(canon.labels):
            out[lab].append(i)
        return out

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return bool(np.array_equal(self.labels, other.labels))


def _tokenize(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        yield lineno, line.split()


def load_edge_list(text) -> Graph:
    """Parse a whitespace-separated edge list into a Graph.

    Each non-comment line is ``u v`` or ``u v w``. Node tokens are
    arbitrary strings mapped to ids in first-appearance order. Repeated
    edges are merged keeping the first occurrence's index and the last
    occurrence's weight; a missing weight means 1.0.
    """
    ids = {}
    edges = []
    weights = []
    pos = {}

    def node(tok):
        if tok not in ids:
            ids[tok] = len(ids)
        return ids[tok]

    for lineno, parts in _tokenize(text):
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"line {lineno}: expected 'u v' or 'u v w'")
        u, v = node(parts[0]), node(parts[1])
        if u == v:
            raise GraphFormatError(f"line {lineno}: self-loop {parts[0]!r}")
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad weight {parts[2]!r}") from None
        else:
            w = 1.0
        if not (w > 0) or not np.isfinite(w):
            raise GraphFormatError(f"line {lineno}: non-positive weight {w}")
        key = (min(u, v), max(u, v))
        if key in pos:
            weights[pos[key]] = w
        else:
            pos[key] = len(edges)
            edges.append((u, v))
            weights.append(w)

    tokens = sorted(ids, key=ids.get)
    return Graph.build(len(ids), edges, weights, tokens)


def load_lfr(network_text, community_text):
    """Load a benchmark network file plus its community file.

    The network file lists every undirected edge in both directions with
    1-based integer node ids (an optional third column carries a weight).
    Returns the deduplicated graph with 0-based ids and the ground-truth
    partition. Edges listed in only one direction are accepted with a
    warning.
    """
    pairs = {}
    dirs = set()
    max_node = 0
    for lineno, parts in _tokenize(network_text):
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"network line {lineno}: expected 'u v' or 'u v w'")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"network line {lineno}: node ids must be integers") from None
        if u < 1 or v < 1:
            raise GraphFormatError(f"network line {lineno}: node ids are 1-based")
        if u == v:
            raise GraphFormatError(f"network line {lineno}: self-loop {u}")
        w = float(parts[2]) if len(parts) == 3 else 1.0
        if not (w > 0) or not np.isfinite(w):
            raise GraphFormatError(f"network line {lineno}: non-positive weight {w}")
        max_node = max(max_node, u, v)
        key = (min(u, v), max(u, v))
        if key not in pairs:
            pairs[key] = [len(pairs), w]
        else:
            pairs[key][1] = w
        dirs.add((u, v))

    asym = [key for key in pairs if (key[1], key[0]) not in dirs or key not in dirs]
    if asym:
        warnings.warn(f"{len(asym)} edge(s) listed in only one direction", stacklevel=2)

    labels_raw = {}
    for lineno, parts in _tokenize(community_text):
        if len(parts) != 2:
            raise GraphFormatError(f"community line {lineno}: expected 'node label'")
        try:
            node, lab = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"community line {lineno}: entries must be integers") from None
        if node < 1 or node > max_node:
            raise GraphFormatError(
                f"community line {lineno}: node {node} absent from network"
            )
        labels_raw[node - 1] = lab
    if len(labels_raw) != max_node:
        missing = sorted(set(range(max_node)) - set(labels_raw))[:5]
        raise GraphFormatError(f"community file misses nodes (0-based): {missing} ...")

    order = sorted(pairs, key=lambda k: pairs[k][0])
    edges = [(u - 1, v - 1) for u, v in order]
    weights = [pairs[k][1] for k in order]
    graph = Graph.build(max_node, edges, weights, [str(i + 1) for i in range(max_node)])
    part = Partition.from_labels([labels_raw[i] for i in range(max_node)]).canonical()
    return graph, part


def write_weighted_edge_list(graph: Graph) -> str:
    """Emit one ``u v w`` line per edge in index order, full precision."""
    lines = []
    for (u, v), w in zip(graph.edges, graph.weights):
        lines.append(f"{graph.tokens[u]} {graph.tokens[v]} {w!r}")
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Built-in graphs
# ---------------------------------------------------------------------------

BUILTIN_NAMES = (
    "karate",
    "grid",
    "torus",
    "complete",
    "cycle",
    "tree_random",
    "regular_random",
)


def _karate():
    data = resources.files("loopmodulus.data")
    graph = load_edge_list(data.joinpath("karate.edges").read_text())
    labels = [0] * graph.n
    for lineno, parts in _tokenize(data.joinpath("karate.truth").read_text()):
        labels[graph.node_id(parts[0])] = int(parts[1])
    return graph, Partition.from_labels(labels).canonical()


def _grid(rows, cols):
    if rows < 1 or cols < 1:
        raise GraphFormatError("grid needs rows >= 1 and cols >= 1")
    idx = lambda r, c: r * cols + c
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((idx(r, c), idx(r, c + 1)))
            if r + 1 < rows:
                edges.append((idx(r, c), idx(r + 1, c)))
    return Graph.build(rows * cols, edges)


def _torus(rows, cols):
    if rows < 3 or cols < 3:
        raise GraphFormatError("torus needs rows >= 3 and cols >= 3")
    idx = lambda r, c: r * cols + c
    edges = []
    for r in range(rows):
        for c in range(cols):
            edges.append((idx(r, c), idx(r, (c + 1) % cols)))
            edges.append((idx(r, c), idx((r + 1) % rows, c)))
    return Graph.build(rows * cols, edges)


def _complete(n):
    if n < 2:
        raise GraphFormatError("complete graph needs n >= 2")
    return Graph.build(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def _cycle(n):
    if n < 3:
        raise GraphFormatError("cycle needs n >= 3")
    return Graph.build(n, [(i, (i + 1) % n) for i in range(n)])


def _tree_random(n, seed):
    if n < 1:
        raise GraphFormatError("tree needs n >= 1")
    if n <= 2:
        return Graph.build(n, [(0, 1)] if n == 2 else [])
    rng = np.random.default_rng(seed)
    prufer = rng.integers(0, n, size=n - 2)
    degree = np.ones(n, dtype=int)
    for x in prufer:
        degree[x] += 1
    edges = []
    import heapq

    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    for x in prufer:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, int(x)))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, int(x))
    u = heapq.heappop(leaves)
    v = heapq.heappop(leaves)
    edges.append((u, v))
    return Graph.build(n, edges)


def _regular_random(n, degree, seed, max_tries=100000):
    if degree < 0 or degree >= n or (n * degree) % 2 != 0:
        raise GraphFormatError(f"no simple {degree}-regular graph on {n} nodes")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), degree)
    for _ in range(max_tries):
        perm = rng.permutation(stubs)
        pairs = perm.reshape(-1, 2)
        seen = set()
        ok = True
        for u, v in pairs:
            u, v = int(u), int(v)
            if u == v or (min(u, v), max(u, v)) in seen:
                ok = False
                break
            seen.add((min(u, v), max(u, v)))
        if ok:
            edges = sorted((min(int(u), int(v)), max(int(u), int(v))) for u, v in pairs)
            return Graph.build(n, edges)
    raise GraphFormatError("failed to sample a simple regular graph (too many tries)")


def builtin_graph(name, **params):
    """Construct a named graph; returns (Graph, Partition or None).

    The partition is the ground-truth community structure when one
    exists (currently only for ``karate``).

    Supported names and parameters:
      karate                      the standard 34-node club network
      grid(rows, cols)            planar lattice
      torus(rows, cols)           lattice with wraparound, rows/cols >= 3
      complete(n)                 all pairs linked
      cycle(n)                    single n-cycle
      tree_random(n, seed)        uniform random labeled tree
      regular_random(n, degree, seed)   uniform random simple regular graph
    """
    known = {
        "karate": (),
        "grid": ("rows", "cols"),
        "torus": ("rows", "cols"),
        "complete": ("n",),
        "cycle": ("n",),
        "tree_random": ("n", "seed"),
        "regular_random": ("n", "degree", "seed"),
    }
    if name not in known:
        raise GraphFormatError(f"unknown builtin {name!r}; choose from {BUILTIN_NAMES}")
    extra = set(params) - set(known[name])
    if extra:
        raise GraphFormatError(f"{name} does not take parameters {sorted(extra)}")
    missing = [p for p in known[name] if p not in params and p != "seed"]
    if missing:
        raise GraphFormatError(f"{name} requires parameters {missing}")

    if name == "karate":
        return _karate()
    if name == "grid":
        return _grid(int(params["rows"]), int(params["cols"])), None
    if name == "torus":
        return _torus(int(params["rows"]), int(params["cols"])), None
    if name == "complete":
        return _complete(int(params["n"])), None
    if name == "cycle":
        return _cycle(int(params["n"])), None
    if name == "tree_random":
        return _tree_random(int(params["n"]), params.get("seed", 0)), None
    return _regular_random(int(params["n"]), int(params["degree"]), params.get("seed", 0)), None

"""Two-subnetwork communication graphs: adjacency algebra, norms, candidate edges, PageRank.

Node indices are 0-based everywhere inside the package.  The I/O helpers
(``to_document`` / ``from_document``) speak 1-based indices.
"""

from __future__ import annotations

import dataclasses
import itertools
from typing import Iterable, Sequence

import numpy as np


@dataclasses.dataclass(frozen=True)
class Topology:
    """Undirected weighted graph split into Network 1 (``0..split_index-1``) and Network 2."""

    n_total: int
    split_index: int
    edges: tuple[tuple[int, int, float], ...]
    adjacency: np.ndarray = dataclasses.field(repr=False, compare=False)

    def __init__(self, n_total: int, split_index: int, edges: Iterable[Sequence]) -> None:
        n_total = int(n_total)
        split_index = int(split_index)
        if not 1 <= split_index < n_total:
            raise ValueError(f"need 1 <= split_index < n_total, got {split_index}, {n_total}")
        canon = {}
        for e in edges:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < n_total and 0 <= j < n_total):
                raise ValueError(f"edge ({i}, {j}) out of range for {n_total} nodes")
            if not w > 0:
                raise ValueError(f"edge ({i}, {j}) has non-positive weight {w}")
            key = (min(i, j), max(i, j))
            if key in canon:
                raise ValueError(f"duplicate edge {key}")
            canon[key] = w
        ordered = tuple((i, j, canon[(i, j)]) for i, j in sorted(canon))
        A = np.zeros((n_total, n_total))
        for i, j, w in ordered:
            A[i, j] = A[j, i] = w
        A.setflags(write=False)
        object.__setattr__(self, "n_total", n_total)
        object.__setattr__(self, "split_index", split_index)
        object.__setattr__(self, "edges", ordered)
        object.__setattr__(self, "adjacency", A)

    @classmethod
    def from_adjacency(cls, adjacency, split_index: int) -> "Topology":
        A = np.asarray(adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(A) != 0):
            raise ValueError("adjacency must have a zero diagonal")
        if np.any(A < 0):
            raise ValueError("adjacency must be nonnegative")
        iu, ju = np.nonzero(np.triu(A, 1))
        return cls(A.shape[0], split_index, [(i, j, A[i, j]) for i, j in zip(iu, ju)])

    # -- partition helpers

    @property
    def network1(self) -> np.ndarray:
        return np.arange(self.split_index)

    @property
    def network2(self) -> np.ndarray:
        return np.arange(self.split_index, self.n_total)

    def network_of(self, node: int) -> int:
        return 1 if node < self.split_index else 2

    def nodes_of(self, network: int) -> np.ndarray:
        if network == 1:
            return self.network1
        if network == 2:
            return self.network2
        raise ValueError(f"network must be 1 or 2, got {network}")

    def border_nodes(self) -> np.ndarray:
        """Nodes with at least one edge into the other subnetwork."""
        m = self.split_index
        A = self.adjacency
        cross = np.zeros(self.n_total, dtype=bool)
        cross[:m] = A[:m, m:].any(axis=1)
        cross[m:] = A[m:, :m].any(axis=1)
        return np.flatnonzero(cross)

    def degrees(self) -> np.ndarray:
        return (self.adjacency > 0).sum(axis=1)

    def is_connected(self) -> bool:
        return is_connected(self.adjacency)

    # -- serialization

    def to_document(self) -> dict:
        return {
            "n_total": self.n_total,
            "split_index": self.split_index,
            "edges": [[i + 1, j + 1, w] for i, j, w in self.edges],
        }

    @classmethod
    def from_document(cls, doc: dict) -> "Topology":
        missing = [k for k in ("n_total", "split_index", "edges") if k not in doc]
        if missing:
            raise ValueError(f"topology document missing keys: {', '.join(missing)}")
        edges = []
        for e in doc["edges"]:
            if len(e) not in (2, 3):
                raise ValueError(f"edge entries are [i, j] or [i, j, w], got {e!r}")
            i, j = int(e[0]) - 1, int(e[1]) - 1
            edges.append((i, j, float(e[2]) if len(e) == 3 else 1.0))
        return cls(int(doc["n_total"]), int(doc["split_index"]), edges)


def candidate_edges(topology: Topology) -> list[tuple[int, int]]:
    """Unordered non-edges ``(i, j)`` with ``i < j``, in lexicographic order."""
    A = topology.adjacency
    n = topology.n_total
    return [(i, j) for i, j in itertools.combinations(range(n), 2) if A[i, j] == 0]


@dataclasses.dataclass(frozen=True)
class MatrixNorms:
    one_norm: float
    two_norm: float
    l1_norm: float

    def __iter__(self):
        return iter((self.one_norm, self.two_norm, self.l1_norm))


def matrix_norms(m) -> MatrixNorms:
    """Induced 1-norm (max column sum), spectral norm, and entrywise absolute sum."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return MatrixNorms(0.0, 0.0, 0.0)
    return MatrixNorms(
        float(np.abs(m).sum(axis=0).max()),
        float(np.linalg.norm(m, 2)),
        float(np.abs(m).sum()),
    )


def pagerank(topology: Topology, damping: float = 0.85, tol: float = 1e-12,
             max_iter: int = 100000) -> np.ndarray:
    """Weighted PageRank by power iteration on the damped column-stochastic walk.

    Isolated nodes redistribute their mass uniformly.
    """
    if not 0 < damping < 1:
        raise ValueError("damping must lie in (0, 1)")
    A = np.asarray(topology.adjacency, dtype=float)
    n = A.shape[0]
    deg = A.sum(axis=0)
    dangling = deg == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        W = np.where(dangling, 0.0, A / np.where(dangling, 1.0, deg))
    r = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = damping * (W @ r + r[dangling].sum() / n) + (1 - damping) / n
        nxt /= nxt.sum()
        if np.abs(nxt - r).sum() < tol:
            return nxt
        r = nxt
    raise RuntimeError("PageRank power iteration did not converge")


def is_connected(adjacency) -> bool:
    A = np.asarray(adjacency)
    n = A.shape[0]
    if n == 0:
        return True
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = [0]
    while frontier:
        nxt = []
        for i in frontier:
            nb = np.flatnonzero((A[i] != 0) & ~seen)
            seen[nb] = True
            nxt.extend(nb.tolist())
        frontier = nxt
    return bool(seen.all())


def _connected_er(n: int, p: float, rng: np.random.Generator, max_tries: int) -> np.ndarray:
    if n == 1:
        return np.zeros((1, 1))
    for _ in range(max_tries):
        upper = np.triu(rng.random((n, n)) < p, 1)
        A = (upper | upper.T).astype(float)
        if is_connected(A):
            return A
    raise RuntimeError(f"could not draw a connected G({n}, {p}) in {max_tries} tries")


def generate(n1: int, n2: int, p1: float = 0.3, p2: float | None = None, n_cross: int = 2,
             seed: int | None = None, max_tries: int = 10000) -> Topology:
    """Connected Erdos-Renyi graph per subnetwork, joined by ``n_cross`` random cross edges.

    Each subnetwork is redrawn until connected, so the union is connected as
    soon as ``n_cross >= 1``.
    """
    if n1 < 1 or n2 < 1:
        raise ValueError("both subnetworks need at least one node")
    if n_cross < 1 or n_cross > n1 * n2:
        raise ValueError(f"n_cross must lie in [1, {n1 * n2}]")
    p2 = p1 if p2 is None else p2
    for p in (p1, p2):
        if not 0 < p <= 1:
            raise ValueError("edge probabilities must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    n = n1 + n2
    A = np.zeros((n, n))
    A[:n1, :n1] = _connected_er(n1, p1, rng, max_tries)
    A[n1:, n1:] = _connected_er(n2, p2, rng, max_tries)
    flat = rng.choice(n1 * n2, size=n_cross, replace=False)
    for f in flat:
        i, j = divmod(int(f), n2)
        A[i, n1 + j] = A[n1 + j, i] = 1.0
    return Topology.from_adjacency(A, n1)

"""Network graphs: generators, the degree/path-length law, and graph metrics.

Edges are directed (synapses are directional). Clustering is computed on the
symmetrized graph; path lengths follow edge direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from .errors import ConfigError, InfeasibleDegreeError, UndefinedMetricError

HEADER = "soen-topology v1, n={n}"
EXACT_PATH_LIMIT = 10_000
DEFAULT_WEIGHT = 0.5


def required_degree(n_total: float, path_length: float) -> int:
    """Connections per node so that a random graph of ``n_total`` nodes keeps
    average path length ``path_length`` (inverts ``L = ln N / ln k``)."""
    if n_total < 2:
        raise ConfigError("n_total must be >= 2", key="n_total")
    if path_length < 1:
        raise ConfigError("path_length must be >= 1", key="path_length")
    k = math.ceil(n_total ** (1.0 / path_length))
    # float roots of exact powers land a hair above the integer (1e6**0.5 is fine,
    # 1e12**(1/3) is 10000.000000000002)
    while k > 1 and (k - 1) ** path_length >= n_total:
        k -= 1
    while k**path_length < n_total:
        k += 1
    return k


@dataclass(frozen=True, eq=False)
class Topology:
    """Directed graph with per-edge synaptic weights.

    Edges are stored sorted by ``(src, dst)``.
    """

    n_nodes: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        w = np.broadcast_to(np.asarray(self.weight, dtype=float), src.shape).copy()
        if src.shape != dst.shape or src.ndim != 1:
            raise ConfigError("src and dst must be 1-D arrays of equal length", key="edges")
        if self.n_nodes < 0:
            raise ConfigError("n_nodes must be >= 0", key="n_nodes")
        if src.size and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= self.n_nodes):
            raise ConfigError("edge endpoint out of range", key="edges")
        if np.any(src == dst):
            raise ConfigError("self-loops are not allowed", key="edges")
        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        if src.size > 1 and np.any((src[1:] == src[:-1]) & (dst[1:] == dst[:-1])):
            raise ConfigError("duplicate directed edge", key="edges")
        for name, arr in (("src", src), ("dst", dst), ("weight", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_edges(cls, n_nodes, edges: Iterable[Sequence], weight=DEFAULT_WEIGHT, seed=None):
        edges = list(edges)
        src = np.array([e[0] for e in edges], dtype=np.int64)
        dst = np.array([e[1] for e in edges], dtype=np.int64)
        if edges and len(edges[0]) > 2:
            weight = np.array([e[2] for e in edges], dtype=float)
        return cls(n_nodes, src, dst, weight, seed)

    @property
    def n_edges(self) -> int:
        return int(self.src.size)

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n_nodes)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.n_nodes)

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.src.tolist(), self.dst.tolist()))

    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(self.n_edges, dtype=np.int8)
        return sp.csr_matrix((data, (self.src, self.dst)), shape=(self.n_nodes, self.n_nodes))

    def same_edges(self, other: "Topology") -> bool:
        return (
            self.n_nodes == other.n_nodes
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.weight, other.weight)
        )

    # -- edge-list file format -------------------------------------------------

    def to_text(self) -> str:
        lines = [HEADER.format(n=self.n_nodes)]
        lines.extend(
            f"{s} {d} {w!r}" for s, d, w in zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist())
        )
        return "\n".join(lines) + "\n"

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text(), encoding="ascii")

    @classmethod
    def from_text(cls, text: str) -> "Topology":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("soen-topology v1, n="):
            raise ConfigError("missing 'soen-topology v1, n=<N>' header", key="topology")
        try:
            n = int(lines[0].split("n=", 1)[1])
        except ValueError:
            raise ConfigError(f"bad header {lines[0]!r}", key="topology") from None
        edges = []
        for lineno, line in enumerate(lines[1:], start=2):
            parts = line.split()
            if len(parts) != 3:
                raise ConfigError(f"line {lineno}: expected 'src dst weight'", key="topology")
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        if not edges:
            return cls(n, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
        return cls.from_edges(n, edges)

    @classmethod
    def read(cls, path: Union[str, Path]) -> "Topology":
        return cls.from_text(Path(path).read_text(encoding="ascii"))


def _sample_excluding(rng, lo: int, hi: int, hole_lo: int, hole_hi: int, k: int) -> np.ndarray:
    """``k`` distinct integers from ``[lo, hi)`` minus ``[hole_lo, hole_hi)``."""
    size = (hi - lo) - (hole_hi - hole_lo)
    if k > size:
        raise InfeasibleDegreeError(f"quota {k} exceeds population {size}")
    x = rng.choice(size, size=k, replace=False) + lo
    return np.where(x >= hole_lo, x + (hole_hi - hole_lo), x)


def _build(n, targets: list, weight, seed) -> Topology:
    counts = [len(t) for t in targets]
    src = np.repeat(np.arange(n, dtype=np.int64), counts)
    dst = np.concatenate(targets).astype(np.int64) if targets else np.empty(0, np.int64)
    return Topology(n, src, dst, weight, seed)


def generate_random(n: int, k: int, seed: int = 0, weight: float = DEFAULT_WEIGHT) -> Topology:
    """Every node gets exactly ``k`` out-edges to distinct uniform targets."""
    if n < 1:
        raise ConfigError("n must be >= 1", key="n")
    if not 0 <= k < n:
        raise InfeasibleDegreeError(f"out-degree {k} not in [0, {n})")
    rng = np.random.default_rng(seed)
    targets = [_sample_excluding(rng, 0, n, i, i + 1, k) if k else np.empty(0, np.int64) for i in range(n)]
    return _build(n, targets, weight, seed)


def generate_small_world(
    n: int, k: int, beta: float, seed: int = 0, weight: float = DEFAULT_WEIGHT
) -> Topology:
    """Watts-Strogatz graph with directed out-edges.

    Node ``i`` starts wired to its ``k`` ring neighbours (``k/2`` per side);
    each out-edge is then rewired with probability ``beta`` to a uniform target
    that is neither ``i`` nor already a target, so out-degree stays ``k``.
    """
    if not 0 <= beta <= 1:
        raise ConfigError(f"beta={beta} must be in [0, 1]", key="beta")
    if k % 2:
        raise ConfigError(f"k={k} must be even for the ring lattice", key="k")
    if not 0 <= k < n:
        raise InfeasibleDegreeError(f"degree {k} not in [0, {n})")
    rng = np.random.default_rng(seed)
    half = k // 2
    targets = []
    for i in range(n):
        current = []
        for j in range(1, half + 1):
            current.append((i + j) % n)
            current.append((i - j) % n)
        taken = set(current)
        taken.add(i)
        draws = rng.random(k)
        for slot in range(k):
            if draws[slot] >= beta or len(taken) >= n:
                continue
            # rejection sampling: the complement is large whenever rewiring is possible
            while True:
                cand = int(rng.integers(n))
                if cand not in taken:
                    break
            taken.discard(current[slot])
            taken.add(cand)
            current[slot] = cand
        targets.append(np.array(sorted(current), dtype=np.int64))
    return _build(n, targets, weight, seed)


@dataclass(frozen=True)
class HierarchyLevel:
    """One level of a hierarchical-modular network.

    ``group_size`` counts the units from the level below (nodes, for the
    first level). ``intra_degree`` edges go to the node's own group outside
    its sub-group; ``inter_degree`` edges go to sibling groups inside the
    parent group.
    """

    group_size: int
    intra_degree: int = 0
    inter_degree: int = 0

    def __post_init__(self):
        if self.group_size < 1:
            raise ConfigError("group_size must be >= 1", key="levels.group_size")
        if self.intra_degree < 0 or self.inter_degree < 0:
            raise ConfigError("degrees must be >= 0", key="levels")


def generate_hierarchical(
    levels: Sequence[HierarchyLevel], seed: int = 0, weight: float = DEFAULT_WEIGHT, n: Optional[int] = None
) -> Topology:
    """Recursively grouped network, finest level first.

    Node ``i`` belongs to contiguous blocks of size ``B_0 <= B_1 <= ...`` with
    ``B_l`` the product of the first ``l+1`` group sizes. Each node draws its
    quota for ring ``l`` (own level-``l`` block minus own level-``l-1`` block)
    uniformly without replacement.
    """
    levels = [lv if isinstance(lv, HierarchyLevel) else HierarchyLevel(**lv) for lv in levels]
    if not levels:
        raise ConfigError("at least one level is required", key="levels")
    blocks = []
    size = 1
    for lv in levels:
        size *= lv.group_size
        blocks.append(size)
    if n is not None and n != size:
        raise ConfigError(f"product of group sizes {size} != n={n}", key="levels")
    if levels[-1].inter_degree:
        raise InfeasibleDegreeError("top level has no sibling groups for inter_degree")
    quotas = [lv.intra_degree + (levels[l - 1].inter_degree if l else 0) for l, lv in enumerate(levels)]
    for l, q in enumerate(quotas):
        pop = blocks[l] - (blocks[l - 1] if l else 1)
        if q > pop:
            raise InfeasibleDegreeError(f"level {l}: quota {q} exceeds population {pop}")
    rng = np.random.default_rng(seed)
    targets = []
    for i in range(size):
        parts = []
        for l, q in enumerate(quotas):
            if not q:
                continue
            lo = i - i % blocks[l]
            if l:
                hole_lo = i - i % blocks[l - 1]
                hole_hi = hole_lo + blocks[l - 1]
            else:
                hole_lo, hole_hi = i, i + 1
            parts.append(_sample_excluding(rng, lo, lo + blocks[l], hole_lo, hole_hi, q))
        targets.append(np.sort(np.concatenate(parts)) if parts else np.empty(0, np.int64))
    return _build(size, targets, weight, seed)


def group_of(levels: Sequence[HierarchyLevel], node: int, level: int = 0) -> int:
    size = 1
    for lv in levels[: level + 1]:
        size *= lv.group_size
    return node // size


# -- metrics -------------------------------------------------------------------


@dataclass(frozen=True)
class PathLengthStats:
    mean: float
    reachable_pairs: int
    total_pairs: int
    n_sources: int
    exact: bool

    @property
    def disconnected_fraction(self) -> float:
        return 1.0 - self.reachable_pairs / self.total_pairs if self.total_pairs else 0.0

    @property
    def connected(self) -> bool:
        return self.reachable_pairs == self.total_pairs


def path_length_stats(
    t: Topology,
    sample_size: Optional[int] = None,
    seed: int = 0,
    exact_limit: int = EXACT_PATH_LIMIT,
    chunk: int = 256,
) -> PathLengthStats:
    """Mean directed shortest-path length over ordered reachable pairs.

    All sources are used when ``n <= exact_limit``; above that, ``sample_size``
    sources are drawn uniformly without replacement.
    """
    n = t.n_nodes
    if n < 2:
        raise UndefinedMetricError("path length needs at least two nodes")
    if n <= exact_limit:
        sources = np.arange(n)
        exact = True
    else:
        m = min(n, sample_size or 1000)
        sources = np.sort(np.random.default_rng(seed).choice(n, size=m, replace=False))
        exact = m == n
    adj = t.adjacency()
    total = 0
    reachable = 0
    for start in range(0, sources.size, chunk):
        idx = sources[start : start + chunk]
        dist = shortest_path(adj, method="D", directed=True, unweighted=True, indices=idx)
        finite = np.isfinite(dist)
        # each row includes its own source at distance 0
        reachable += int(finite.sum()) - idx.size
        total += int(dist[finite].sum())
    if reachable == 0:
        raise UndefinedMetricError("no ordered pair of distinct nodes is connected")
    return PathLengthStats(total / reachable, reachable, sources.size * (n - 1), int(sources.size), exact)


def avg_path_length(t: Topology, sample_size: Optional[int] = None, seed: int = 0) -> float:
    return path_length_stats(t, sample_size, seed).mean


def _undirected(t: Topology) -> sp.csr_matrix:
    a = t.adjacency().astype(np.int64)
    a = ((a + a.T) > 0).astype(np.int64)
    a.setdiag(0)
    a.eliminate_zeros()
    return a.tocsr()


def local_clustering(t: Topology) -> np.ndarray:
    a = _undirected(t)
    deg = np.asarray(a.sum(axis=1)).ravel()
    closed = np.asarray((a @ a).multiply(a).sum(axis=1)).ravel()  # 2 x triangles at node
    pairs = deg * (deg - 1)
    out = np.zeros(t.n_nodes)
    ok = deg >= 2
    out[ok] = closed[ok] / pairs[ok]
    return out


def clustering_coefficient(t: Topology) -> float:
    """Mean local clustering of the symmetrized graph; nodes with degree < 2 count as 0."""
    if t.n_nodes == 0:
        raise UndefinedMetricError("clustering of an empty graph")
    # fsum: the mean is independent of summation order
    return math.fsum(local_clustering(t).tolist()) / t.n_nodes


@dataclass(frozen=True)
class GraphMetrics:
    avg_path_length: float
    disconnected_fraction: float
    clustering: float
    degree_histogram: dict = field(default_factory=dict)
    n_nodes: int = 0
    n_edges: int = 0
    exact: bool = True

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "n_edges": self.n_edges,
            "avg_path_length": self.avg_path_length,
            "disconnected_fraction": self.disconnected_fraction,
            "clustering": self.clustering,
            "exact": self.exact,
            "degree_histogram": {str(k): v for k, v in sorted(self.degree_histogram.items())},
        }


def graph_metrics(t: Topology, sample_size: Optional[int] = None, seed: int = 0) -> GraphMetrics:
    stats = path_length_stats(t, sample_size, seed)
    values, counts = np.unique(t.out_degree(), return_counts=True)
    return GraphMetrics(
        avg_path_length=stats.mean,
        disconnected_fraction=stats.disconnected_fraction,
        clustering=clustering_coefficient(t),
        degree_histogram=dict(zip(values.tolist(), counts.tolist())),
        n_nodes=t.n_nodes,
        n_edges=t.n_edges,
        exact=stats.exact,
    )

"""Graphs with per-arc features, per-seed training instances and feature preprocessing."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

# (hop(src), hop(dst)) -> edge type code
HOP_PAIRS = ((0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2))
EDGE_TYPE_CODES = {pair: code for code, pair in enumerate(HOP_PAIRS)}
N_EDGE_TYPES = len(HOP_PAIRS)


class UntrainableInstance(ValueError):
    """Raised when a seed ends up with no destinations or no no-link nodes."""


class Graph:
    """Directed graph in CSR order with one feature vector per arc.

    Arcs are sorted by ``(src, dst)`` so the out-arcs of node ``u`` are
    ``indptr[u]:indptr[u + 1]``.  ``edge_ids`` maps each arc to the row of the
    undirected edge it came from; mirrored arcs of an undirected edge share an
    id (and the same feature values).
    """

    def __init__(self, node_count, src, dst, features, edge_ids=None):
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(len(src), -1) if len(src) else features.reshape(0, 0)
        if len(src) != len(dst) or features.shape[0] != len(src):
            raise ValueError("src, dst and features must have the same number of arcs")
        if node_count < 0:
            raise ValueError("node_count must be nonnegative")
        if len(src) and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= node_count):
            raise ValueError(f"node ids must lie in [0, {node_count})")
        if np.any(src == dst):
            bad = int(np.flatnonzero(src == dst)[0])
            raise ValueError(f"self-loop arc at node {int(src[bad])}")
        if edge_ids is None:
            edge_ids = np.arange(len(src), dtype=np.int64)
        edge_ids = np.asarray(edge_ids, dtype=np.int64).ravel()

        order = np.lexsort((dst, src))
        src, dst, features, edge_ids = src[order], dst[order], features[order], edge_ids[order]
        if len(src) > 1:
            dup = (src[1:] == src[:-1]) & (dst[1:] == dst[:-1])
            if dup.any():
                i = int(np.flatnonzero(dup)[0])
                raise ValueError(f"duplicate arc ({int(src[i])}, {int(dst[i])})")

        self.node_count = int(node_count)
        self.src = src
        self.dst = dst
        self.features = features
        self.edge_ids = edge_ids
        self.indptr = np.zeros(self.node_count + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.node_count), out=self.indptr[1:])
        for a in (self.src, self.dst, self.features, self.edge_ids, self.indptr):
            a.flags.writeable = False

    @classmethod
    def from_undirected(cls, node_count, edges, features) -> "Graph":
        """Store each undirected edge as two opposed arcs sharing one feature row."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        features = np.asarray(features, dtype=np.float64).reshape(len(edges), -1)
        ids = np.arange(len(edges), dtype=np.int64)
        return cls(
            node_count,
            np.concatenate([edges[:, 0], edges[:, 1]]),
            np.concatenate([edges[:, 1], edges[:, 0]]),
            np.concatenate([features, features]),
            np.concatenate([ids, ids]),
        )

    @property
    def m(self) -> int:
        return self.features.shape[1]

    @property
    def arc_count(self) -> int:
        return len(self.src)

    @cached_property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def out_neighbors(self, u: int) -> np.ndarray:
        return self.dst[self.indptr[u] : self.indptr[u + 1]]

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Binary adjacency matrix, rows = sources."""
        return sp.csr_matrix(
            (np.ones(self.arc_count), self.dst, self.indptr), shape=(self.node_count, self.node_count)
        )

    def with_features(self, features) -> "Graph":
        features = np.asarray(features, dtype=np.float64)
        return Graph(self.node_count, self.src, self.dst, features, self.edge_ids)

    def subgraph(self, nodes: Sequence[int]) -> tuple["Graph", np.ndarray]:
        """Induced subgraph on ``nodes``; returns it with the sorted original ids."""
        node_ids = np.unique(np.asarray(nodes, dtype=np.int64))
        local = np.full(self.node_count, -1, dtype=np.int64)
        local[node_ids] = np.arange(len(node_ids))
        keep = (local[self.src] >= 0) & (local[self.dst] >= 0)
        sub = Graph(
            len(node_ids),
            local[self.src[keep]],
            local[self.dst[keep]],
            self.features[keep],
            self.edge_ids[keep],
        )
        return sub, node_ids

    def __repr__(self):
        return f"Graph(node_count={self.node_count}, arcs={self.arc_count}, m={self.m})"


def reachable_from(graph: Graph, seed: int) -> np.ndarray:
    """Nodes reachable from ``seed`` along out-arcs (sorted, includes seed)."""
    seen = np.zeros(graph.node_count, dtype=bool)
    seen[seed] = True
    queue = deque([seed])
    while queue:
        u = queue.popleft()
        for v in graph.out_neighbors(u):
            if not seen[v]:
                seen[v] = True
                queue.append(int(v))
    return np.flatnonzero(seen)


def hop_distances(graph: Graph, seed: int) -> np.ndarray:
    """BFS hop counts from ``seed`` on the undirected view of the graph (-1 = unreachable)."""
    sym = (graph.adjacency + graph.adjacency.T).tocsr()
    hops = np.full(graph.node_count, -1, dtype=np.int64)
    hops[seed] = 0
    frontier = np.array([seed])
    depth = 0
    while len(frontier):
        depth += 1
        nxt = np.unique(sym[frontier].indices)
        nxt = nxt[hops[nxt] < 0]
        hops[nxt] = depth
        frontier = nxt
    return hops


@dataclass(frozen=True, eq=False)
class TrainingInstance:
    """A seed node with its local graph and labelled candidates.

    All node ids are local to ``graph``; ``node_ids`` maps them back to the
    ids of the graph the instance was cut from.
    """

    seed: int
    graph: Graph
    destinations: np.ndarray
    nolinks: np.ndarray
    node_ids: np.ndarray = field(default=None)
    labelled: bool = True

    def __post_init__(self):
        d = np.unique(np.asarray(self.destinations, dtype=np.int64))
        l = np.unique(np.asarray(self.nolinks, dtype=np.int64))
        object.__setattr__(self, "destinations", d)
        object.__setattr__(self, "nolinks", l)
        if self.node_ids is None:
            object.__setattr__(self, "node_ids", np.arange(self.graph.node_count, dtype=np.int64))
        if self.labelled and (len(d) == 0 or len(l) == 0):
            raise UntrainableInstance(f"seed {self.global_seed}: |D|={len(d)}, |L|={len(l)}")
        if np.intersect1d(d, l).size:
            raise ValueError("destinations and no-link nodes overlap")
        if self.seed in d or self.seed in l:
            raise ValueError("seed cannot be a candidate")

    @property
    def global_seed(self) -> int:
        return int(self.node_ids[self.seed]) if self.node_ids is not None else self.seed

    @cached_property
    def candidates(self) -> np.ndarray:
        return np.union1d(self.destinations, self.nolinks)

    @cached_property
    def hops(self) -> np.ndarray:
        return hop_distances(self.graph, self.seed)

    @cached_property
    def arc_types(self) -> np.ndarray:
        """Edge-type code of every arc of the local graph."""
        hs, hd = self.hops[self.graph.src], self.hops[self.graph.dst]
        if len(hs) and (max(hs.max(), hd.max()) > 2 or min(hs.min(), hd.min()) < 0):
            raise AssertionError("local graph has nodes beyond two hops of the seed")
        # pair (a, b) with |a - b| <= 1 and a + b > 0 -> code
        lut = np.full((3, 3), -1, dtype=np.int64)
        for code, (a, b) in enumerate(HOP_PAIRS):
            lut[a, b] = code
        codes = lut[hs, hd]
        if np.any(codes < 0):
            raise AssertionError("arc with undefined edge type")
        return codes

    def with_graph(self, graph: Graph) -> "TrainingInstance":
        new = replace(self, graph=graph)
        # hop labels depend on topology only, which is unchanged
        if "hops" in self.__dict__:
            new.__dict__["hops"] = self.hops
        return new


def two_hop_instance(
    graph: Graph,
    seed: int,
    known_links: Iterable[int] = (),
    future_links: Iterable[int] = (),
    min_common: int = 4,
    labelled: bool = True,
) -> TrainingInstance:
    """Cut the pruned two-hop neighbourhood of ``seed`` and label its candidates.

    Two-hop nodes are kept when at least ``min_common`` first-hop neighbours
    point to them.  Candidates are kept two-hop nodes outside ``known_links``.
    Raises :class:`UntrainableInstance` when D or L comes out empty, unless
    ``labelled`` is false (prediction only).
    """
    if not 0 <= seed < graph.node_count:
        raise ValueError(f"seed {seed} out of range")
    known = set(int(x) for x in known_links)
    future = set(int(x) for x in future_links)
    if known & future:
        raise ValueError("future_links must be disjoint from known_links")

    first = graph.out_neighbors(seed)
    first_set = set(first.tolist())
    common: dict[int, int] = {}
    for u in first:
        for v in graph.out_neighbors(u).tolist():
            if v != seed and v not in first_set:
                common[v] = common.get(v, 0) + 1
    second = sorted(v for v, c in common.items() if c >= min_common)

    local, node_ids = graph.subgraph([seed, *first.tolist(), *second])
    to_local = {int(g): i for i, g in enumerate(node_ids)}
    cand = [v for v in second if v not in known]
    dest = [to_local[v] for v in cand if v in future]
    nolink = [to_local[v] for v in cand if v not in future]
    if labelled and (not dest or not nolink):
        raise UntrainableInstance(f"seed {seed}: |D|={len(dest)}, |L|={len(nolink)} after two-hop pruning")
    return TrainingInstance(
        to_local[seed], local, np.array(dest, dtype=np.int64), np.array(nolink, dtype=np.int64), node_ids, labelled
    )


def explicit_instance(graph: Graph, seed: int, destinations, nolinks, labelled: bool = True) -> TrainingInstance:
    """Instance with given D and L; the local graph is everything reachable from ``seed``."""
    nodes = reachable_from(graph, seed)
    local, node_ids = graph.subgraph(nodes)
    to_local = np.full(graph.node_count, -1, dtype=np.int64)
    to_local[node_ids] = np.arange(len(node_ids))
    d = to_local[np.asarray(list(destinations), dtype=np.int64)]
    l = to_local[np.asarray(list(nolinks), dtype=np.int64)]
    dropped = int((d < 0).sum() + (l < 0).sum())
    if dropped:
        logger.warning("seed %d: dropped %d candidates unreachable from the seed", seed, dropped)
    return TrainingInstance(int(to_local[seed]), local, d[d >= 0], l[l >= 0], node_ids, labelled)


def edge_type(instance: TrainingInstance, src: int, dst: int) -> int:
    """Edge-type code of arc ``(src, dst)`` (local ids) from the hop distances of its ends."""
    g = instance.graph
    lo, hi = g.indptr[src], g.indptr[src + 1]
    pos = lo + np.searchsorted(g.dst[lo:hi], dst)
    if pos >= hi or g.dst[pos] != dst:
        raise KeyError(f"no arc ({src}, {dst}) in the local graph")
    pair = (int(instance.hops[src]), int(instance.hops[dst]))
    if pair not in EDGE_TYPE_CODES:
        raise AssertionError(f"arc ({src}, {dst}) has hop pair {pair}")
    return EDGE_TYPE_CODES[pair]


@dataclass(frozen=True)
class FeatureTransform:
    """Per-column centring and scaling followed by an appended constant column."""

    mean: np.ndarray
    scale: np.ndarray
    degenerate: np.ndarray

    @property
    def m_in(self) -> int:
        return len(self.mean)

    @property
    def m_out(self) -> int:
        return len(self.mean) + 1

    def apply(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.shape[1] != self.m_in:
            raise ValueError(f"expected {self.m_in} raw features, got {features.shape[1]}")
        out = np.empty((features.shape[0], self.m_out))
        out[:, :-1] = (features - self.mean) / self.scale
        out[:, -1] = 1.0
        return out

    def apply_instance(self, instance: TrainingInstance) -> TrainingInstance:
        return instance.with_graph(instance.graph.with_features(self.apply(instance.graph.features)))

    @classmethod
    def identity(cls, m: int) -> "FeatureTransform":
        return cls(np.zeros(m), np.ones(m), np.zeros(m, dtype=bool))


def fit_transform(dataset: Sequence[TrainingInstance]) -> FeatureTransform:
    """Population mean/stdev of every feature column over all arcs of all instances."""
    if not dataset:
        raise ValueError("empty dataset")
    feats = np.concatenate([inst.graph.features for inst in dataset])
    if feats.shape[0] == 0:
        raise ValueError("dataset has no arcs")
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    degenerate = ~(std > 1e-12 * np.maximum(1.0, np.abs(mean)))
    if degenerate.any():
        logger.info("zero-variance feature columns: %s", np.flatnonzero(degenerate).tolist())
    scale = np.where(degenerate, 1.0, std)
    return FeatureTransform(mean, scale, degenerate)


def standardize_features(dataset: Sequence[TrainingInstance]):
    """Standardise all feature columns and append a constant 1 column.

    Returns the transformed dataset and the fitted :class:`FeatureTransform`.
    """
    transform = fit_transform(dataset)
    return [transform.apply_instance(inst) for inst in dataset], transform


def add_common_friends_feature(instance: TrainingInstance) -> TrainingInstance:
    """Append to every arc ``(u, w)`` the number of neighbours ``w`` shares with the seed."""
    g = instance.graph
    seed_nbrs = np.zeros(g.node_count)
    seed_nbrs[g.out_neighbors(instance.seed)] = 1.0
    shared = g.adjacency @ seed_nbrs
    feats = np.column_stack([g.features, shared[g.dst]])
    # arcs of one undirected edge no longer carry identical features
    new = Graph(g.node_count, g.src, g.dst, feats)
    return instance.with_graph(new)

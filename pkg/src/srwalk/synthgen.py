"""Synthetic link-prediction data: copying-model graphs with planted edge strengths."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .graph_model import Graph, TrainingInstance, explicit_instance, hop_distances
from .walker import pagerank, transition_from_strengths

MAX_RESAMPLE = 100


@dataclass(frozen=True)
class SynthConfig:
    n: int = 1000
    edges_per_node: int = 3
    uniform_prob: float = 0.8
    true_weights: tuple = (1.0, -1.0)
    alpha: float = 0.2
    k: int = 20
    target_mode: str = "deterministic"
    noise: float = 0.0
    seed: int = 0
    two_hop_only: bool = False

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("need at least three nodes")
        if not 0.0 <= self.uniform_prob <= 1.0:
            raise ValueError("uniform_prob must be a probability")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.noise < 0:
            raise ValueError("noise variance must be nonnegative")
        if self.target_mode not in ("deterministic", "probabilistic"):
            raise ValueError("target_mode must be 'deterministic' or 'probabilistic'")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class SynthGraph:
    """One generated graph: clean and observed features, seed and labelled targets."""

    graph: Graph
    clean: Graph
    seed: int
    destinations: np.ndarray
    nolinks: np.ndarray
    true_scores: np.ndarray = field(repr=False)

    def instance(self) -> TrainingInstance:
        return explicit_instance(self.graph, self.seed, self.destinations, self.nolinks)


def copying_graph(config: SynthConfig, rng: np.random.Generator) -> Graph:
    """Undirected copying-model graph grown from a triangle, without features.

    Each arriving node links to ``edges_per_node`` distinct earlier nodes, each
    picked uniformly with probability ``uniform_prob`` and otherwise
    proportionally to current degree.
    """
    edges = [(0, 1), (1, 2), (0, 2)]
    # every edge contributes both endpoints, so a uniform draw is degree-proportional
    endpoints = [0, 1, 1, 2, 0, 2]
    for u in range(3, config.n):
        chosen: list[int] = []
        for _ in range(min(config.edges_per_node, u)):
            for _attempt in range(MAX_RESAMPLE):
                if rng.random() < config.uniform_prob:
                    v = int(rng.integers(u))
                else:
                    v = endpoints[int(rng.integers(len(endpoints)))]
                if v != u and v not in chosen:
                    break
            else:
                free = np.setdiff1d(np.arange(u), chosen)
                v = int(free[rng.integers(len(free))])
            chosen.append(v)
            edges.append((u, v))
            endpoints += [u, v]
    edges = np.asarray(edges, dtype=np.int64)
    return Graph.from_undirected(config.n, edges, np.zeros((len(edges), 0)))


def plant_features(graph: Graph, rng: np.random.Generator, m: int = 2) -> Graph:
    """Give each undirected edge ``m`` iid standard normal features, shared by both arcs."""
    n_edges = int(graph.edge_ids.max()) + 1 if graph.arc_count else 0
    feats = rng.standard_normal((n_edges, m))
    return graph.with_features(feats[graph.edge_ids])


def true_strengths(graph: Graph, config: SynthConfig) -> np.ndarray:
    return np.exp(graph.features @ np.asarray(config.true_weights, dtype=np.float64))


def add_noise(graph: Graph, variance: float, rng: np.random.Generator) -> Graph:
    """Add N(0, variance) to every feature of every undirected edge (shared by both arcs)."""
    if variance < 0:
        raise ValueError("noise variance must be nonnegative")
    if variance == 0:
        return graph
    n_edges = int(graph.edge_ids.max()) + 1 if graph.arc_count else 0
    noise = rng.normal(0.0, np.sqrt(variance), (n_edges, graph.m))
    return graph.with_features(graph.features + noise[graph.edge_ids])


def eligible_targets(graph: Graph, seed: int, two_hop_only: bool = False) -> np.ndarray:
    mask = np.ones(graph.node_count, dtype=bool)
    mask[seed] = False
    mask[graph.out_neighbors(seed)] = False
    if two_hop_only:
        mask &= hop_distances(graph, seed) == 2
    return np.flatnonzero(mask)


def make_targets(scores: np.ndarray, graph: Graph, seed: int, config: SynthConfig, rng: np.random.Generator):
    """Pick K destinations among non-neighbours of the seed; the rest become no-link nodes.

    Deterministic mode takes the K best by ``scores`` (ties by node id);
    probabilistic mode samples K distinct nodes with weights ``scores``.
    """
    pool = eligible_targets(graph, seed, config.two_hop_only)
    if len(pool) < config.k:
        raise ValueError(f"only {len(pool)} eligible targets for K={config.k}")
    if config.target_mode == "deterministic":
        order = np.lexsort((pool, -scores[pool]))
        dest = np.sort(pool[order[: config.k]])
    else:
        w = scores[pool]
        dest = np.sort(rng.choice(pool, size=config.k, replace=False, p=w / w.sum()))
    return dest, np.setdiff1d(pool, dest)


def generate(config: SynthConfig, rng: np.random.Generator) -> SynthGraph:
    clean = plant_features(copying_graph(config, rng), rng, len(config.true_weights))
    seed = int(rng.integers(3))
    view = transition_from_strengths(clean, seed, true_strengths(clean, config), config.alpha)
    p_true = pagerank(view)
    dest, nolinks = make_targets(p_true, clean, seed, config, rng)
    observed = add_noise(clean, config.noise, rng)
    return SynthGraph(observed, clean, seed, dest, nolinks, p_true)


def generate_many(config: SynthConfig, count: int) -> list[SynthGraph]:
    """``count`` independent graphs, reproducible from ``config.seed``."""
    streams = np.random.SeedSequence(config.seed).spawn(count)
    return [generate(config, np.random.default_rng(s)) for s in streams]


def disjoint_union(graphs: list[Graph]) -> tuple[Graph, np.ndarray]:
    """Stack graphs into one; returns it and the node-id offset of each part."""
    offsets = np.cumsum([0] + [g.node_count for g in graphs])
    eoff = np.cumsum([0] + [int(g.edge_ids.max()) + 1 if g.arc_count else 0 for g in graphs])
    union = Graph(
        int(offsets[-1]),
        np.concatenate([g.src + o for g, o in zip(graphs, offsets)]),
        np.concatenate([g.dst + o for g, o in zip(graphs, offsets)]),
        np.concatenate([g.features for g in graphs]),
        np.concatenate([g.edge_ids + e for g, e in zip(graphs, eoff)]),
    )
    return union, offsets[:-1]

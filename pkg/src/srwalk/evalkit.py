"""Ranking metrics, unsupervised baselines and the train/test harness."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .graph_model import TrainingInstance
from .trainer import OptimizationError, TrainConfig, TrainReport, score_instance, train
from .walker import normalize_candidates, pagerank, transition_from_strengths

logger = logging.getLogger(__name__)

BASELINES = ("rwr_unweighted", "adamic_adar", "common_friends", "degree")
# stands in for 1/ln(1) when a shared neighbour has degree one
ADAMIC_ADAR_CAP = 10.0


def auc(scores, D, L) -> float:
    """Fraction of (d, l) pairs ranked correctly; ties count one half."""
    D = np.asarray(D, dtype=np.int64)
    L = np.asarray(L, dtype=np.int64)
    if len(D) == 0 or len(L) == 0:
        raise ValueError("AUC undefined with an empty side")
    scores = np.asarray(scores, dtype=np.float64)
    ranks = rankdata(np.concatenate([scores[D], scores[L]]))
    nd, nl = len(D), len(L)
    return float((ranks[:nd].sum() - nd * (nd + 1) / 2.0) / (nd * nl))


def prec_at_k(scores, candidates, D, k: int = 20) -> int:
    """Number of destinations among the top ``k`` candidates (ties by node id)."""
    c = np.asarray(candidates, dtype=np.int64)
    if len(c) == 0:
        raise ValueError("no candidates")
    scores = np.asarray(scores, dtype=np.float64)
    top = c[np.lexsort((c, -scores[c]))[:k]]
    return int(np.isin(top, np.asarray(D)).sum())


def roc_points(scores, D, L) -> tuple[np.ndarray, np.ndarray]:
    """ROC curve (fpr, tpr) sweeping a threshold down through the distinct scores."""
    s = np.concatenate([np.asarray(scores)[D], np.asarray(scores)[L]])
    y = np.concatenate([np.ones(len(D)), np.zeros(len(L))])
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    cut = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tp = np.cumsum(y)[cut]
    fp = np.cumsum(1 - y)[cut]
    return np.r_[0.0, fp / len(L)], np.r_[0.0, tp / len(D)]


def _neighbor_sets(instance: TrainingInstance):
    g = instance.graph
    return [set(g.out_neighbors(u).tolist()) for u in range(g.node_count)]


def baseline_scores(instance: TrainingInstance, method: str, alpha: float = 0.3, eps: float = 1e-12) -> np.ndarray:
    """Scores of every local node under an unsupervised method (only candidates are meaningful)."""
    g = instance.graph
    if method == "rwr_unweighted":
        view = transition_from_strengths(g, instance.seed, np.ones(g.arc_count), alpha)
        p, _ = normalize_candidates(pagerank(view, eps), None, instance.candidates)
        return p
    if method == "degree":
        return g.out_degree.astype(np.float64)
    seed_nbrs = np.zeros(g.node_count, dtype=bool)
    seed_nbrs[g.out_neighbors(instance.seed)] = True
    if method == "common_friends":
        return np.asarray(g.adjacency @ seed_nbrs.astype(np.float64)).ravel()
    if method == "adamic_adar":
        deg = g.out_degree.astype(np.float64)
        with np.errstate(divide="ignore"):
            inv = np.where(deg > 1, 1.0 / np.log(np.maximum(deg, 2.0)), ADAMIC_ADAR_CAP)
        weight = np.where(seed_nbrs, inv, 0.0)
        return np.asarray(g.adjacency @ weight).ravel()
    raise ValueError(f"unknown baseline {method!r}; expected one of {BASELINES}")


@dataclass
class MethodResult:
    method: str
    aucs: list[float]
    precs: list[int]
    failed: bool = False

    @property
    def auc_mean(self) -> float:
        return float(np.mean(self.aucs)) if self.aucs else float("nan")

    @property
    def prec_mean(self) -> float:
        return float(np.mean(self.precs)) if self.precs else float("nan")


@dataclass
class EvalResult:
    rows: list[MethodResult]
    seeds: list[int] = field(default_factory=list)
    report: TrainReport | None = None
    roc: dict = field(default_factory=dict)

    def row(self, method: str) -> MethodResult:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)


def evaluate_scores(method: str, scored: Sequence[np.ndarray], dataset: Sequence[TrainingInstance], k: int = 20):
    aucs = [auc(s, inst.destinations, inst.nolinks) for s, inst in zip(scored, dataset)]
    precs = [prec_at_k(s, inst.candidates, inst.destinations, k) for s, inst in zip(scored, dataset)]
    return MethodResult(method, aucs, precs)


def pooled_roc(scored, dataset):
    """ROC over all test pairs, with each instance's scores normalised over its candidates."""
    parts, ds, ls, off = [], [], [], 0
    for s, inst in zip(scored, dataset):
        c = inst.candidates
        sc = s[c] / s[c].sum() if s[c].sum() > 0 else s[c]
        pos = np.searchsorted(c, inst.destinations)
        neg = np.searchsorted(c, inst.nolinks)
        parts.append(sc)
        ds.append(pos + off)
        ls.append(neg + off)
        off += len(c)
    return roc_points(np.concatenate(parts), np.concatenate(ds), np.concatenate(ls))


def split_dataset(dataset: Sequence[TrainingInstance], seed: int):
    """Seeded 50/50 shuffle split into (train, test)."""
    idx = np.random.default_rng(seed).permutation(len(dataset))
    half = len(dataset) // 2
    return [dataset[i] for i in sorted(idx[:half])], [dataset[i] for i in sorted(idx[half:])]


def run_experiment(
    dataset: Sequence[TrainingInstance],
    config: TrainConfig = TrainConfig(),
    k: int = 20,
    split: tuple | None = None,
    methods: Sequence[str] = BASELINES,
) -> EvalResult:
    """Train on half the seeds, evaluate the learned walk and the baselines on the other half.

    ``split`` may pass an explicit ``(train, test)`` pair instead of the
    seeded shuffle.
    """
    if split is None:
        if len(dataset) < 2:
            raise ValueError("need at least two instances to split")
        train_set, test_set = split_dataset(dataset, config.seed)
    else:
        train_set, test_set = split
    rows = []
    roc = {}
    report = None
    try:
        report = train(train_set, config)
        scored = [score_instance(report.model, inst, config) for inst in test_set]
        rows.append(evaluate_scores("srw", scored, test_set, k))
        roc["srw"] = pooled_roc(scored, test_set)
    except OptimizationError as exc:
        logger.error("training failed: %s", exc)
        rows.append(MethodResult("srw", [], [], failed=True))
    for method in methods:
        scored = [baseline_scores(inst, method, config.alpha, config.eps) for inst in test_set]
        rows.append(evaluate_scores(method, scored, test_set, k))
        roc[method] = pooled_roc(scored, test_set)
    return EvalResult(rows, [inst.global_seed for inst in test_set], report, roc)

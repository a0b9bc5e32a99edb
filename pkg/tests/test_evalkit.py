import math

import numpy as np
import pytest

from conftest import random_instance
from srwalk.evalkit import (
    ADAMIC_ADAR_CAP,
    auc,
    baseline_scores,
    prec_at_k,
    roc_points,
    run_experiment,
    split_dataset,
)
from srwalk.graph_model import Graph, TrainingInstance, standardize_features
from srwalk.strength import Model
from srwalk.trainer import TrainConfig, predict, score_instance


def brute_auc(scores, D, L):
    total = 0.0
    for d in D:
        for l in L:
            total += 1.0 if scores[d] > scores[l] else 0.5 if scores[d] == scores[l] else 0.0
    return total / (len(D) * len(L))


def test_auc_examples():
    assert auc([0.9, 0.8, 0.2, 0.1], [0, 1], [2, 3]) == 1.0
    assert auc([0.3] * 5, [0, 1], [2, 3, 4]) == 0.5
    assert auc([0.5, 0.6, 0.4], [0], [1, 2]) == 0.5
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [], [1])


def test_auc_matches_pair_count(rng):
    for _ in range(100):
        c = int(rng.integers(2, 40))
        scores = np.round(rng.random(c) * 10) / 10
        perm = rng.permutation(c)
        cut = int(rng.integers(1, c))
        D, L = perm[:cut], perm[cut:]
        assert auc(scores, D, L) == pytest.approx(brute_auc(scores, D, L), abs=1e-12)


def test_prec_examples():
    scores = np.arange(30, 0, -1, dtype=float)
    assert prec_at_k(scores, np.arange(30), np.arange(25), k=20) == 20
    assert prec_at_k(scores, np.arange(30), np.arange(20, 30), k=20) == 0


def test_prec_matches_sort_oracle(rng):
    for _ in range(50):
        c = int(rng.integers(5, 60))
        scores = np.round(rng.random(c) * 5) / 5
        cands = np.sort(rng.choice(100, c, replace=False))
        full = np.zeros(100)
        full[cands] = scores
        D = rng.choice(cands, int(rng.integers(1, c)), replace=False)
        ranked = sorted(cands.tolist(), key=lambda u: (-full[u], u))
        assert prec_at_k(full, cands, D, k=20) == len(set(ranked[:20]) & set(D.tolist()))


def test_roc_endpoints_and_area(rng):
    scores = rng.random(50)
    D, L = np.arange(10), np.arange(10, 50)
    fpr, tpr = roc_points(scores, D, L)
    assert (fpr[0], tpr[0], fpr[-1], tpr[-1]) == (0.0, 0.0, 1.0, 1.0)
    assert np.trapezoid(tpr, fpr) == pytest.approx(auc(scores, D, L), abs=1e-12)


def _aa_instance():
    s, a, b, v, x, y, z = range(7)
    g = Graph.from_undirected(7, [(s, a), (s, b), (a, v), (b, v), (b, x), (b, y), (z, x)], np.zeros((7, 0)))
    return TrainingInstance(s, g, [v], [x, y], labelled=True), dict(s=s, a=a, b=b, v=v, x=x, y=y, z=z)


def test_adamic_adar_example():
    inst, n = _aa_instance()
    aa = baseline_scores(inst, "adamic_adar")
    assert aa[n["v"]] == pytest.approx(1 / math.log(2) + 1 / math.log(4), rel=1e-12)
    assert aa[n["v"]] == pytest.approx(2.1640, abs=5e-5)
    assert aa[n["z"]] == 0
    cf = baseline_scores(inst, "common_friends")
    assert cf[n["v"]] == 2 and cf[n["x"]] == 1 and cf[n["z"]] == 0
    assert baseline_scores(inst, "degree")[n["b"]] == 4


def test_adamic_adar_degree_one_cap():
    # directed: node 1 is followed by both 0 and 2 but has a single out-arc
    g = Graph(3, [0, 2, 1], [1, 1, 0], np.zeros((3, 0)))
    inst = TrainingInstance(0, g, [2], [], labelled=False)
    assert baseline_scores(inst, "adamic_adar")[2] == ADAMIC_ADAR_CAP


def test_baselines_match_set_oracle(rng):
    inst = random_instance(rng, n=30)
    g = inst.graph
    nb = [set(g.out_neighbors(u).tolist()) for u in range(g.node_count)]
    aa = baseline_scores(inst, "adamic_adar")
    cf = baseline_scores(inst, "common_friends")
    for v in inst.candidates:
        shared = nb[inst.seed] & nb[v]
        assert cf[v] == len(shared)
        expect = sum(1 / math.log(len(nb[u])) if len(nb[u]) > 1 else ADAMIC_ADAR_CAP for u in shared)
        assert aa[v] == pytest.approx(expect, rel=1e-12)


def test_unweighted_rwr_equals_flat_model(rng):
    inst = random_instance(rng, n=25)
    cfg = TrainConfig(alpha=0.3)
    rwr = baseline_scores(inst, "rwr_unweighted", cfg.alpha)
    flat = score_instance(Model.zeros("exponential", inst.graph.m), inst, cfg)
    np.testing.assert_allclose(rwr[inst.candidates], flat[inst.candidates], atol=1e-12)


def test_unknown_baseline(rng):
    with pytest.raises(ValueError):
        baseline_scores(random_instance(rng), "jaccard")


def test_split_is_seeded_and_disjoint(rng):
    data = [random_instance(rng, n=12) for _ in range(7)]
    a, b = split_dataset(data, 3)
    assert len(a) == 3 and len(b) == 4
    assert {id(x) for x in a}.isdisjoint({id(x) for x in b})
    assert [id(x) for x in split_dataset(data, 3)[0]] == [id(x) for x in a]


def test_duplicated_instances_give_equal_train_and_test_metrics(rng):
    inst = random_instance(rng, n=25)
    data = [inst] * 6
    cfg = TrainConfig(restarts=1)
    result = run_experiment(data, cfg, k=5)
    model = result.report.model
    srw = result.row("srw")
    train_scores = score_instance(model, inst, cfg)
    assert all(a == auc(train_scores, inst.destinations, inst.nolinks) for a in srw.aucs)
    for method in ("rwr_unweighted", "adamic_adar", "common_friends", "degree"):
        row = result.row(method)
        assert len(set(row.aucs)) == 1 and len(row.aucs) == 3
    assert [n for n, _ in predict(model, inst, cfg)] == [n for n, _ in predict(model, inst, cfg)]


def test_experiment_rows_and_roc(rng):
    raw = [random_instance(rng, n=20) for _ in range(6)]
    data, _ = standardize_features(raw)
    result = run_experiment(data, TrainConfig(restarts=1), k=5)
    assert [r.method for r in result.rows] == ["srw", "rwr_unweighted", "adamic_adar", "common_friends", "degree"]
    assert set(result.roc) == {r.method for r in result.rows}
    for r in result.rows:
        assert 0 <= r.auc_mean <= 1 and 0 <= r.prec_mean <= 5

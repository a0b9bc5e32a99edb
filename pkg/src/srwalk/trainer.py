"""Regularised multi-seed objective, L-BFGS training with restarts, and prediction."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from . import loss as losses
from .graph_model import TrainingInstance, fit_transform
from .loss import LossSpec
from .strength import EDGE_TYPE_MODES, Model
from .walker import (
    DEFAULT_EPS,
    DEFAULT_MAX_ITER,
    WalkNotConverged,
    build_transition,
    normalize_candidates,
    walk,
)

logger = logging.getLogger(__name__)


class OptimizationError(RuntimeError):
    """Every restart failed; ``best`` holds the lowest-objective weights seen (or None)."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.3
    lam: float = 1.0
    loss: LossSpec = field(default_factory=LossSpec)
    family: str = "logistic"
    edge_types: str = "single"
    eps: float = DEFAULT_EPS
    max_power_iters: int = DEFAULT_MAX_ITER
    outer_tol: float = 1e-6
    rel_improvement_tol: float = 1e-9
    max_outer_iters: int = 200
    restarts: int = 3
    seed: int = 0
    normalize: bool = True
    warm_start: bool = True
    history: int = 10
    threads: int | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.restarts < 1:
            raise ValueError("need at least one start")
        if self.edge_types not in EDGE_TYPE_MODES:
            raise ValueError(f"edge_types must be one of {tuple(EDGE_TYPE_MODES)}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    @property
    def n_threads(self) -> int:
        return self.threads or os.cpu_count() or 1


@dataclass
class TrainReport:
    model: Model
    objective: float
    loss_history: list[float]
    auc_history: list[float]
    iterations: int
    evaluations: int
    converged: bool
    start_objectives: list[float] = field(default_factory=list)

    @property
    def weights(self) -> np.ndarray:
        return self.model.weights


def _instance_auc(scores, D, L) -> float:
    from .evalkit import auc

    return auc(scores, D, L)


class Objective:
    """F(w) = |w|^2 + lam * sum over seeds of the pairwise loss, with its gradient.

    Keeps the last stationary vector and derivatives of every instance so
    the next evaluation can start from them.
    """

    def __init__(self, dataset: Sequence[TrainingInstance], config: TrainConfig, template: Model):
        self.dataset = list(dataset)
        self.config = config
        self.template = template
        self.cache: list = [None] * len(self.dataset)
        self.last_w = None
        self.last_scores: list = [None] * len(self.dataset)
        self.evaluations = 0

    def _one(self, i: int, model: Model, derivatives: bool = True):
        cfg = self.config
        inst = self.dataset[i]
        view = build_transition(inst, model, cfg.alpha)
        p0 = dp0 = None
        if cfg.warm_start and self.cache[i] is not None:
            p0, dp0 = self.cache[i]
        try:
            state = walk(view, cfg.eps, cfg.max_power_iters, p0, dp0, derivatives=derivatives)
        except WalkNotConverged as exc:
            raise WalkNotConverged(f"instance {i} (seed {inst.global_seed}): {exc}", exc.last) from exc
        if cfg.normalize:
            p, dp = normalize_candidates(state.p, state.dp, inst.candidates)
        else:
            p, dp = state.p, state.dp
        return state, p, dp

    def instance_terms(self, i: int, model: Model):
        """Loss and loss-gradient (w.r.t. flat weights) contributed by instance ``i``."""
        inst = self.dataset[i]
        state, p, dp = self._one(i, model)
        value, gscore = losses.evaluate(self.config.loss, p, inst.destinations, inst.nolinks)
        idx = inst.candidates
        grad = dp[idx].T @ gscore[idx]
        return value, grad, state, p

    def __call__(self, w: np.ndarray):
        w = np.asarray(w, dtype=np.float64)
        model = self.template.with_flat(w)
        self.evaluations += 1
        value = float(w @ w)
        grad = 2.0 * w
        if self.config.lam == 0:
            return value, grad
        n = len(self.dataset)
        if self.config.n_threads > 1 and n > 1:
            with ThreadPoolExecutor(self.config.n_threads) as pool:
                parts = list(pool.map(lambda i: self.instance_terms(i, model), range(n)))
        else:
            parts = [self.instance_terms(i, model) for i in range(n)]
        # fixed instance order keeps the reduction deterministic
        data = 0.0
        dgrad = np.zeros_like(w)
        for i, (v, g, state, p) in enumerate(parts):
            data += v
            dgrad += g
            self.cache[i] = (state.p, state.dp)
            self.last_scores[i] = p
        self.last_w = w.copy()
        return value + self.config.lam * data, grad + self.config.lam * dgrad

    def scores_at(self, w: np.ndarray) -> list[np.ndarray]:
        if self.last_w is not None and np.array_equal(w, self.last_w):
            return self.last_scores
        model = self.template.with_flat(w)
        return [self._one(i, model, derivatives=False)[1] for i in range(len(self.dataset))]


def objective(model: Model, dataset: Sequence[TrainingInstance], config: TrainConfig):
    """Objective value and gradient at ``model.weights`` (features already in model space)."""
    cfg = replace(config, warm_start=False)
    return Objective(dataset, cfg, model)(model.flat)


def mean_auc(scores: Sequence[np.ndarray], dataset: Sequence[TrainingInstance]) -> float:
    return float(np.mean([_instance_auc(s, inst.destinations, inst.nolinks) for s, inst in zip(scores, dataset)]))


class _Stop:
    """Outer stopping rule: small parameter step, or stalled relative improvement."""

    def __init__(self, config: TrainConfig):
        self.config = config
        self.prev_x = None
        self.values: list[float] = []

    def done(self, x, f) -> bool:
        cfg = self.config
        stop = False
        if self.prev_x is not None and np.max(np.abs(x - self.prev_x)) < cfg.outer_tol:
            stop = True
        self.values.append(f)
        if len(self.values) > 3:
            old = self.values[-4]
            if (old - f) <= cfg.rel_improvement_tol * max(abs(old), 1e-300):
                stop = True
        self.prev_x = x.copy()
        return stop


def _run_start(obj: Objective, w0: np.ndarray, config: TrainConfig, validation):
    losses_ = []
    aucs = []
    stop = _Stop(config)

    def track(x, f):
        losses_.append(float(f))
        if validation is not None:
            aucs.append(mean_auc(validation.scores_at(x), validation.dataset))
        else:
            aucs.append(mean_auc(obj.scores_at(x), obj.dataset))

    f0, _ = obj(w0)
    track(w0, f0)
    stop.done(w0, f0)
    state = {"stopped": False}

    def callback(intermediate_result):
        x, f = intermediate_result.x, intermediate_result.fun
        track(x, f)
        if stop.done(x, f):
            state["stopped"] = True
            raise StopIteration

    res = minimize(
        obj,
        w0,
        jac=True,
        method="L-BFGS-B",
        callback=callback,
        options={
            "maxcor": config.history,
            "maxiter": config.max_outer_iters,
            "ftol": 1e-15,
            "gtol": 1e-12,
            "maxls": 40,
        },
    )
    converged = state["stopped"] or bool(res.success)
    if not converged:
        logger.info("L-BFGS ended without meeting the stopping rule: %s", res.message)
    return np.asarray(res.x), float(res.fun), losses_, aucs, int(res.nit), converged


def prepare(dataset: Sequence[TrainingInstance], transform) -> list[TrainingInstance]:
    return [transform.apply_instance(inst) for inst in dataset]


def train(
    dataset: Sequence[TrainingInstance],
    config: TrainConfig = TrainConfig(),
    validation: Sequence[TrainingInstance] | None = None,
    init: np.ndarray | None = None,
    standardize: bool = True,
) -> TrainReport:
    """Fit edge-strength weights by L-BFGS from ``w = 0`` plus random restarts.

    Raw features are standardised (with a constant column appended) unless
    ``standardize`` is false.  The run with the lowest final objective wins.
    """
    if not dataset:
        raise ValueError("empty training set")
    transform = fit_transform(dataset) if standardize else None
    data = prepare(dataset, transform) if transform else list(dataset)
    m = data[0].graph.m
    template = Model.zeros(config.family, m, config.edge_types, transform)
    val = None
    if validation:
        vdata = prepare(validation, transform) if transform else list(validation)
        val = Objective(vdata, config, template)

    rng = np.random.default_rng(config.seed)
    starts = [np.zeros(template.flat.size) if init is None else np.asarray(init, dtype=np.float64).ravel()]
    starts += [rng.uniform(-1.0, 1.0, template.flat.size) for _ in range(config.restarts - 1)]

    best = None
    best_seen = None
    finals = []
    total_evals = 0
    for r, w0 in enumerate(starts):
        obj = Objective(data, config, template)
        try:
            w, f, hist, aucs, nit, ok = _run_start(obj, w0, config, val)
        except (WalkNotConverged, FloatingPointError, ValueError) as exc:
            logger.warning("start %d failed: %s", r, exc)
            finals.append(float("nan"))
            continue
        finally:
            total_evals += obj.evaluations
        logger.info("start %d: F=%.6g after %d iterations", r, f, nit)
        finals.append(f)
        if best_seen is None or f < best_seen[1]:
            best_seen = (w, f)
        if best is None or f < best[1]:
            best = (w, f, hist, aucs, nit, ok)
    if best is None:
        raise OptimizationError("all starts failed", None if best_seen is None else best_seen[0])
    w, f, hist, aucs, nit, ok = best
    return TrainReport(template.with_flat(w), f, hist, aucs, nit, total_evals, ok, finals)


def score_instance(model: Model, instance: TrainingInstance, config: TrainConfig) -> np.ndarray:
    """Walk scores of all local nodes (candidate-normalised if configured)."""
    inst = instance
    if model.transform is not None and inst.graph.m == model.transform.m_in:
        inst = model.transform.apply_instance(inst)
    if inst.graph.m != model.m:
        raise ValueError(f"instance has {inst.graph.m} features, model expects {model.m}")
    view = build_transition(inst, model, config.alpha)
    state = walk(view, config.eps, config.max_power_iters, derivatives=False)
    p, _ = normalize_candidates(state.p, None, inst.candidates)
    return p


def rank_candidates(scores: np.ndarray, instance: TrainingInstance) -> list[tuple[int, float]]:
    """Candidates by descending score, ties by ascending node id, as (original id, score)."""
    c = instance.candidates
    ids = instance.node_ids[c]
    order = np.lexsort((ids, -scores[c]))
    return [(int(ids[i]), float(scores[c][i])) for i in order]


def predict(model: Model, instance: TrainingInstance, config: TrainConfig) -> list[tuple[int, float]]:
    """Ranked candidate list with normalised scores."""
    return rank_candidates(score_instance(model, instance, config), instance)

"""Random walk with restarts: transition matrix, stationary scores and their derivatives.

The stationary vector and each derivative column are computed by plain
fixed-point sweeps (power iteration).  Derivatives use the recursion

    dp_u = sum_j Q_ju dp_j + p_j dQ_ju

with ``p`` held at its converged value.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .graph_model import Graph, TrainingInstance
from .strength import Model, arc_strength_grads, arc_strengths

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-12
DEFAULT_MAX_ITER = 10_000


class WalkNotConverged(RuntimeError):
    """Power iteration hit ``max_iter``; ``last`` holds the final iterate."""

    def __init__(self, message, last):
        super().__init__(message)
        self.last = last


class DegenerateInstance(ValueError):
    """Candidate scores sum to zero, so they cannot be normalised."""


class TransitionView:
    """Restart-augmented transition matrix of one seed's local graph.

    Row ``u`` of Q is ``(1 - alpha) a_uv / sum_w a_uw`` on out-arcs plus
    ``alpha`` on the seed column.  Nodes without out-arcs send everything to
    the seed.
    """

    def __init__(self, graph: Graph, seed: int, strengths, alpha: float, model=None, arc_types=None):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"restart probability must lie in [0, 1], got {alpha}")
        strengths = np.asarray(strengths, dtype=np.float64)
        if strengths.shape != (graph.arc_count,):
            raise ValueError("need exactly one strength per arc")
        if np.any(~np.isfinite(strengths)) or np.any(strengths <= 0):
            raise ValueError("strengths must be positive and finite")
        self.graph = graph
        self.seed = int(seed)
        self.alpha = float(alpha)
        self.strengths = strengths
        self.model = model
        self.arc_types = arc_types
        self.out_strength = np.bincount(graph.src, weights=strengths, minlength=graph.node_count)
        self.dangling = graph.out_degree == 0
        if np.any(self.out_strength[~self.dangling] <= 0):
            raise AssertionError("zero out-strength on a node with out-arcs")

    @cached_property
    def arc_probs(self) -> np.ndarray:
        """Q'_uv on every arc (before mixing in the restart)."""
        return self.strengths / self.out_strength[self.graph.src]

    @cached_property
    def _forward(self) -> sp.csr_matrix:
        g = self.graph
        n = g.node_count
        return sp.csr_matrix(((1.0 - self.alpha) * self.arc_probs, (g.dst, g.src)), shape=(n, n))

    @cached_property
    def restart_weight(self) -> np.ndarray:
        """Per-row probability of jumping to the seed."""
        return np.where(self.dangling, 1.0, self.alpha)

    def step(self, x: np.ndarray) -> np.ndarray:
        """One sweep ``x^T Q`` (``x`` may hold several columns)."""
        out = self._forward @ x
        out[self.seed] += self.restart_weight @ x
        return out

    def dense(self) -> np.ndarray:
        """Q as a dense matrix (test oracle use)."""
        g = self.graph
        q = np.zeros((g.node_count, g.node_count))
        q[g.src, g.dst] = (1.0 - self.alpha) * self.arc_probs
        q[:, self.seed] += self.restart_weight
        return q

    def row(self, u: int) -> dict[int, float]:
        q = self.dense()[u]
        return {int(v): float(q[v]) for v in np.flatnonzero(q)}

    @cached_property
    def strength_grads(self) -> np.ndarray:
        if self.model is None:
            raise ValueError("view was built from raw strengths; no parameters to differentiate")
        _, g = arc_strength_grads(self.model, self.graph.features, self.arc_types)
        return g

    @cached_property
    def arc_prob_grads(self) -> np.ndarray:
        """dQ_ju/dw_k on every arc, shape ``(n_arcs, n_params)``.

        Quotient rule on ``a_ju / sum_w a_jw``; the restart column is constant.
        """
        g = self.graph
        grads = self.strength_grads
        s = self.out_strength[g.src][:, None]
        srcsum = sp.csr_matrix(
            (np.ones(g.arc_count), (g.src, np.arange(g.arc_count))), shape=(g.node_count, g.arc_count)
        )
        grad_sums = (srcsum @ grads)[g.src]
        return (1.0 - self.alpha) * (grads / s - (self.strengths[:, None] / s) * (grad_sums / s))

    @cached_property
    def _dst_incidence(self) -> sp.csr_matrix:
        g = self.graph
        return sp.csr_matrix(
            (np.ones(g.arc_count), (g.dst, np.arange(g.arc_count))), shape=(g.node_count, g.arc_count)
        )


def build_transition(instance: TrainingInstance, model: Model, alpha: float) -> TransitionView:
    """Transition view of an instance with strengths from ``model``."""
    types = instance.arc_types if model.n_types > 1 else None
    a = arc_strengths(model, instance.graph.features, types)
    return TransitionView(instance.graph, instance.seed, a, alpha, model=model, arc_types=types)


def transition_from_strengths(graph: Graph, seed: int, strengths, alpha: float) -> TransitionView:
    return TransitionView(graph, seed, strengths, alpha)


def _iterate(view: TransitionView, x0: np.ndarray, bias, eps: float, max_iter: int, what: str):
    x = x0
    for it in range(1, max_iter + 1):
        new = view.step(x)
        if bias is not None:
            new += bias
        delta = np.max(np.abs(new - x)) if new.size else 0.0
        x = new
        if delta < eps:
            return x, it
    raise WalkNotConverged(f"{what} did not converge in {max_iter} sweeps (last change {delta:.3g})", x)


def pagerank(view: TransitionView, eps: float = DEFAULT_EPS, max_iter: int = DEFAULT_MAX_ITER, p0=None):
    """Stationary distribution of the walk, by power iteration from ``p0`` (uniform by default)."""
    p, _ = pagerank_with_count(view, eps, max_iter, p0)
    return p


def pagerank_with_count(view, eps=DEFAULT_EPS, max_iter=DEFAULT_MAX_ITER, p0=None):
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = view.graph.node_count
    x0 = np.full(n, 1.0 / n) if p0 is None else np.asarray(p0, dtype=np.float64).copy()
    p, it = _iterate(view, x0, None, eps, max_iter, "pagerank")
    return p, it


def transition_grad_entry(view: TransitionView, model: Model, j: int, u: int, k: int) -> float:
    """dQ_ju/dw_k for a single entry; zero off the arc set and on the restart column."""
    if view.model is not model:
        raise ValueError("view was built from a different model")
    g = view.graph
    lo, hi = g.indptr[j], g.indptr[j + 1]
    pos = lo + np.searchsorted(g.dst[lo:hi], u)
    if pos >= hi or g.dst[pos] != u:
        return 0.0
    return float(view.arc_prob_grads[pos, k])


def pagerank_derivative(
    view: TransitionView,
    p: np.ndarray,
    k=None,
    eps: float = DEFAULT_EPS,
    max_iter: int = DEFAULT_MAX_ITER,
    dp0=None,
):
    """Derivatives of the stationary vector w.r.t. the parameters.

    With ``k=None`` all parameters are returned as an ``(n_nodes, n_params)``
    array; with an integer ``k`` a single column.  Columns are independent
    fixed points; they are swept together and iterated until every column
    has converged.
    """
    p, dp, _ = _derivative(view, p, k, eps, max_iter, dp0)
    return dp


def _derivative(view, p, k, eps, max_iter, dp0):
    dq = view.arc_prob_grads if k is None else view.arc_prob_grads[:, [k]]
    bias = view._dst_incidence @ (p[view.graph.src][:, None] * dq)
    x0 = np.zeros_like(bias) if dp0 is None else np.asarray(dp0, dtype=np.float64).reshape(bias.shape).copy()
    dp, it = _iterate(view, x0, bias, eps, max_iter, "pagerank derivative")
    if k is not None:
        dp = dp[:, 0]
    return p, dp, it


@dataclass
class WalkState:
    """Stationary scores ``p`` and derivatives ``dp[u, k] = dp_u/dw_k``."""

    p: np.ndarray
    dp: np.ndarray | None
    iterations: int
    dp_iterations: int = 0


def walk(view: TransitionView, eps=DEFAULT_EPS, max_iter=DEFAULT_MAX_ITER, p0=None, dp0=None, derivatives=True):
    """Run both phases: stationary vector first, then its derivatives."""
    p, it = pagerank_with_count(view, eps, max_iter, p0)
    if not derivatives:
        return WalkState(p, None, it)
    _, dp, dit = _derivative(view, p, None, eps, max_iter, dp0)
    return WalkState(p, dp, it, dit)


def normalize_candidates(p: np.ndarray, dp, candidates):
    """Rescale scores so they sum to one over ``candidates``; chain rule for ``dp``.

    Returns full-length arrays; only candidate entries are meaningful.
    """
    candidates = np.asarray(candidates, dtype=np.int64)
    total = p[candidates].sum()
    if not total > 0:
        raise DegenerateInstance("candidate scores sum to zero")
    pn = p / total
    if dp is None:
        return pn, None
    dtotal = dp[candidates].sum(axis=0)
    if dp.ndim == 1:
        dpn = (total * dp - p * dtotal) / total**2
    else:
        dpn = (total * dp - p[:, None] * dtotal[None, :]) / total**2
    return pn, dpn


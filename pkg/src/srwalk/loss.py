"""Pairwise ranking losses h(p_l - p_d) and their sums over (destination, no-link) pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

KINDS = ("squared", "huber", "wmw")


@dataclass(frozen=True)
class LossSpec:
    """Loss kind with margin/width ``b`` and Huber window ``z``."""

    kind: str = "wmw"
    b: float = 1e-3
    z: float = 1e-2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss {self.kind!r}; expected one of {KINDS}")
        if self.b < 0:
            raise ValueError("b must be nonnegative")
        if self.kind == "wmw" and self.b == 0:
            raise ValueError("WMW loss needs a positive width b")
        if self.kind == "huber" and not self.z > self.b:
            raise ValueError("Huber loss needs window z > b")

    @classmethod
    def default(cls, kind: str = "wmw") -> "LossSpec":
        if kind == "wmw":
            return cls("wmw", 1e-3)
        return cls(kind, 0.0, 1e-2)


def h(spec: LossSpec, x):
    """Loss value at score difference ``x = p_l - p_d``."""
    x = np.asarray(x, dtype=np.float64)
    if spec.kind == "squared":
        return np.maximum(x + spec.b, 0.0) ** 2
    if spec.kind == "huber":
        t = x + spec.b
        return np.where(t <= 0, 0.0, np.where(t <= spec.z, t * t / (2 * spec.z), t - spec.z / 2))
    return expit(x / spec.b)


def h_prime(spec: LossSpec, x):
    """Derivative of :func:`h`; right-hand branch at kinks."""
    x = np.asarray(x, dtype=np.float64)
    if spec.kind == "squared":
        return 2.0 * np.maximum(x + spec.b, 0.0)
    if spec.kind == "huber":
        t = x + spec.b
        return np.where(t < 0, 0.0, np.where(t < spec.z, t / spec.z, 1.0))
    s = expit(x / spec.b)
    return s * (1.0 - s) / spec.b


def pairwise_loss(spec: LossSpec, scores, D, L):
    """Sum of h(s_l - s_d) over all pairs, by direct enumeration.

    Returns ``(total, grad)`` where ``grad`` has the shape of ``scores`` and is
    zero outside ``D`` and ``L``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    D = np.asarray(D, dtype=np.int64)
    L = np.asarray(L, dtype=np.int64)
    diff = scores[L][:, None] - scores[D][None, :]
    deriv = h_prime(spec, diff)
    grad = np.zeros_like(scores)
    np.add.at(grad, L, deriv.sum(axis=1))
    np.add.at(grad, D, -deriv.sum(axis=0))
    return float(h(spec, diff).sum()), grad


def pairwise_loss_fast(spec: LossSpec, scores, D, L):
    """Same result as :func:`pairwise_loss` in O(c log c) for squared and Huber losses.

    Each side is sorted once; prefix sums of the opposite side's scores and
    squared scores give every per-node total with one binary search.
    """
    if spec.kind not in ("squared", "huber"):
        raise ValueError(f"no fast evaluation for {spec.kind!r} loss")
    scores = np.asarray(scores, dtype=np.float64)
    D = np.asarray(D, dtype=np.int64)
    L = np.asarray(L, dtype=np.int64)
    pd, pl = scores[D], scores[L]
    b = spec.b

    ds = np.sort(pd)
    c1 = np.concatenate([[0.0], np.cumsum(ds)])
    c2 = np.concatenate([[0.0], np.cumsum(ds * ds)])
    ls = np.sort(pl)
    e1 = np.concatenate([[0.0], np.cumsum(ls)])
    nl = len(ls)

    grad = np.zeros_like(scores)
    t = pl + b  # pair (l, d) is active iff p_d < t_l
    if spec.kind == "squared":
        n = np.searchsorted(ds, t, side="left")
        s1, s2 = c1[n], c2[n]
        total = np.sum(n * t * t - 2.0 * t * s1 + s2)
        gl = 2.0 * (n * t - s1)
        # for each d: l with p_l > p_d - b
        u = pd - b
        lo = np.searchsorted(ls, u, side="right")
        cnt = nl - lo
        sl = e1[nl] - e1[lo]
        gd = -2.0 * (sl + cnt * (b - pd))
    else:
        z = spec.z
        # quadratic zone: t_l - z <= p_d < t_l ; linear zone: p_d < t_l - z
        n_hi = np.searchsorted(ds, t, side="left")
        n_lo = np.searchsorted(ds, t - z, side="left")
        cnt_q = n_hi - n_lo
        s1_q = c1[n_hi] - c1[n_lo]
        s2_q = c2[n_hi] - c2[n_lo]
        quad = (cnt_q * t * t - 2.0 * t * s1_q + s2_q) / (2.0 * z)
        lin = n_lo * (t - z / 2.0) - c1[n_lo]
        total = np.sum(quad + lin)
        gl = (cnt_q * t - s1_q) / z + n_lo
        # for each d: quadratic zone p_d - b < p_l <= p_d - b + z ; linear zone p_l > p_d - b + z
        u = pd - b
        m_lo = np.searchsorted(ls, u, side="right")
        m_hi = np.searchsorted(ls, u + z, side="right")
        cnt_q = m_hi - m_lo
        sl_q = e1[m_hi] - e1[m_lo]
        gd = -((sl_q - cnt_q * u) / z + (nl - m_hi))
    np.add.at(grad, L, gl)
    np.add.at(grad, D, gd)
    return float(total), grad


def evaluate(spec: LossSpec, scores, D, L):
    """Fast path when available, else enumeration."""
    if spec.kind == "wmw":
        return pairwise_loss(spec, scores, D, L)
    return pairwise_loss_fast(spec, scores, D, L)

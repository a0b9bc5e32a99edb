"""Edge-strength functions and the learned model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .graph_model import N_EDGE_TYPES, FeatureTransform

FAMILIES = ("exponential", "logistic")
EDGE_TYPE_MODES = {"single": 1, "hop6": N_EDGE_TYPES}

# bound on w . psi before exponentiation
CLAMP = 500.0


def _check_family(family: str) -> None:
    if family not in FAMILIES:
        raise ValueError(f"unknown strength family {family!r}; expected one of {FAMILIES}")


def strength_values(family: str, z: np.ndarray) -> np.ndarray:
    """Strength as a function of the inner product ``z = w . psi``."""
    _check_family(family)
    z = np.clip(z, -CLAMP, CLAMP)
    if family == "exponential":
        return np.exp(z)
    return expit(z)


def strength_slope(family: str, a: np.ndarray) -> np.ndarray:
    """d(strength)/dz expressed through the strength value ``a``."""
    if family == "exponential":
        return a
    return a * (1.0 - a)


@dataclass(frozen=True)
class Model:
    """Strength family plus one weight vector per edge type.

    ``weights`` has shape ``(n_types, m)``; single-type models have one row.
    ``transform`` maps raw arc features to the model's feature space.
    """

    family: str
    weights: np.ndarray
    transform: FeatureTransform | None = field(default=None)

    def __post_init__(self):
        _check_family(self.family)
        w = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
        if w.shape[0] not in (1, N_EDGE_TYPES):
            raise ValueError(f"expected 1 or {N_EDGE_TYPES} weight vectors, got {w.shape[0]}")
        if not np.all(np.isfinite(w)):
            raise ValueError("non-finite weights")
        object.__setattr__(self, "weights", w)

    @classmethod
    def zeros(cls, family: str, m: int, edge_types: str = "single", transform=None) -> "Model":
        return cls(family, np.zeros((EDGE_TYPE_MODES[edge_types], m)), transform)

    @property
    def m(self) -> int:
        return self.weights.shape[1]

    @property
    def n_types(self) -> int:
        return self.weights.shape[0]

    @property
    def edge_types(self) -> str:
        return "single" if self.n_types == 1 else "hop6"

    @property
    def flat(self) -> np.ndarray:
        return self.weights.ravel()

    def with_flat(self, w: np.ndarray) -> "Model":
        return Model(self.family, np.asarray(w, dtype=np.float64).reshape(self.weights.shape), self.transform)


def _weight_row(model: Model, edge_type: int) -> np.ndarray:
    return model.weights[0] if model.n_types == 1 else model.weights[edge_type]


def _check_psi(model: Model, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.float64)
    if psi.shape[-1] != model.m:
        raise ValueError(f"feature vector has length {psi.shape[-1]}, model expects {model.m}")
    if not np.all(np.isfinite(psi)):
        raise ValueError("non-finite feature value")
    return psi


def strength(model: Model, edge_type: int, psi) -> float:
    """Strength of one arc with features ``psi``."""
    psi = _check_psi(model, psi)
    return float(strength_values(model.family, psi @ _weight_row(model, edge_type)))


def strength_grad(model: Model, edge_type: int, psi) -> np.ndarray:
    """Gradient of one arc's strength w.r.t. its own type's weight vector."""
    psi = _check_psi(model, psi)
    z = psi @ _weight_row(model, edge_type)
    a = strength_values(model.family, z)
    if abs(z) >= CLAMP:
        return np.zeros_like(psi)
    return strength_slope(model.family, a) * psi


def arc_strengths(model: Model, features: np.ndarray, arc_types: np.ndarray | None = None) -> np.ndarray:
    """Strengths of all arcs at once."""
    if features.shape[1] != model.m:
        raise ValueError(f"arcs have {features.shape[1]} features, model expects {model.m}")
    if model.n_types == 1:
        z = features @ model.weights[0]
    else:
        z = np.einsum("ij,ij->i", features, model.weights[arc_types])
    return strength_values(model.family, z)


def arc_strength_grads(model: Model, features: np.ndarray, arc_types: np.ndarray | None = None):
    """Strengths and their gradients w.r.t. the flattened weights.

    Returns ``(a, g)`` with ``g`` of shape ``(n_arcs, n_types * m)``; an arc's
    gradient is nonzero only in the block of its own edge type.
    """
    if model.n_types == 1:
        z = features @ model.weights[0]
    else:
        z = np.einsum("ij,ij->i", features, model.weights[arc_types])
    a = strength_values(model.family, z)
    slope = np.where(np.abs(z) >= CLAMP, 0.0, strength_slope(model.family, a))
    local = slope[:, None] * features
    if model.n_types == 1:
        return a, local
    g = np.zeros((len(a), model.n_types, model.m))
    g[np.arange(len(a)), arc_types] = local
    return a, g.reshape(len(a), -1)

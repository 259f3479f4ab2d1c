"""Aggregation of per-crop class probabilities and multi-model ensembling.

Test-time augmentation evaluates a model on every spatial x temporal crop of
a video and averages the resulting softmax probabilities row-wise. Model
ensembling takes one probability vector per model and mixes them with
nonnegative weights, renormalizing the result. Both outputs are valid
probability distributions; arithmetic probability averaging (not logits, not
a geometric mean) is the convention followed throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "EnsembleSpec",
    "validate_prediction_matrix",
    "aggregate_crops",
    "aggregate_ensemble",
]

ROW_SUM_TOL = 1e-6
ENTRY_TOL = 1e-9


def validate_prediction_matrix(preds) -> np.ndarray:
    """Check a crops x classes probability matrix and return it as float64.

    Rows must sum to 1 within 1e-6 with entries in [0, 1].
    """
    p = np.asarray(preds, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
        raise ValueError(f"prediction matrix must be non-empty 2-D, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("prediction matrix contains non-finite entries")
    if np.any(p < -ENTRY_TOL) or np.any(p > 1.0 + ENTRY_TOL):
        raise ValueError("prediction entries must lie in [0, 1]")
    sums = p.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        raise ValueError(
            f"prediction row {int(bad[0])} sums to {sums[bad[0]]!r}, expected 1"
        )
    return p


@dataclass(frozen=True)
class EnsembleSpec:
    """Ordered (model_id, weight) members; weights nonnegative, not all zero."""

    members: tuple[tuple[str, float], ...]

    def __post_init__(self):
        members = tuple((str(m), float(w)) for m, w in self.members)
        if not members:
            raise ValueError("ensemble needs at least one member")
        if any(not np.isfinite(w) or w < 0.0 for _, w in members):
            raise ValueError(f"weights must be finite and >= 0, got {members}")
        if not any(w > 0.0 for _, w in members):
            raise ValueError("at least one ensemble weight must be positive")
        object.__setattr__(self, "members", members)

    @classmethod
    def uniform(cls, model_ids: Sequence[str]) -> "EnsembleSpec":
        return cls(tuple((m, 1.0) for m in model_ids))

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.members], dtype=np.float64)


def aggregate_crops(preds) -> np.ndarray:
    """Arithmetic mean over crop rows; the result sums to 1 within 1e-6."""
    p = validate_prediction_matrix(preds)
    return p.mean(axis=0)


def aggregate_ensemble(
    per_model: Sequence[np.ndarray], spec: EnsembleSpec
) -> tuple[np.ndarray, int]:
    """Weighted mean of per-model probability vectors, renormalized.

    Returns ``(probabilities, argmax_class)``; ties resolve to the lowest
    class index. Scaling every weight by the same positive factor does not
    change the output.
    """
    if len(per_model) != len(spec.members):
        raise ValueError(
            f"got {len(per_model)} probability vectors for {len(spec.members)} members"
        )
    vectors = []
    n_classes = None
    for i, v in enumerate(per_model):
        v = np.asarray(v, dtype=np.float64).ravel()
        if n_classes is None:
            n_classes = v.size
        elif v.size != n_classes:
            raise ValueError(
                f"model {spec.members[i][0]!r} has {v.size} classes, expected {n_classes}"
            )
        vectors.append(validate_prediction_matrix(v[None, :])[0])

    w = spec.weights
    mixed = np.einsum("m,mc->c", w, np.stack(vectors)) / w.sum()
    mixed = mixed / mixed.sum()
    return mixed, int(np.argmax(mixed))

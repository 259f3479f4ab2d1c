"""Desk-scale demonstration that the combined contrastive objective trains.

Synthetic latent trajectories stand in for videos: each instance is a base
point plus a per-segment temporal drift along a fixed direction, and every
"augmented" view is the same feature plus bounded noise. A two-layer tanh
encoder maps features to embeddings; plain gradient descent on the combined
contrastive loss, with the chain rule written out by hand, should roughly
halve the loss within a couple hundred steps and make embeddings of different
segments of one instance measurably less similar.

Everything is deterministic given the seeds: reruns produce bitwise-identical
traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from knights.contrastive import (
    EmbeddingBatch,
    TemporalClipSet,
    combined_tclr_loss,
)
from knights.gradcheck import central_difference_gradient, max_relative_error

__all__ = [
    "DatasetConfig",
    "SyntheticClipDataset",
    "TinyEncoder",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "generate_dataset",
    "train",
    "temporal_distinctness",
    "mean_pairwise_cosine",
    "encoder_chain_gradcheck",
]


class TrainingDiverged(RuntimeError):
    """Raised when the loss stops being finite during training."""


@dataclass(frozen=True)
class DatasetConfig:
    n_instances: int = 8
    n_segments: int = 4
    feature_dim: int = 12
    seed: int = 7
    drift: float = 0.5
    noise: float = 0.05

    def __post_init__(self):
        if self.n_instances < 1 or self.n_segments < 1 or self.feature_dim < 1:
            raise ValueError(f"counts must be >= 1, got {self}")
        if self.drift < 0 or self.noise < 0:
            raise ValueError(f"drift and noise must be >= 0, got {self}")


@dataclass(frozen=True)
class SyntheticClipDataset:
    """Feature arrays for one synthetic corpus.

    ``segments`` is (n, N_T, F): the latent trajectory. ``segment_twins`` and
    ``global_views`` are independently noised copies (the augmentation
    analogue). ``instance_views``/``instance_view_twins`` are (n, F) noised
    trajectory means used by the instance-level loss.
    """

    config: DatasetConfig
    segments: np.ndarray
    segment_twins: np.ndarray
    global_views: np.ndarray
    instance_views: np.ndarray
    instance_view_twins: np.ndarray


def generate_dataset(config: DatasetConfig) -> SyntheticClipDataset:
    """Deterministic synthetic trajectories; twins are bounded-noise copies."""
    rng = np.random.default_rng(config.seed)
    n, t, f = config.n_instances, config.n_segments, config.feature_dim

    base = rng.standard_normal((n, f))
    direction = rng.standard_normal((n, f))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    offsets = np.arange(t, dtype=np.float64) - (t - 1) / 2.0

    segments = base[:, None, :] + config.drift * offsets[None, :, None] * direction[:, None, :]
    segment_twins = segments + config.noise * rng.standard_normal((n, t, f))
    global_views = segments + config.noise * rng.standard_normal((n, t, f))
    means = segments.mean(axis=1)
    instance_views = means + config.noise * rng.standard_normal((n, f))
    instance_view_twins = means + config.noise * rng.standard_normal((n, f))

    return SyntheticClipDataset(
        config=config,
        segments=segments,
        segment_twins=segment_twins,
        global_views=global_views,
        instance_views=instance_views,
        instance_view_twins=instance_view_twins,
    )


@dataclass
class TinyEncoder:
    """Two affine layers with a tanh in between: ``y = tanh(x W1 + b1) W2 + b2``."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def create(
        cls, feature_dim: int, hidden_dim: int, embed_dim: int, seed: int = 0
    ) -> "TinyEncoder":
        rng = np.random.default_rng(seed)
        return cls(
            w1=rng.standard_normal((feature_dim, hidden_dim)) / math.sqrt(feature_dim),
            b1=np.zeros(hidden_dim),
            w2=rng.standard_normal((hidden_dim, embed_dim)) / math.sqrt(hidden_dim),
            b2=0.1 * rng.standard_normal(embed_dim),
        )

    @property
    def feature_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.w2.shape[1]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        """Row-wise forward pass; the cache feeds :meth:`backward`."""
        x = np.asarray(x, dtype=np.float64)
        hidden = np.tanh(x @ self.w1 + self.b1)
        out = hidden @ self.w2 + self.b2
        return out, (x, hidden)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: tuple, d_out: np.ndarray) -> dict[str, np.ndarray]:
        """Hand-derived parameter gradients for a given output gradient."""
        x, hidden = cache
        d_hidden = (d_out @ self.w2.T) * (1.0 - hidden * hidden)
        return {
            "w1": x.T @ d_hidden,
            "b1": d_hidden.sum(axis=0),
            "w2": hidden.T @ d_out,
            "b2": d_out.sum(axis=0),
        }

    def params_vector(self) -> np.ndarray:
        return np.concatenate([m.ravel() for m in (self.w1, self.b1, self.w2, self.b2)])

    def set_params_vector(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        pos = 0
        for name in ("w1", "b1", "w2", "b2"):
            m = getattr(self, name)
            setattr(self, name, vec[pos : pos + m.size].reshape(m.shape).copy())
            pos += m.size
        if pos != vec.size:
            raise ValueError(f"parameter vector has {vec.size} entries, expected {pos}")


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 200
    tau: float = 0.1
    learning_rate: float = 0.02  # frozen from a 3-point sweep over {0.005, 0.02, 0.08}
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    hidden_dim: int = 32
    embed_dim: int = 16
    encoder_seed: int = 0
    run_gradcheck: bool = True

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not (np.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ValueError(f"learning rate must be >= 0, got {self.learning_rate}")


@dataclass(frozen=True)
class TrainResult:
    losses: np.ndarray
    grad_norms: np.ndarray
    distinctness_before: float
    distinctness_after: float
    gradcheck_error: float | None = None


def _stacked_features(dataset: SyntheticClipDataset) -> tuple[np.ndarray, dict[str, slice]]:
    n, t, f = dataset.segments.shape
    blocks = {
        "instance_views": dataset.instance_views,
        "instance_view_twins": dataset.instance_view_twins,
        "segments": dataset.segments.reshape(n * t, f),
        "segment_twins": dataset.segment_twins.reshape(n * t, f),
        "global_views": dataset.global_views.reshape(n * t, f),
    }
    slices: dict[str, slice] = {}
    pos = 0
    for name, block in blocks.items():
        slices[name] = slice(pos, pos + block.shape[0])
        pos += block.shape[0]
    return np.concatenate(list(blocks.values()), axis=0), slices


def _loss_and_output_grad(
    embedded: np.ndarray,
    slices: dict[str, slice],
    dataset: SyntheticClipDataset,
    config: TrainConfig,
):
    """Combined loss on encoder outputs plus the gradient w.r.t. those outputs."""
    n, t, _ = dataset.segments.shape
    d = embedded.shape[1]
    g = embedded[slices["instance_views"]]
    gp = embedded[slices["instance_view_twins"]]
    seg = embedded[slices["segments"]].reshape(n, t, d)
    segp = embedded[slices["segment_twins"]].reshape(n, t, d)
    glob = embedded[slices["global_views"]].reshape(n, t, d)

    batch = EmbeddingBatch(g, gp)
    clip_sets = [
        TemporalClipSet(
            locals=seg[i],
            locals_twin=segp[i],
            global_slices=glob[i],
            local_anchors=seg[i],
        )
        for i in range(n)
    ]
    result = combined_tclr_loss(batch, clip_sets, config.tau, config.weights)

    d_embedded = np.zeros_like(embedded)
    d_embedded[slices["instance_views"]] = result.batch_grads["embeddings"]
    d_embedded[slices["instance_view_twins"]] = result.batch_grads["twins"]
    d_seg = d_embedded[slices["segments"]].reshape(n, t, d)
    d_segp = d_embedded[slices["segment_twins"]].reshape(n, t, d)
    d_glob = d_embedded[slices["global_views"]].reshape(n, t, d)
    for i, grads in enumerate(result.clip_grads):
        # locals and local_anchors are the same encoded rows; contributions add.
        d_seg[i] += grads["locals"] + grads["local_anchors"]
        d_segp[i] += grads["locals_twin"]
        d_glob[i] += grads["global_slices"]
    return result, d_embedded


def encoder_chain_gradcheck(
    dataset: SyntheticClipDataset,
    encoder: TinyEncoder,
    config: TrainConfig,
    step: float = 1e-5,
) -> float:
    """Max relative error of the hand-derived parameter gradient vs differences."""
    features, slices = _stacked_features(dataset)
    out, cache = encoder.forward(features)
    result, d_out = _loss_and_output_grad(out, slices, dataset, config)
    grads = encoder.backward(cache, d_out)
    analytic = np.concatenate(
        [grads[k].ravel() for k in ("w1", "b1", "w2", "b2")]
    )

    probe = TinyEncoder(
        encoder.w1.copy(), encoder.b1.copy(), encoder.w2.copy(), encoder.b2.copy()
    )

    def loss_of(vec: np.ndarray) -> float:
        probe.set_params_vector(vec)
        embedded = probe(features)
        value, _ = _loss_and_output_grad(embedded, slices, dataset, config)
        return value.value

    numeric = central_difference_gradient(loss_of, encoder.params_vector(), step=step)
    return max_relative_error(analytic, numeric)


def train(
    dataset: SyntheticClipDataset,
    encoder: TinyEncoder,
    config: TrainConfig,
) -> TrainResult:
    """Full-batch gradient descent on the combined loss; mutates the encoder.

    The gradient chain is verified against finite differences before the
    first step unless ``config.run_gradcheck`` is off; a non-finite loss
    aborts with :class:`TrainingDiverged`.
    """
    if encoder.feature_dim != dataset.config.feature_dim:
        raise ValueError(
            f"encoder expects {encoder.feature_dim}-dim features, "
            f"dataset has {dataset.config.feature_dim}"
        )

    gradcheck_error = None
    if config.run_gradcheck:
        gradcheck_error = encoder_chain_gradcheck(dataset, encoder, config)
        if gradcheck_error >= 1e-4:
            raise TrainingDiverged(
                f"encoder gradient chain failed verification: {gradcheck_error:.3e}"
            )

    features, slices = _stacked_features(dataset)
    if not np.all(np.isfinite(encoder(features))):
        raise TrainingDiverged("encoder outputs became non-finite at step 0")
    distinct_before = temporal_distinctness(encoder, dataset)
    losses = np.zeros(config.steps)
    grad_norms = np.zeros(config.steps)

    for step_idx in range(config.steps):
        out, cache = encoder.forward(features)
        if not np.all(np.isfinite(out)):
            raise TrainingDiverged(
                f"encoder outputs became non-finite at step {step_idx}"
            )
        result, d_out = _loss_and_output_grad(out, slices, dataset, config)
        if not np.isfinite(result.value):
            raise TrainingDiverged(
                f"loss became non-finite at step {step_idx}: {result.value!r}"
            )
        grads = encoder.backward(cache, d_out)
        losses[step_idx] = result.value
        grad_norms[step_idx] = math.sqrt(
            sum(float(np.sum(g * g)) for g in grads.values())
        )
        encoder.w1 -= config.learning_rate * grads["w1"]
        encoder.b1 -= config.learning_rate * grads["b1"]
        encoder.w2 -= config.learning_rate * grads["w2"]
        encoder.b2 -= config.learning_rate * grads["b2"]

    return TrainResult(
        losses=losses,
        grad_norms=grad_norms,
        distinctness_before=distinct_before,
        distinctness_after=temporal_distinctness(encoder, dataset),
        gradcheck_error=gradcheck_error,
    )


def mean_pairwise_cosine(embeddings: np.ndarray) -> float:
    """Mean cosine over distinct segment pairs within each instance.

    ``embeddings`` is (n_instances, n_segments, dim); with a single segment
    there are no pairs and the value is defined as 1.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    n, t, _ = emb.shape
    if t < 2:
        return 1.0
    unit = emb / np.linalg.norm(emb, axis=2, keepdims=True)
    cos = np.einsum("ipd,iqd->ipq", unit, unit)
    mask = ~np.eye(t, dtype=bool)
    return float(np.mean(cos[:, mask]))


def temporal_distinctness(encoder: TinyEncoder, dataset: SyntheticClipDataset) -> float:
    """Mean cosine between embeddings of different segments of one instance.

    Lower means the encoder separates timestamps more; identical segments
    give exactly 1.
    """
    n, t, f = dataset.segments.shape
    embedded = encoder(dataset.segments.reshape(n * t, f)).reshape(n, t, -1)
    return mean_pairwise_cosine(embedded)

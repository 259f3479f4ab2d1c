"""Numerical building blocks for a contrastive video-recognition pipeline.

The package covers four independent capabilities, each usable on its own:

* :mod:`knights.contrastive` -- temperature-scaled cosine contrastive losses
  (instance, local-local, global-local) with exact analytic gradients.
* :mod:`knights.tvl1` -- duality-based TV-L1 optical flow with a
  coarse-to-fine pyramid.
* :mod:`knights.attention` -- forward-only multi-head pooling attention and
  hierarchical stage schedules.
* :mod:`knights.sampling` / :mod:`knights.ensemble` -- clip index sampling,
  multi-crop test-time augmentation and model ensembling.

:mod:`knights.pretrain` ties the losses to a tiny hand-differentiated encoder
over synthetic data, and :mod:`knights.cli` exposes everything as the
``knights`` command.
"""

__version__ = "0.1.0"

from knights.contrastive import (
    CombinedLossResult,
    EmbeddingBatch,
    LossResult,
    TemporalClipSet,
    combined_tclr_loss,
    global_local_loss,
    instance_contrastive_loss,
    local_local_loss,
    similarity,
)
from knights.tvl1 import FlowField, Tvl1Params, compute_flow, energy
from knights.attention import (
    AttentionStage,
    StageSchedule,
    StageWeights,
    TokenTensor,
    mhpa_forward,
    pool_tokens,
    run_schedule,
)
from knights.sampling import (
    ClipSpec,
    CropGrid,
    sample_clip_indices,
    spatial_crop_boxes,
    temporal_crop_starts,
)
from knights.ensemble import EnsembleSpec, aggregate_crops, aggregate_ensemble
from knights.pretrain import (
    DatasetConfig,
    SyntheticClipDataset,
    TinyEncoder,
    TrainConfig,
    generate_dataset,
    temporal_distinctness,
    train,
)

__all__ = [
    "__version__",
    "AttentionStage",
    "ClipSpec",
    "CombinedLossResult",
    "CropGrid",
    "DatasetConfig",
    "EmbeddingBatch",
    "EnsembleSpec",
    "FlowField",
    "LossResult",
    "StageSchedule",
    "StageWeights",
    "SyntheticClipDataset",
    "TemporalClipSet",
    "TinyEncoder",
    "TokenTensor",
    "TrainConfig",
    "Tvl1Params",
    "aggregate_crops",
    "aggregate_ensemble",
    "combined_tclr_loss",
    "compute_flow",
    "energy",
    "generate_dataset",
    "global_local_loss",
    "instance_contrastive_loss",
    "local_local_loss",
    "mhpa_forward",
    "pool_tokens",
    "run_schedule",
    "sample_clip_indices",
    "similarity",
    "spatial_crop_boxes",
    "temporal_crop_starts",
    "temporal_distinctness",
    "train",
]

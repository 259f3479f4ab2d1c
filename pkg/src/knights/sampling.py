"""Clip index sampling and multi-crop geometry for inference-time evaluation.

A clip is ``frames`` indices spaced ``skip`` apart; videos shorter than the
clip span wrap cyclically rather than padding, so temporal statistics stay
nontrivial. Temporal crop starts are spread uniformly over the in-range span,
and spatial crops walk the longer image axis start/center/end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ClipSpec",
    "CropGrid",
    "sample_clip_indices",
    "temporal_crop_starts",
    "spatial_crop_boxes",
]


@dataclass(frozen=True)
class ClipSpec:
    """frames x skip sampling pattern plus the square input resolution."""

    frames: int
    skip: int
    resolution: int = 224

    def __post_init__(self):
        if self.frames < 1 or self.skip < 1 or self.resolution < 1:
            raise ValueError(
                f"frames, skip and resolution must be >= 1, got {self}"
            )

    @property
    def span(self) -> int:
        """Number of source frames one clip reaches across."""
        return self.frames * self.skip


@dataclass(frozen=True)
class CropGrid:
    """spatial x temporal test-time crop counts."""

    spatial_crops: int
    temporal_crops: int

    def __post_init__(self):
        if self.spatial_crops < 1 or self.temporal_crops < 1:
            raise ValueError(f"crop counts must be >= 1, got {self}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def sample_clip_indices(video_len: int, spec: ClipSpec, start: int = 0) -> np.ndarray:
    """Frame indices ``start, start+skip, ...`` wrapped modulo ``video_len``.

    Always returns exactly ``spec.frames`` indices in ``[0, video_len)``; the
    cyclic wrap makes every (video_len, start) combination legal.
    """
    video_len = int(video_len)
    start = int(start)
    if video_len < 1:
        raise ValueError(f"video_len must be >= 1, got {video_len}")
    if start < 0:
        raise ValueError(f"start must be >= 0, got {start}")
    return (start + spec.skip * np.arange(spec.frames)) % video_len


def temporal_crop_starts(video_len: int, spec: ClipSpec, n_temporal: int) -> np.ndarray:
    """Uniformly spaced clip starts over ``max(0, video_len - frames*skip)``.

    ``start_k = round(k * S / (n-1))`` for ``n > 1``; a single crop is
    centered. Videos shorter than the clip span collapse every start to 0.
    """
    video_len = int(video_len)
    n_temporal = int(n_temporal)
    if video_len < 1:
        raise ValueError(f"video_len must be >= 1, got {video_len}")
    if n_temporal < 1:
        raise ValueError(f"n_temporal must be >= 1, got {n_temporal}")
    span = max(0, video_len - spec.span)
    if n_temporal == 1:
        return np.array([_round_half_up(span / 2.0)], dtype=np.int64)
    ks = np.arange(n_temporal, dtype=np.float64)
    return np.floor(ks * span / (n_temporal - 1) + 0.5).astype(np.int64)


def spatial_crop_boxes(
    height: int, width: int, side: int, n_spatial: int = 3
) -> list[tuple[int, int, int, int]]:
    """Square crop boxes walking the longer axis; centered on the shorter one.

    Returns ``(x0, y0, x1, y1)`` boxes; for the default ``n_spatial=3`` the
    long-axis offsets are start, center, end. The caller is expected to have
    resized the shorter side down to ``side`` already.
    """
    height, width, side = int(height), int(width), int(side)
    if side < 1:
        raise ValueError(f"side must be >= 1, got {side}")
    if side > min(height, width):
        raise ValueError(
            f"side {side} exceeds the shorter image axis of {height}x{width}"
        )
    if n_spatial < 1:
        raise ValueError(f"n_spatial must be >= 1, got {n_spatial}")

    long_extent = max(height, width) - side
    short_offset = _round_half_up((min(height, width) - side) / 2.0)
    if n_spatial == 1:
        offsets = [_round_half_up(long_extent / 2.0)]
    else:
        offsets = [
            _round_half_up(k * long_extent / (n_spatial - 1)) for k in range(n_spatial)
        ]

    boxes = []
    for off in offsets:
        if width >= height:
            x0, y0 = off, short_offset
        else:
            x0, y0 = short_offset, off
        boxes.append((x0, y0, x0 + side, y0 + side))
    return boxes

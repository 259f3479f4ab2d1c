"""Sample clips, enumerate test-time crops and ensemble two mock models.

Run: python3 demos/tta_ensemble_demo.py
"""

import numpy as np

from knights.ensemble import EnsembleSpec, aggregate_crops, aggregate_ensemble
from knights.sampling import (
    ClipSpec,
    CropGrid,
    sample_clip_indices,
    spatial_crop_boxes,
    temporal_crop_starts,
)


def mock_model(rng, n_crops, n_classes, favored, sharpness):
    """Softmax rows biased toward one class, as a stand-in for a network."""
    logits = rng.standard_normal((n_crops, n_classes))
    logits[:, favored] += sharpness
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def main():
    rng = np.random.default_rng(0)
    video_len = 300
    spec = ClipSpec(frames=16, skip=2, resolution=224)
    grid = CropGrid(spatial_crops=3, temporal_crops=10)

    starts = temporal_crop_starts(video_len, spec, grid.temporal_crops)
    print(f"video of {video_len} frames, clips of {spec.frames}x{spec.skip}")
    print(f"temporal starts ({grid.temporal_crops}): {[int(s) for s in starts]}")
    first = sample_clip_indices(video_len, spec, int(starts[0]))
    print(f"first clip indices: {[int(i) for i in first]}")

    boxes = spatial_crop_boxes(256, 340, spec.resolution, grid.spatial_crops)
    print(f"spatial crop boxes on a 256x340 frame: {boxes}")

    n_crops = grid.spatial_crops * grid.temporal_crops
    n_classes = 6
    model_a = mock_model(rng, n_crops, n_classes, favored=2, sharpness=1.5)
    model_b = mock_model(rng, n_crops, n_classes, favored=4, sharpness=0.8)

    probs_a = aggregate_crops(model_a)
    probs_b = aggregate_crops(model_b)
    print(f"\nmodel A over {n_crops} crops: {np.round(probs_a, 3)} -> class {probs_a.argmax()}")
    print(f"model B over {n_crops} crops: {np.round(probs_b, 3)} -> class {probs_b.argmax()}")

    spec_ens = EnsembleSpec((("model_a", 2.0), ("model_b", 1.0)))
    mixed, top1 = aggregate_ensemble([probs_a, probs_b], spec_ens)
    print(f"\nensemble (weights 2:1): {np.round(mixed, 3)}")
    print(f"top-1 class: {top1}  (row sum = {mixed.sum():.12f})")


if __name__ == "__main__":
    main()

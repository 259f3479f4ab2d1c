"""Walk through the three contrastive losses on a small synthetic batch.

Run: python3 demos/contrastive_losses_demo.py
"""

import numpy as np

from knights.contrastive import (
    EmbeddingBatch,
    TemporalClipSet,
    combined_tclr_loss,
    global_local_loss,
    instance_contrastive_loss,
    local_local_loss,
)
from knights.gradcheck import central_difference_gradient, max_relative_error
from knights.reference import instance_loss_reference


def main():
    rng = np.random.default_rng(0)
    n_instances, n_segments, dim = 4, 3, 8
    tau = 0.1

    print(f"batch: {n_instances} instances, {n_segments} segments, dim {dim}, tau {tau}")
    batch = EmbeddingBatch(
        rng.standard_normal((n_instances, dim)),
        rng.standard_normal((n_instances, dim)),
    )
    clip_sets = [
        TemporalClipSet(
            locals=rng.standard_normal((n_segments, dim)),
            locals_twin=rng.standard_normal((n_segments, dim)),
            global_slices=rng.standard_normal((n_segments, dim)),
            local_anchors=rng.standard_normal((n_segments, dim)),
        )
        for _ in range(n_instances)
    ]

    ic = instance_contrastive_loss(batch, tau)
    print(f"\ninstance loss          {ic.value:.6f}")
    print(f"  per-anchor terms     {np.round(ic.per_term, 4)}")
    print(f"  negatives per anchor {ic.negatives_per_anchor} (= 2N-2)")
    print(f"  gradient norm        {ic.grad_norm():.6f}")

    ref = instance_loss_reference(batch.embeddings, batch.twins, tau)
    print(f"  brute-force oracle   {ref:.6f} (|diff| = {abs(ic.value - ref):.2e})")

    ll = local_local_loss(clip_sets[0], tau)
    gl = global_local_loss(clip_sets[0], tau)
    print(f"\nlocal-local loss (set 0)  {ll.value:.6f}  ({ll.negatives_per_anchor} negatives/anchor)")
    print(f"global-local loss (set 0) {gl.value:.6f}")

    combined = combined_tclr_loss(batch, clip_sets, tau, weights=(1.0, 1.0, 1.0))
    print(f"\ncombined loss  {combined.value:.6f}")
    print(f"  components: instance {combined.instance_value:.4f}, "
          f"local-local mean {combined.local_local_value:.4f}, "
          f"global-local mean {combined.global_local_value:.4f}")

    # spot-check one analytic gradient against central differences
    numeric = central_difference_gradient(
        lambda m: instance_contrastive_loss(EmbeddingBatch(m, batch.twins), tau).value,
        batch.embeddings,
    )
    err = max_relative_error(ic.grads["embeddings"], numeric)
    print(f"\ngradient check vs central differences: max relative error {err:.2e}")


if __name__ == "__main__":
    main()

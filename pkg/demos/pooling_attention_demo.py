"""Run a 4-stage pooling-attention hierarchy and inspect its shape trace.

Run: python3 demos/pooling_attention_demo.py
"""

import numpy as np

from knights.attention import (
    AttentionStage,
    StageSchedule,
    TokenTensor,
    mhpa_forward,
    random_stage_weights,
    run_schedule,
)
from knights.reference import attention_reference


def main():
    rng = np.random.default_rng(1)

    # one stride-1 stage equals plain multi-head attention
    stage = AttentionStage(heads=2, dim_in=8, dim_out=8)
    w = random_stage_weights(stage, rng)
    x = TokenTensor(rng.standard_normal((16, 8)), grid=(1, 4, 4))
    fast = mhpa_forward(x, stage, w)
    slow = attention_reference(x.data, w.wq, w.wk, w.wv, w.wo, heads=2)
    print("stride-1 stage vs loop-based plain attention:")
    print(f"  max |difference| = {np.max(np.abs(fast.data - slow)):.2e}")

    # hierarchy: halve h and w, double channels, after a stride-1 opener
    schedule = StageSchedule(
        (
            AttentionStage(heads=2, dim_in=8, dim_out=8),
            AttentionStage(heads=2, dim_in=8, dim_out=16, q_stride=(1, 2, 2)),
            AttentionStage(heads=2, dim_in=16, dim_out=32, q_stride=(1, 2, 2)),
            AttentionStage(heads=2, dim_in=32, dim_out=64, q_stride=(1, 2, 2)),
        )
    )
    weights = [random_stage_weights(s, rng) for s in schedule.stages]
    tokens = TokenTensor(rng.standard_normal((64, 8)), grid=(1, 8, 8))
    out, trace = run_schedule(tokens, schedule, weights)

    print("\n4-stage schedule from a 1x8x8 grid, dim 8:")
    print(f"  input  (seq_len, dim) = ({tokens.seq_len}, {tokens.dim})")
    for i, (seq, dim) in enumerate(trace, start=1):
        print(f"  stage {i} -> ({seq}, {dim})")
    print("  tokens shrink, channels grow: the hierarchy trades resolution for width")

    _, attn = mhpa_forward(
        TokenTensor(rng.standard_normal((32, 8)), (2, 4, 4)),
        AttentionStage(heads=4, dim_in=8, dim_out=8, q_stride=(1, 2, 2), kv_stride=(2, 1, 1)),
        random_stage_weights(AttentionStage(heads=4, dim_in=8, dim_out=8), rng),
        return_attention=True,
    )
    print(f"\npooled attention rows sum to 1: max |row sum - 1| = "
          f"{np.max(np.abs(attn.sum(axis=-1) - 1.0)):.2e}")
    print(f"attention shape (heads, pooled queries, pooled keys) = {attn.shape}")


if __name__ == "__main__":
    main()

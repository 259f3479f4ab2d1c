"""Forward-only multi-head pooling attention over space-time token grids.

Tokens are a flattened ``t x h x w`` grid (plus an optional class token that
bypasses pooling). A stage projects tokens to Q/K/V, pools each grid by the
stage strides, runs scaled dot-product attention per head over the pooled
keys, concatenates heads and applies the output projection. Chaining stages
with query pooling and widening output projections walks the token sequence
from many narrow tokens to few wide ones; :func:`run_schedule` checks that
monotonicity while recording the (seq_len, dim) trace.

Pooling kinds are ``average`` (mean over each stride window, ragged edge
windows included) and ``strided`` (keep the window origin element). A learned
convolutional pooling would need training, which is out of scope here; the
two kinds above are analytically checkable stand-ins and the seam where a
conv pooling could be plugged in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TokenTensor",
    "AttentionStage",
    "StageSchedule",
    "StageWeights",
    "pool_tokens",
    "mhpa_forward",
    "run_schedule",
    "random_stage_weights",
    "schedule_from_config",
]

Stride = tuple[int, int, int]

POOLING_KINDS = ("average", "strided")


def _check_stride(name: str, stride) -> Stride:
    stride = tuple(int(s) for s in stride)
    if len(stride) != 3 or any(s < 1 for s in stride):
        raise ValueError(f"{name} must be three strides >= 1, got {stride}")
    return stride


def _check_kind(kind: str) -> str:
    # "strided-subsample" is accepted as a long-form alias in config files.
    if kind == "strided-subsample":
        return "strided"
    if kind not in POOLING_KINDS:
        raise ValueError(f"pooling kind must be one of {POOLING_KINDS}, got {kind!r}")
    return kind


@dataclass(frozen=True)
class TokenTensor:
    """Token sequence with its space-time grid and optional class token.

    ``data`` is (seq_len, dim); the class token, when present, is row 0 and
    is not part of the grid.
    """

    data: np.ndarray
    grid: Stride
    has_class_token: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"token data must be 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("token data contains non-finite values")
        grid = _check_stride("grid", self.grid)
        expected = grid[0] * grid[1] * grid[2] + int(self.has_class_token)
        if data.shape[0] != expected:
            raise ValueError(
                f"grid {grid} implies {expected} rows "
                f"(class token: {self.has_class_token}), got {data.shape[0]}"
            )
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "grid", grid)

    @property
    def seq_len(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class AttentionStage:
    """Configuration of one pooling-attention stage."""

    heads: int
    dim_in: int
    dim_out: int
    q_stride: Stride = (1, 1, 1)
    kv_stride: Stride = (1, 1, 1)
    pooling: str = "average"

    def __post_init__(self):
        if self.heads < 1:
            raise ValueError(f"heads must be >= 1, got {self.heads}")
        if self.dim_in < 1 or self.dim_out < self.dim_in:
            raise ValueError(
                f"need dim_out >= dim_in >= 1, got dim_in={self.dim_in}, dim_out={self.dim_out}"
            )
        if self.dim_in % self.heads != 0:
            raise ValueError(f"dim_in {self.dim_in} not divisible by heads {self.heads}")
        object.__setattr__(self, "q_stride", _check_stride("q_stride", self.q_stride))
        object.__setattr__(self, "kv_stride", _check_stride("kv_stride", self.kv_stride))
        object.__setattr__(self, "pooling", _check_kind(self.pooling))


@dataclass(frozen=True)
class StageSchedule:
    """Ordered stages whose channel dims chain output-to-input."""

    stages: tuple[AttentionStage, ...]

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise ValueError("schedule needs at least one stage")
        for a, b in zip(stages, stages[1:]):
            if a.dim_out != b.dim_in:
                raise ValueError(
                    f"stage dims do not chain: dim_out {a.dim_out} -> dim_in {b.dim_in}"
                )
        object.__setattr__(self, "stages", stages)


@dataclass(frozen=True)
class StageWeights:
    """Q/K/V projections (dim_in x dim_in) and output projection (dim_in x dim_out)."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray

    def __post_init__(self):
        for name in ("wq", "wk", "wv", "wo"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.ndim != 2 or not np.all(np.isfinite(m)):
                raise ValueError(f"{name} must be a finite 2-D matrix")
            object.__setattr__(self, name, m)
        d = self.wq.shape[0]
        for name in ("wq", "wk", "wv"):
            if getattr(self, name).shape != (d, d):
                raise ValueError(f"{name} must be square {d}x{d}")
        if self.wo.shape[0] != d:
            raise ValueError(f"wo must have {d} rows, got {self.wo.shape}")


def random_stage_weights(stage: AttentionStage, rng: np.random.Generator) -> StageWeights:
    """Seeded Gaussian projections scaled by 1/sqrt(fan_in)."""
    s = 1.0 / math.sqrt(stage.dim_in)
    return StageWeights(
        wq=s * rng.standard_normal((stage.dim_in, stage.dim_in)),
        wk=s * rng.standard_normal((stage.dim_in, stage.dim_in)),
        wv=s * rng.standard_normal((stage.dim_in, stage.dim_in)),
        wo=s * rng.standard_normal((stage.dim_in, stage.dim_out)),
    )


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _pool_axis_average(vol: np.ndarray, axis: int, stride: int) -> np.ndarray:
    n = vol.shape[axis]
    idx = np.arange(0, n, stride)
    sums = np.add.reduceat(vol, idx, axis=axis)
    counts = np.diff(np.append(idx, n)).astype(np.float64)
    shape = [1] * vol.ndim
    shape[axis] = counts.size
    return sums / counts.reshape(shape)


def pool_tokens(x: TokenTensor, stride, kind: str = "average") -> TokenTensor:
    """Pool the token grid per axis; the class token passes through unpooled.

    Output grid dims are ``ceil(dim / stride)`` per axis. ``average`` takes
    the mean of each window (edge windows may be short); ``strided`` keeps the
    element at each window origin.
    """
    stride = _check_stride("stride", stride)
    kind = _check_kind(kind)
    if stride == (1, 1, 1):
        return x

    tokens = x.data[1:] if x.has_class_token else x.data
    t, h, w = x.grid
    vol = tokens.reshape(t, h, w, x.dim)
    if kind == "average":
        for axis, s in enumerate(stride):
            if s > 1:
                vol = _pool_axis_average(vol, axis, s)
    else:
        vol = vol[:: stride[0], :: stride[1], :: stride[2]]

    new_grid = vol.shape[:3]
    pooled = vol.reshape(-1, x.dim)
    if x.has_class_token:
        pooled = np.concatenate([x.data[:1], pooled], axis=0)
    return TokenTensor(pooled, new_grid, x.has_class_token)


def _split_heads(m: np.ndarray, heads: int) -> np.ndarray:
    n, dim = m.shape
    return m.reshape(n, heads, dim // heads)


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=-1, keepdims=True)


def mhpa_forward(
    x: TokenTensor,
    stage: AttentionStage,
    weights: StageWeights,
    return_attention: bool = False,
):
    """One pooling-attention stage.

    Returns the output tokens (grid pooled by ``q_stride``, channels widened
    to ``dim_out``); with ``return_attention=True`` also returns the
    per-head attention array of shape (heads, len_q, len_kv). A residual of
    the query-pooled input is added when ``dim_in == dim_out``.
    """
    if x.dim != stage.dim_in:
        raise ValueError(f"token dim {x.dim} != stage dim_in {stage.dim_in}")
    if weights.wq.shape[0] != stage.dim_in or weights.wo.shape[1] != stage.dim_out:
        raise ValueError("weight shapes do not match the stage dims")

    def project_and_pool(w: np.ndarray, stride: Stride) -> TokenTensor:
        projected = TokenTensor(x.data @ w, x.grid, x.has_class_token)
        return pool_tokens(projected, stride, stage.pooling)

    q = project_and_pool(weights.wq, stage.q_stride)
    k = project_and_pool(weights.wk, stage.kv_stride)
    v = project_and_pool(weights.wv, stage.kv_stride)

    qh = _split_heads(q.data, stage.heads)
    kh = _split_heads(k.data, stage.heads)
    vh = _split_heads(v.data, stage.heads)
    scale = 1.0 / math.sqrt(stage.dim_in // stage.heads)

    logits = np.einsum("qhd,khd->hqk", qh, kh) * scale
    attn = _softmax_rows(logits)
    ctx = np.einsum("hqk,khd->qhd", attn, vh).reshape(q.seq_len, stage.dim_in)
    out = ctx @ weights.wo

    if stage.dim_in == stage.dim_out:
        out = out + pool_tokens(x, stage.q_stride, stage.pooling).data

    result = TokenTensor(out, q.grid, x.has_class_token)
    if return_attention:
        return result, attn
    return result


def run_schedule(
    x: TokenTensor,
    schedule: StageSchedule,
    weights: list[StageWeights] | tuple[StageWeights, ...],
) -> tuple[TokenTensor, list[tuple[int, int]]]:
    """Apply stages in order, returning the output and the (seq_len, dim) trace.

    Raises if the token count ever increases or the channel dim ever shrinks
    across a stage: the whole point of the hierarchy is to trade resolution
    for width.
    """
    if len(weights) != len(schedule.stages):
        raise ValueError(
            f"got {len(weights)} weight sets for {len(schedule.stages)} stages"
        )
    if x.dim != schedule.stages[0].dim_in:
        raise ValueError(f"input dim {x.dim} != first stage dim_in")

    trace: list[tuple[int, int]] = []
    current = x
    for i, (stage, w) in enumerate(zip(schedule.stages, weights)):
        nxt = mhpa_forward(current, stage, w)
        if nxt.seq_len > current.seq_len:
            raise ValueError(f"stage {i} increased the token count")
        if nxt.dim < current.dim:
            raise ValueError(f"stage {i} shrank the channel dim")
        trace.append((nxt.seq_len, nxt.dim))
        current = nxt
    return current, trace


def schedule_from_config(config: dict[str, str]) -> StageSchedule:
    """Build a schedule from flat ``key=value`` pairs.

    Expected keys: ``stages`` plus ``stage<k>.heads``, ``stage<k>.dim_in``,
    ``stage<k>.dim_out``, optional ``stage<k>.q_stride`` / ``kv_stride``
    (``TxHxW``, e.g. ``1x2x2``) and ``stage<k>.pooling``.
    """

    def parse_stride(text: str) -> Stride:
        parts = text.lower().split("x")
        if len(parts) != 3:
            raise ValueError(f"stride must look like 1x2x2, got {text!r}")
        return tuple(int(p) for p in parts)  # type: ignore[return-value]

    try:
        n = int(config["stages"])
    except KeyError:
        raise ValueError("schedule config is missing the 'stages' key") from None
    stages = []
    for i in range(1, n + 1):
        prefix = f"stage{i}."

        def get(key: str, default: str | None = None) -> str:
            full = prefix + key
            if full in config:
                return config[full]
            if default is None:
                raise ValueError(f"schedule config is missing {full!r}")
            return default

        stages.append(
            AttentionStage(
                heads=int(get("heads")),
                dim_in=int(get("dim_in")),
                dim_out=int(get("dim_out")),
                q_stride=parse_stride(get("q_stride", "1x1x1")),
                kv_stride=parse_stride(get("kv_stride", "1x1x1")),
                pooling=get("pooling", "average"),
            )
        )
    return StageSchedule(tuple(stages))

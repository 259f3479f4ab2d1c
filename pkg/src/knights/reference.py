"""Slow, obviously-correct reference implementations used for verification.

Everything here is a naive transcription with explicit Python loops and no
batching, shared terms, or numerical shielding: the fast paths in
:mod:`knights.contrastive` and :mod:`knights.attention` are required to agree
with these within tight absolute tolerances. Values only, no gradients.
"""

from __future__ import annotations

import math

import numpy as np

from knights.contrastive import similarity

__all__ = [
    "instance_loss_reference",
    "local_local_reference",
    "global_local_reference",
    "combined_loss_reference",
    "attention_reference",
]


def instance_loss_reference(embeddings, twins, tau: float) -> float:
    """Double loop over instances; average of per-anchor -log fractions."""
    g = np.asarray(embeddings, dtype=np.float64)
    gp = np.asarray(twins, dtype=np.float64)
    n = g.shape[0]
    total = 0.0
    for i in range(n):
        numerator = similarity(g[i], gp[i], tau)
        denominator = 0.0
        for j in range(n):
            if j != i:
                denominator += similarity(g[i], g[j], tau)
            denominator += similarity(g[i], gp[j], tau)
        total += -math.log(numerator / denominator)
    return total / n


def local_local_reference(locals_, locals_twin, tau: float) -> float:
    """Double loop over temporal segments; sum of per-anchor terms."""
    l = np.asarray(locals_, dtype=np.float64)
    lp = np.asarray(locals_twin, dtype=np.float64)
    n = l.shape[0]
    total = 0.0
    for p in range(n):
        numerator = similarity(l[p], lp[p], tau)
        denominator = 0.0
        for q in range(n):
            if q != p:
                denominator += similarity(l[p], l[q], tau)
            denominator += similarity(l[p], lp[q], tau)
        total += -math.log(numerator / denominator)
    return total


def global_local_reference(global_slices, local_anchors, tau: float) -> float:
    """Double loop over timestamps; reciprocal anchor terms, negated sum."""
    g = np.asarray(global_slices, dtype=np.float64)
    a = np.asarray(local_anchors, dtype=np.float64)
    n = g.shape[0]
    total = 0.0
    for k in range(n):
        den_local = sum(similarity(a[k], g[q], tau) for q in range(n))
        den_global = sum(similarity(g[k], a[q], tau) for q in range(n))
        term = math.log(similarity(a[k], g[k], tau) / den_local)
        term += math.log(similarity(g[k], a[k], tau) / den_global)
        total += -term
    return total


def combined_loss_reference(batch, clip_sets, tau: float, weights=(1.0, 1.0, 1.0)) -> float:
    """Weighted combination built purely from the reference components."""
    w1, w2, w3 = (float(x) for x in weights)
    value = w1 * instance_loss_reference(batch.embeddings, batch.twins, tau)
    if clip_sets:
        ll = [local_local_reference(c.locals, c.locals_twin, tau) for c in clip_sets]
        gl = [global_local_reference(c.global_slices, c.local_anchors, tau) for c in clip_sets]
        value += w2 * (sum(ll) / len(ll)) + w3 * (sum(gl) / len(gl))
    return value


def attention_reference(tokens, wq, wk, wv, wo, heads: int) -> np.ndarray:
    """Plain multi-head attention with explicit per-query/per-head loops.

    Projects with the given matrices, splits channels into contiguous head
    chunks, applies scaled dot-product attention per head, concatenates and
    applies the output projection. A residual of the raw input is added when
    input and output widths match, mirroring the pooled-attention policy.
    """
    x = np.asarray(tokens, dtype=np.float64)
    q = x @ wq
    k = x @ wk
    v = x @ wv
    n, dim = q.shape
    head_dim = dim // heads
    scale = 1.0 / math.sqrt(head_dim)

    out = np.zeros_like(q)
    for h in range(heads):
        sl = slice(h * head_dim, (h + 1) * head_dim)
        qh, kh, vh = q[:, sl], k[:, sl], v[:, sl]
        for i in range(n):
            scores = [scale * float(qh[i] @ kh[j]) for j in range(n)]
            m = max(scores)
            exps = [math.exp(s - m) for s in scores]
            z = sum(exps)
            row = np.zeros(head_dim)
            for j in range(n):
                row += (exps[j] / z) * vh[j]
            out[i, sl] = row

    y = out @ wo
    if y.shape[1] == x.shape[1]:
        y = y + x
    return y

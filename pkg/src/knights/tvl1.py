"""Duality-based TV-L1 optical flow with a coarse-to-fine pyramid.

Minimizes the total-variation regularized L1 brightness-constancy energy
``sum |grad u1| + |grad u2| + lam * |rho(u)|`` over a dense displacement
field ``u = (u1, u2)``. The brightness residual ``rho`` is re-linearized
around the current flow at each warp; inner iterations alternate a pointwise
threshold step on the data term with a dual ascent step (divergence/gradient
pair) on the TV term.

Discrete operators: forward differences with Neumann boundary for the
gradient, and the exactly-adjoint backward-difference divergence, so that
``<grad u, p> == -<u, div p>`` in exact arithmetic. Warping is bilinear with
border clamping. Everything is float64 and deterministic.

Intensities are expected in [0, 1]; the solver internally rescales them to
the 0..255 range the default ``lam`` is calibrated for, which also keeps the
``epsilon`` stopping rule (mean flow-update magnitude, in pixels) meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter, median_filter

__all__ = [
    "FlowField",
    "Tvl1Params",
    "image_gradient",
    "divergence",
    "warp_bilinear",
    "resize_bilinear",
    "build_pyramid",
    "compute_flow",
    "energy",
    "effective_lambda",
    "flow_with_report",
]

MIN_PYRAMID_SIZE = 16


def _as_plane(name: str, a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


@dataclass(frozen=True)
class FlowField:
    """Dense displacement field: ``u1`` is the x (column) component, ``u2`` y."""

    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        u1 = _as_plane("u1", self.u1)
        u2 = _as_plane("u2", self.u2)
        if u1.shape != u2.shape:
            raise ValueError(f"u1 shape {u1.shape} != u2 shape {u2.shape}")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)

    @property
    def shape(self) -> tuple[int, int]:
        return self.u1.shape

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        return cls(np.zeros((height, width)), np.zeros((height, width)))


@dataclass(frozen=True)
class Tvl1Params:
    """Solver parameters; defaults are the conventional choices for this family.

    ``tau_step`` must satisfy ``tau_step <= 0.125 / theta`` so the dual ascent
    stays within the step bound implied by the discrete operator norm.
    """

    lam: float = 0.15
    theta: float = 0.3
    tau_step: float = 0.25
    n_scales: int = 5
    zoom: float = 0.5
    n_warps: int = 5
    max_iters: int = 300
    epsilon: float = 0.01
    median_filtering: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not (np.isfinite(self.theta) and self.theta > 0):
            raise ValueError(f"theta must be positive, got {self.theta}")
        if not (0.0 < self.zoom < 1.0):
            raise ValueError(f"zoom must lie in (0, 1), got {self.zoom}")
        if not (0.0 < self.tau_step <= 0.125 / self.theta):
            raise ValueError(
                f"tau_step must lie in (0, 0.125/theta], got {self.tau_step} "
                f"with bound {0.125 / self.theta:.6g}"
            )
        for name in ("n_scales", "n_warps", "max_iters"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def image_gradient(img) -> tuple[np.ndarray, np.ndarray]:
    """Forward-difference gradient with Neumann boundary (last row/col zero)."""
    img = _as_plane("img", img)
    gx = np.zeros_like(img)
    gy = np.zeros_like(img)
    gx[:, :-1] = img[:, 1:] - img[:, :-1]
    gy[:-1, :] = img[1:, :] - img[:-1, :]
    return gx, gy


def divergence(p1, p2) -> np.ndarray:
    """Backward-difference divergence, the exact negative adjoint of the gradient."""
    p1 = _as_plane("p1", p1)
    p2 = _as_plane("p2", p2)
    if p1.shape != p2.shape:
        raise ValueError(f"p1 shape {p1.shape} != p2 shape {p2.shape}")
    div = np.zeros_like(p1)
    if p1.shape[1] > 1:
        div[:, 0] += p1[:, 0]
        div[:, 1:-1] += p1[:, 1:-1] - p1[:, :-2]
        div[:, -1] += -p1[:, -2]
    if p2.shape[0] > 1:
        div[0, :] += p2[0, :]
        div[1:-1, :] += p2[1:-1, :] - p2[:-2, :]
        div[-1, :] += -p2[-2, :]
    return div


def _bilinear_sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample img at fractional (ys, xs) with coordinates clamped to the border."""
    h, w = img.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def warp_bilinear(img, flow: FlowField) -> np.ndarray:
    """Sample ``img`` at ``(x + u1, y + u2)``; out-of-bounds clamps to border."""
    img = _as_plane("img", img)
    if img.shape != flow.shape:
        raise ValueError(f"image shape {img.shape} != flow shape {flow.shape}")
    h, w = img.shape
    xs = np.arange(w, dtype=np.float64)[None, :] + flow.u1
    ys = np.arange(h, dtype=np.float64)[:, None] + flow.u2
    return _bilinear_sample(img, ys, xs)


def resize_bilinear(img, height: int, width: int) -> np.ndarray:
    """Resize by bilinear sampling with pixel centers aligned."""
    img = _as_plane("img", img)
    h, w = img.shape
    ys = (np.arange(height, dtype=np.float64) + 0.5) * (h / height) - 0.5
    xs = (np.arange(width, dtype=np.float64) + 0.5) * (w / width) - 0.5
    return _bilinear_sample(img, ys[:, None], xs[None, :])


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _effective_scales(height: int, width: int, n_scales: int, zoom: float) -> int:
    n = 1
    while n < n_scales:
        h = _round_half_up(height * zoom**n)
        w = _round_half_up(width * zoom**n)
        if min(h, w) < MIN_PYRAMID_SIZE:
            break
        n += 1
    return n


def build_pyramid(img, n_scales: int, zoom: float) -> list[np.ndarray]:
    """Smoothed, bilinearly downsampled pyramid; level 0 is the input.

    Level ``k`` has dimensions ``round(dim * zoom**k)``. Levels that would
    fall below 16 px on either axis are dropped.
    """
    img = _as_plane("img", img)
    if not (0.0 < zoom < 1.0):
        raise ValueError(f"zoom must lie in (0, 1), got {zoom}")
    h, w = img.shape
    n = _effective_scales(h, w, int(n_scales), zoom)
    levels = [img]
    sigma = 0.6 * math.sqrt(1.0 / zoom**2 - 1.0)
    for k in range(1, n):
        smoothed = gaussian_filter(levels[-1], sigma, mode="nearest")
        nh = _round_half_up(h * zoom**k)
        nw = _round_half_up(w * zoom**k)
        levels.append(resize_bilinear(smoothed, nh, nw))
    return levels


def energy(i0, i1, flow: FlowField, lam: float) -> float:
    """Discrete TV-L1 energy with the residual evaluated by warping."""
    i0 = _as_plane("i0", i0)
    i1 = _as_plane("i1", i1)
    if i0.shape != i1.shape:
        raise ValueError(f"i0 shape {i0.shape} != i1 shape {i1.shape}")
    if i0.shape != flow.shape:
        raise ValueError(f"image shape {i0.shape} != flow shape {flow.shape}")
    rho = warp_bilinear(i1, flow) - i0
    u1x, u1y = image_gradient(flow.u1)
    u2x, u2y = image_gradient(flow.u2)
    tv = np.hypot(u1x, u1y) + np.hypot(u2x, u2y)
    return float(np.sum(tv) + lam * np.sum(np.abs(rho)))


def _solve_level(
    i0: np.ndarray,
    i1: np.ndarray,
    u1: np.ndarray,
    u2: np.ndarray,
    params: Tvl1Params,
) -> tuple[np.ndarray, np.ndarray]:
    """Warping iterations at a single pyramid level."""
    gy_full, gx_full = np.gradient(i1)
    p11 = np.zeros_like(i0)
    p12 = np.zeros_like(i0)
    p21 = np.zeros_like(i0)
    p22 = np.zeros_like(i0)

    lt = params.lam * params.theta
    taut = params.tau_step / params.theta
    h, w = i0.shape
    ys = np.arange(h, dtype=np.float64)[:, None]
    xs = np.arange(w, dtype=np.float64)[None, :]

    for warp in range(params.n_warps):
        sy = ys + u2
        sx = xs + u1
        i1w = _bilinear_sample(i1, sy, sx)
        gxw = _bilinear_sample(gx_full, sy, sx)
        gyw = _bilinear_sample(gy_full, sy, sx)
        grad2 = gxw * gxw + gyw * gyw
        rho_const = i1w - gxw * u1 - gyw * u2 - i0

        for _ in range(params.max_iters):
            rho = rho_const + gxw * u1 + gyw * u2
            th = lt * grad2
            inner = -rho / np.maximum(grad2, 1e-12)
            step = np.where(rho < -th, lt, np.where(rho > th, -lt, inner))
            v1 = u1 + step * gxw
            v2 = u2 + step * gyw

            u1_new = v1 + params.theta * divergence(p11, p12)
            u2_new = v2 + params.theta * divergence(p21, p22)
            delta = float(np.mean(np.hypot(u1_new - u1, u2_new - u2)))
            u1, u2 = u1_new, u2_new

            u1x, u1y = image_gradient(u1)
            u2x, u2y = image_gradient(u2)
            ng1 = 1.0 + taut * np.hypot(u1x, u1y)
            ng2 = 1.0 + taut * np.hypot(u2x, u2y)
            p11 = (p11 + taut * u1x) / ng1
            p12 = (p12 + taut * u1y) / ng1
            p21 = (p21 + taut * u2x) / ng2
            p22 = (p22 + taut * u2y) / ng2

            if delta < params.epsilon:
                break

        if params.median_filtering and warp < params.n_warps - 1:
            u1 = median_filter(u1, size=3)
            u2 = median_filter(u2, size=3)

    return u1, u2


def effective_lambda(params: Tvl1Params) -> float:
    """Data weight of the objective the solver actually minimizes.

    The solver rescales [0, 1] intensities to 0..255 (the range ``lam`` is
    calibrated for), which is equivalent to minimizing
    ``TV(u) + (255 * lam) * sum |rho(u)|`` on the raw inputs. Pass this value
    to :func:`energy` to measure that objective.
    """
    return 255.0 * params.lam


def compute_flow(i0, i1, params: Tvl1Params | None = None) -> FlowField:
    """Estimate the flow taking ``i0`` onto ``i1`` (``i1(x + u) ~ i0(x)``)."""
    if params is None:
        params = Tvl1Params()
    i0 = _as_plane("i0", i0)
    i1 = _as_plane("i1", i1)
    if i0.shape != i1.shape:
        raise ValueError(f"i0 shape {i0.shape} != i1 shape {i1.shape}")

    # Rescale to the intensity range the default data weight expects.
    pyr0 = build_pyramid(i0 * 255.0, params.n_scales, params.zoom)
    pyr1 = build_pyramid(i1 * 255.0, params.n_scales, params.zoom)
    n = len(pyr0)

    u1 = np.zeros_like(pyr0[-1])
    u2 = np.zeros_like(pyr0[-1])
    for k in range(n - 1, -1, -1):
        u1, u2 = _solve_level(pyr0[k], pyr1[k], u1, u2, params)
        if k > 0:
            nh, nw = pyr0[k - 1].shape
            sh, sw = u1.shape
            u1 = resize_bilinear(u1, nh, nw) * (nw / sw)
            u2 = resize_bilinear(u2, nh, nw) * (nh / sh)
    return FlowField(u1, u2)


def flow_with_report(i0, i1, params: Tvl1Params | None = None) -> tuple[FlowField, dict]:
    """Run the solver and report its objective before (zero flow) and after."""
    if params is None:
        params = Tvl1Params()
    i0 = _as_plane("i0", i0)
    i1 = _as_plane("i1", i1)
    flow = compute_flow(i0, i1, params)
    zero = FlowField.zeros(*i0.shape)
    lam_eff = effective_lambda(params)
    report = {
        "energy_zero_flow": energy(i0, i1, zero, lam_eff),
        "energy_final": energy(i0, i1, flow, lam_eff),
        "mean_abs_u1": float(np.mean(np.abs(flow.u1))),
        "mean_abs_u2": float(np.mean(np.abs(flow.u2))),
    }
    return flow, report

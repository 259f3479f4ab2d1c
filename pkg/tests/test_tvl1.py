"""Operator, pyramid, warping and solver tests for the TV-L1 flow module."""

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter, map_coordinates

from knights.tvl1 import (
    FlowField,
    Tvl1Params,
    build_pyramid,
    compute_flow,
    divergence,
    effective_lambda,
    energy,
    flow_with_report,
    image_gradient,
    resize_bilinear,
    warp_bilinear,
)


def smooth_texture(rng, h, w, sigma=2.0):
    """Band-limited noise normalized to [0, 1]."""
    img = gaussian_filter(rng.standard_normal((h, w)), sigma)
    img -= img.min()
    return img / img.max()


def translated_pair(rng, h, w, shift):
    """(i0, i1) where i1 is i0 shifted right by `shift` px (truth u1=+shift)."""
    base = smooth_texture(rng, h, w + shift)
    i0 = base[:, shift:]
    i1 = base[:, : w]
    return i0, i1


class TestImageGradient:
    def test_constant_image(self):
        gx, gy = image_gradient(np.full((6, 7), 0.4))
        assert np.all(gx == 0) and np.all(gy == 0)

    def test_linear_ramp(self):
        w = 8
        img = np.tile(np.arange(w) / w, (5, 1))
        gx, gy = image_gradient(img)
        np.testing.assert_allclose(gx[:, :-1], 1.0 / w, atol=1e-15)
        assert np.all(gx[:, -1] == 0)
        assert np.all(gy == 0)

    def test_matches_index_oracle(self):
        rng = np.random.default_rng(0)
        img = rng.random((5, 5))
        gx, gy = image_gradient(img)
        for y in range(5):
            for x in range(5):
                ex = img[y, x + 1] - img[y, x] if x < 4 else 0.0
                ey = img[y + 1, x] - img[y, x] if y < 4 else 0.0
                assert gx[y, x] == pytest.approx(ex, abs=1e-15)
                assert gy[y, x] == pytest.approx(ey, abs=1e-15)


class TestDivergence:
    def test_zero_fields(self):
        assert np.all(divergence(np.zeros((4, 4)), np.zeros((4, 4))) == 0)

    def test_adjoint_identity(self):
        rng = np.random.default_rng(1)
        for shape in [(7, 7), (5, 9), (16, 16), (32, 32), (2, 2)]:
            u = rng.uniform(-1, 1, shape)
            p1 = rng.uniform(-1, 1, shape)
            p2 = rng.uniform(-1, 1, shape)
            gx, gy = image_gradient(u)
            lhs = float(np.sum(gx * p1 + gy * p2))
            rhs = float(np.sum(u * divergence(p1, p2)))
            assert abs(lhs + rhs) < 1e-12

    def test_interior_impulse_stencil(self):
        p1 = np.zeros((7, 7))
        p1[3, 2] = 1.0
        div = divergence(p1, np.zeros((7, 7)))
        expected = np.zeros((7, 7))
        expected[3, 2] = 1.0
        expected[3, 3] = -1.0
        np.testing.assert_array_equal(div, expected)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            divergence(np.zeros((3, 3)), np.zeros((4, 3)))


class TestWarp:
    def test_zero_flow_is_identity(self):
        rng = np.random.default_rng(4)
        img = rng.random((9, 11))
        out = warp_bilinear(img, FlowField.zeros(9, 11))
        np.testing.assert_array_equal(out, img)

    def test_integer_shift_on_ramp(self):
        w = 10
        img = np.tile(np.arange(w, dtype=float), (6, 1))
        flow = FlowField(np.ones((6, w)), np.zeros((6, w)))
        out = warp_bilinear(img, flow)
        np.testing.assert_allclose(out[:, :-1], img[:, 1:], atol=1e-15)
        np.testing.assert_allclose(out[:, -1], img[:, -1], atol=1e-15)  # clamped

    def test_matches_scipy_interpolation(self):
        rng = np.random.default_rng(2)
        img = rng.random((12, 13))
        u1 = rng.uniform(-2.0, 2.0, (12, 13)) + 0.5
        u2 = rng.uniform(-2.0, 2.0, (12, 13))
        out = warp_bilinear(img, FlowField(u1, u2))
        ys = np.arange(12)[:, None] + u2
        xs = np.arange(13)[None, :] + u1
        # mode="nearest" extends the border, equivalent to clamped sampling
        want = map_coordinates(img, [ys, xs], order=1, mode="nearest")
        np.testing.assert_allclose(out, want, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            warp_bilinear(np.zeros((4, 4)), FlowField.zeros(4, 5))


class TestPyramid:
    def test_single_scale_is_input(self):
        rng = np.random.default_rng(5)
        img = rng.random((40, 30))
        levels = build_pyramid(img, 1, 0.5)
        assert len(levels) == 1
        np.testing.assert_array_equal(levels[0], img)

    def test_level_sizes(self):
        img = np.zeros((128, 128))
        levels = build_pyramid(img, 3, 0.5)
        assert [lvl.shape for lvl in levels] == [(128, 128), (64, 64), (32, 32)]

    def test_min_size_truncates(self):
        img = np.zeros((64, 64))
        levels = build_pyramid(img, 6, 0.5)
        assert [lvl.shape for lvl in levels] == [(64, 64), (32, 32), (16, 16)]

    def test_mean_roughly_preserved(self):
        rng = np.random.default_rng(3)
        img = rng.random((64, 64))
        levels = build_pyramid(img, 3, 0.5)
        base = levels[0].mean()
        for lvl in levels[1:]:
            assert abs(lvl.mean() - base) < 0.05


class TestResize:
    def test_identity_size(self):
        rng = np.random.default_rng(6)
        img = rng.random((7, 8))
        np.testing.assert_allclose(resize_bilinear(img, 7, 8), img, atol=1e-15)

    def test_constant_preserved(self):
        img = np.full((10, 10), 0.37)
        out = resize_bilinear(img, 5, 7)
        np.testing.assert_allclose(out, 0.37, atol=1e-15)


class TestEnergy:
    def test_identical_zero_flow_is_zero(self):
        rng = np.random.default_rng(7)
        img = rng.random((8, 8))
        assert energy(img, img, FlowField.zeros(8, 8), 0.15) == 0.0

    def test_zero_flow_reduces_to_data_term(self):
        rng = np.random.default_rng(8)
        i0 = rng.random((6, 6))
        i1 = rng.random((6, 6))
        lam = 0.2
        got = energy(i0, i1, FlowField.zeros(6, 6), lam)
        assert got == pytest.approx(lam * np.sum(np.abs(i1 - i0)), rel=1e-13)


class TestSolver:
    def test_zero_motion_fixed_point(self):
        rng = np.random.default_rng(10)
        img = smooth_texture(rng, 48, 48)
        flow = compute_flow(img, img)
        mean_mag = np.mean(np.hypot(flow.u1, flow.u2))
        assert mean_mag < 1e-3

    @pytest.mark.parametrize("shift", [1, 2])
    def test_translation_recovery(self, shift):
        rng = np.random.default_rng(11)
        i0, i1 = translated_pair(rng, 64, 64, shift)
        flow = compute_flow(i0, i1)
        m = 8  # interior margin
        epe = np.hypot(flow.u1 - shift, flow.u2)[m:-m, m:-m]
        assert epe.mean() < 0.3

    def test_energy_descent(self):
        rng = np.random.default_rng(4)
        base = smooth_texture(rng, 64, 64)
        # displaced, slightly warped second frame
        wob1 = 1.5 * np.sin(np.linspace(0, 2 * np.pi, 64))[None, :] * np.ones((64, 1))
        wob2 = 0.8 * np.cos(np.linspace(0, 2 * np.pi, 64))[:, None] * np.ones((1, 64))
        i1 = warp_bilinear(base, FlowField(wob1, wob2))
        params = Tvl1Params()
        flow = compute_flow(base, i1, params)
        zero = FlowField.zeros(64, 64)
        lam = effective_lambda(params)  # measure the objective being minimized
        assert energy(base, i1, flow, lam) <= energy(base, i1, zero, lam)

    def test_deterministic(self):
        rng = np.random.default_rng(13)
        i0, i1 = translated_pair(rng, 48, 48, 1)
        f1 = compute_flow(i0, i1)
        f2 = compute_flow(i0, i1)
        np.testing.assert_array_equal(f1.u1, f2.u1)
        np.testing.assert_array_equal(f1.u2, f2.u2)

    def test_flow_with_report(self):
        rng = np.random.default_rng(14)
        i0, i1 = translated_pair(rng, 48, 48, 1)
        flow, report = flow_with_report(i0, i1)
        assert report["energy_final"] <= report["energy_zero_flow"]
        assert report["mean_abs_u1"] > 0.5  # recovered most of the 1px shift

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            compute_flow(np.zeros((8, 8)), np.zeros((8, 9)))


class TestParams:
    def test_defaults_valid(self):
        Tvl1Params()

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError, match="lam"):
            Tvl1Params(lam=0.0)
        with pytest.raises(ValueError, match="zoom"):
            Tvl1Params(zoom=1.0)
        with pytest.raises(ValueError, match="tau_step"):
            Tvl1Params(tau_step=0.5)  # exceeds 0.125/theta for theta=0.3
        with pytest.raises(ValueError, match="n_warps"):
            Tvl1Params(n_warps=0)

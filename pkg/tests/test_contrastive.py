"""Value checks for the contrastive losses against closed forms and oracles."""

import math

import numpy as np
import pytest

from knights.contrastive import (
    EmbeddingBatch,
    TemporalClipSet,
    combined_tclr_loss,
    global_local_loss,
    instance_contrastive_loss,
    local_local_loss,
    similarity,
)
from knights.reference import (
    combined_loss_reference,
    global_local_reference,
    instance_loss_reference,
    local_local_reference,
)


def random_batch(rng, n, d):
    return EmbeddingBatch(rng.standard_normal((n, d)), rng.standard_normal((n, d)))


def random_clip_set(rng, n, d):
    return TemporalClipSet(
        locals=rng.standard_normal((n, d)),
        locals_twin=rng.standard_normal((n, d)),
        global_slices=rng.standard_normal((n, d)),
        local_anchors=rng.standard_normal((n, d)),
    )


class TestSimilarity:
    def test_identical_vectors(self):
        assert similarity([1.0, 0.0], [1.0, 0.0], 1.0) == pytest.approx(math.e, rel=1e-14)

    def test_orthogonal_vectors(self):
        assert similarity([1.0, 0.0], [0.0, 1.0], 0.5) == pytest.approx(1.0, rel=1e-14)

    def test_direct_evaluation(self):
        expected = math.exp((1.0 / math.sqrt(2.0)) / 0.1)
        assert similarity([1.0, 1.0], [1.0, 0.0], 0.1) == pytest.approx(expected, rel=1e-13)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        u, v = rng.standard_normal(5), rng.standard_normal(5)
        assert similarity(u, v, 0.2) == pytest.approx(similarity(v, u, 0.2), rel=1e-14)

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError, match="zero-norm"):
            similarity([0.0, 0.0], [1.0, 0.0], 1.0)

    def test_bad_temperature_rejected(self):
        with pytest.raises(ValueError, match="temperature"):
            similarity([1.0], [1.0], 0.0)
        with pytest.raises(ValueError, match="temperature"):
            similarity([1.0], [1.0], -2.0)


class TestInstanceLoss:
    def test_single_instance_is_exactly_zero(self):
        batch = EmbeddingBatch([[0.3, -1.2, 0.5]], [[1.0, 0.2, -0.4]])
        assert instance_contrastive_loss(batch, 0.7).value == 0.0

    def test_all_equal_rows_give_log7(self):
        row = np.array([0.2, -0.7, 1.1])
        batch = EmbeddingBatch(np.tile(row, (4, 1)), np.tile(row, (4, 1)))
        for tau in (0.1, 0.5, 1.0):
            res = instance_contrastive_loss(batch, tau)
            assert res.value == pytest.approx(math.log(7.0), abs=1e-12)

    def test_matches_reference_seed0(self):
        rng = np.random.default_rng(0)
        batch = random_batch(rng, 2, 3)
        got = instance_contrastive_loss(batch, 0.1).value
        want = instance_loss_reference(batch.embeddings, batch.twins, 0.1)
        assert got == pytest.approx(want, abs=1e-10)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            EmbeddingBatch(np.empty((0, 3)), np.empty((0, 3)))

    def test_negative_count(self):
        rng = np.random.default_rng(5)
        for n in (1, 2, 5):
            res = instance_contrastive_loss(random_batch(rng, n, 4), 0.5)
            assert res.negatives_per_anchor == 2 * n - 2

    def test_per_term_length_and_mean(self):
        rng = np.random.default_rng(6)
        res = instance_contrastive_loss(random_batch(rng, 5, 3), 0.5)
        assert res.per_term.shape == (5,)
        assert res.value == pytest.approx(np.mean(res.per_term), rel=1e-15)


class TestLocalLocalLoss:
    def test_single_segment_is_exactly_zero(self):
        clips = TemporalClipSet(
            locals=[[1.0, 2.0]],
            locals_twin=[[0.5, -0.1]],
            global_slices=[[1.0, 0.0]],
            local_anchors=[[0.0, 1.0]],
        )
        assert local_local_loss(clips, 0.3).value == 0.0

    def test_all_equal_rows_give_4log7(self):
        row = np.array([1.0, -0.5, 0.25, 2.0])
        m = np.tile(row, (4, 1))
        clips = TemporalClipSet(locals=m, locals_twin=m, global_slices=m, local_anchors=m)
        res = local_local_loss(clips, 0.2)
        assert res.value == pytest.approx(4.0 * math.log(7.0), abs=1e-12)

    def test_matches_reference_seed1(self):
        rng = np.random.default_rng(1)
        clips = random_clip_set(rng, 3, 4)
        got = local_local_loss(clips, 0.2).value
        want = local_local_reference(clips.locals, clips.locals_twin, 0.2)
        assert got == pytest.approx(want, abs=1e-10)

    def test_negative_count(self):
        rng = np.random.default_rng(2)
        for n in (1, 3, 6):
            res = local_local_loss(random_clip_set(rng, n, 4), 0.5)
            assert res.negatives_per_anchor == 2 * n - 2


class TestGlobalLocalLoss:
    def test_single_segment_is_exactly_zero(self):
        clips = TemporalClipSet(
            locals=[[1.0, 2.0]],
            locals_twin=[[0.5, -0.1]],
            global_slices=[[1.0, 0.0]],
            local_anchors=[[0.0, 1.0]],
        )
        assert global_local_loss(clips, 0.3).value == 0.0

    def test_all_equal_rows_give_8log4(self):
        row = np.array([0.4, 0.8, -1.3])
        m = np.tile(row, (4, 1))
        clips = TemporalClipSet(locals=m, locals_twin=m, global_slices=m, local_anchors=m)
        res = global_local_loss(clips, 0.5)
        assert res.value == pytest.approx(8.0 * math.log(4.0), abs=1e-12)

    def test_matches_reference_seed2(self):
        rng = np.random.default_rng(2)
        clips = random_clip_set(rng, 3, 4)
        got = global_local_loss(clips, 0.5).value
        want = global_local_reference(clips.global_slices, clips.local_anchors, 0.5)
        assert got == pytest.approx(want, abs=1e-10)


class TestCombinedLoss:
    def test_projection_onto_instance_loss(self):
        rng = np.random.default_rng(4)
        batch = random_batch(rng, 3, 5)
        sets = [random_clip_set(rng, 2, 5)]
        combined = combined_tclr_loss(batch, sets, 0.5, weights=(1.0, 0.0, 0.0))
        alone = instance_contrastive_loss(batch, 0.5)
        assert combined.value == alone.value
        np.testing.assert_array_equal(
            combined.batch_grads["embeddings"], alone.grads["embeddings"]
        )
        for grads in combined.clip_grads:
            for buf in grads.values():
                np.testing.assert_array_equal(buf, np.zeros_like(buf))

    def test_zero_weights_give_zero(self):
        rng = np.random.default_rng(7)
        batch = random_batch(rng, 3, 4)
        sets = [random_clip_set(rng, 3, 4)]
        combined = combined_tclr_loss(batch, sets, 0.1, weights=(0.0, 0.0, 0.0))
        assert combined.value == 0.0
        for buf in combined.batch_grads.values():
            np.testing.assert_array_equal(buf, np.zeros_like(buf))
        for grads in combined.clip_grads:
            for buf in grads.values():
                np.testing.assert_array_equal(buf, np.zeros_like(buf))

    def test_unit_weights_sum_components_seed3(self):
        rng = np.random.default_rng(3)
        batch = random_batch(rng, 4, 6)
        sets = [random_clip_set(rng, 3, 6), random_clip_set(rng, 3, 6)]
        combined = combined_tclr_loss(batch, sets, 0.2, weights=(1.0, 1.0, 1.0))
        ic = instance_contrastive_loss(batch, 0.2).value
        ll = np.mean([local_local_loss(c, 0.2).value for c in sets])
        gl = np.mean([global_local_loss(c, 0.2).value for c in sets])
        assert combined.value == pytest.approx(ic + ll + gl, abs=1e-12)

    def test_matches_reference(self):
        rng = np.random.default_rng(11)
        batch = random_batch(rng, 4, 5)
        sets = [random_clip_set(rng, 4, 5) for _ in range(3)]
        got = combined_tclr_loss(batch, sets, 0.5, weights=(0.7, 1.3, 0.4)).value
        want = combined_loss_reference(batch, sets, 0.5, weights=(0.7, 1.3, 0.4))
        assert got == pytest.approx(want, abs=1e-10)


class TestProperties:
    """Randomized invariants with fixed seeds."""

    def test_oracle_equivalence_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            n = int(rng.integers(1, 7))
            nt = int(rng.integers(1, 7))
            d = int(rng.integers(1, 9))
            tau = float(rng.choice([0.1, 0.5, 1.0]))
            batch = random_batch(rng, n, d)
            clips = random_clip_set(rng, nt, d)
            assert instance_contrastive_loss(batch, tau).value == pytest.approx(
                instance_loss_reference(batch.embeddings, batch.twins, tau), abs=1e-10
            )
            assert local_local_loss(clips, tau).value == pytest.approx(
                local_local_reference(clips.locals, clips.locals_twin, tau), abs=1e-10
            )
            assert global_local_loss(clips, tau).value == pytest.approx(
                global_local_reference(clips.global_slices, clips.local_anchors, tau),
                abs=1e-10,
            )

    def test_row_scale_invariance(self):
        rng = np.random.default_rng(8)
        batch = random_batch(rng, 4, 5)
        scales = rng.uniform(0.1, 10.0, size=(4, 1))
        scaled = EmbeddingBatch(batch.embeddings * scales, batch.twins)
        a = instance_contrastive_loss(batch, 0.1).value
        b = instance_contrastive_loss(scaled, 0.1).value
        assert a == pytest.approx(b, abs=1e-10)

        clips = random_clip_set(rng, 4, 5)
        scaled_clips = TemporalClipSet(
            locals=clips.locals * 3.7,
            locals_twin=clips.locals_twin,
            global_slices=clips.global_slices,
            local_anchors=clips.local_anchors * 0.01,
        )
        assert local_local_loss(clips, 0.2).value == pytest.approx(
            local_local_loss(scaled_clips, 0.2).value, abs=1e-10
        )
        assert global_local_loss(clips, 0.2).value == pytest.approx(
            global_local_loss(scaled_clips, 0.2).value, abs=1e-10
        )

    def test_positivity(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            n = int(rng.integers(1, 7))
            d = int(rng.integers(2, 9))
            tau = float(rng.choice([0.1, 0.5, 1.0]))
            batch = random_batch(rng, n, d)
            clips = random_clip_set(rng, n, d)
            assert instance_contrastive_loss(batch, tau).value >= -1e-12
            assert local_local_loss(clips, tau).value >= -1e-12
            assert global_local_loss(clips, tau).value >= -1e-12

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(10)
        n, d = 5, 4
        batch = random_batch(rng, n, d)
        perm = rng.permutation(n)
        permuted = EmbeddingBatch(batch.embeddings[perm], batch.twins[perm])
        base = instance_contrastive_loss(batch, 0.5)
        shuffled = instance_contrastive_loss(permuted, 0.5)
        np.testing.assert_allclose(shuffled.per_term, base.per_term[perm], atol=1e-12)
        np.testing.assert_allclose(
            shuffled.grads["embeddings"], base.grads["embeddings"][perm], atol=1e-12
        )
        np.testing.assert_allclose(
            shuffled.grads["twins"], base.grads["twins"][perm], atol=1e-12
        )
        assert shuffled.value == pytest.approx(base.value, abs=1e-12)

    def test_gradients_finite_on_degenerate_inputs(self):
        row = np.array([1.0, 1.0])
        m = np.tile(row, (4, 1))
        batch = EmbeddingBatch(m, m)
        res = instance_contrastive_loss(batch, 0.1)
        for buf in res.grads.values():
            assert np.all(np.isfinite(buf))

import numpy as np
import pytest

from affectfuse.errors import InvalidDistribution, NoModalities
from affectfuse.fusion import FusionConfig, decide, fuse
from affectfuse.taxonomy import EmotionDistribution, EmotionLabel, one_hot, uniform_distribution

from conftest import rng_simplex


def dist(values) -> EmotionDistribution:
    return EmotionDistribution(np.asarray(values, dtype=np.float64))


class TestDecide:
    def test_one_hot_surprise(self):
        assert decide(dist([0, 0, 0, 0, 0, 0, 0, 1])) is EmotionLabel.SURPRISE

    def test_uniform_ties_to_lowest_index(self):
        assert decide(uniform_distribution()) is EmotionLabel.ANGRY

    def test_plain_argmax(self):
        assert decide(dist([0.3, 0.3, 0.4, 0, 0, 0, 0, 0])) is EmotionLabel.DISGUST

    def test_near_tie_within_epsilon_goes_low(self):
        probs = np.zeros(8)
        probs[2] = 0.5 - 1e-13
        probs[5] = 0.5 + 1e-13
        assert decide(dist(probs)) is EmotionLabel.DISGUST


class TestFuse:
    def test_audio_only_passthrough_any_strategy(self):
        p = dist([0.5, 0.5, 0, 0, 0, 0, 0, 0])
        for strategy in ("linear", "product", "max_confidence"):
            out = fuse(p, None, FusionConfig(strategy=strategy))
            np.testing.assert_array_equal(out.distribution.probs, p.probs)
            assert out.modalities_used == frozenset({"audio"})

    def test_text_only_passthrough(self):
        p = dist([0, 0, 0, 0, 0, 0, 0, 1])
        out = fuse(None, p, FusionConfig())
        assert out.modalities_used == frozenset({"text"})
        assert out.label is EmotionLabel.SURPRISE

    def test_linear_half_one_hots(self):
        out = fuse(
            one_hot(EmotionLabel.ANGRY), one_hot(EmotionLabel.CALM),
            FusionConfig(strategy="linear", audio_weight=0.5),
        )
        np.testing.assert_allclose(out.distribution.probs[:2], [0.5, 0.5])
        assert out.label is EmotionLabel.ANGRY  # index-0 tie-break

    def test_product_of_uniforms_is_uniform(self):
        out = fuse(uniform_distribution(), uniform_distribution(), FusionConfig(strategy="product"))
        np.testing.assert_allclose(out.distribution.probs, 0.125, atol=1e-12)

    def test_max_confidence_picks_larger_peak(self):
        sharp = dist([0.9, 0.1, 0, 0, 0, 0, 0, 0])
        flat = dist([0.2, 0.2, 0.2, 0.2, 0.05, 0.05, 0.05, 0.05])
        out = fuse(sharp, flat, FusionConfig(strategy="max_confidence"))
        np.testing.assert_array_equal(out.distribution.probs, sharp.probs)

    def test_no_modalities(self):
        with pytest.raises(NoModalities):
            fuse(None, None, FusionConfig())

    def test_invalid_input_rejected(self):
        bad = dist([0.5, 0.6, 0, 0, 0, 0, 0, 0])
        with pytest.raises(InvalidDistribution):
            fuse(bad, uniform_distribution(), FusionConfig())

    def test_modalities_used_both(self):
        out = fuse(uniform_distribution(), uniform_distribution(), FusionConfig())
        assert out.modalities_used == frozenset({"audio", "text"})


class TestFusionProperties:
    """Sampled property suite; the acceptance run uses 1,000 pairs."""

    N_PAIRS = 200

    def test_closure_and_reductions_and_invariants(self):
        rng = np.random.default_rng(42)
        for _ in range(self.N_PAIRS):
            a, t = rng_simplex(rng), rng_simplex(rng)
            pa, pt = dist(a), dist(t)
            w = float(rng.uniform())

            for strategy in ("linear", "product", "max_confidence"):
                out = fuse(pa, pt, FusionConfig(strategy=strategy, audio_weight=w))
                probs = out.distribution.probs
                assert np.all(probs >= -1e-15)
                assert abs(probs.sum() - 1.0) < 1e-9

            exact_a = fuse(pa, pt, FusionConfig(strategy="linear", audio_weight=1.0))
            exact_t = fuse(pa, pt, FusionConfig(strategy="linear", audio_weight=0.0))
            assert np.array_equal(exact_a.distribution.probs, a)
            assert np.array_equal(exact_t.distribution.probs, t)

    def test_agreement_preservation(self):
        rng = np.random.default_rng(7)
        for _ in range(self.N_PAIRS):
            k = int(rng.integers(8))
            a, t = rng_simplex(rng), rng_simplex(rng)
            a[k] += 1.0
            t[k] += 1.0
            a /= a.sum()
            t /= t.sum()
            pa, pt = dist(a), dist(t)
            for w in (0.0, 0.3, 0.5, 0.8, 1.0):
                out = fuse(pa, pt, FusionConfig(strategy="linear", audio_weight=w))
                assert int(out.label) == k
            out = fuse(pa, pt, FusionConfig(strategy="product"))
            assert int(out.label) == k

    def test_class_permutation_equivariance(self):
        rng = np.random.default_rng(9)
        for _ in range(self.N_PAIRS):
            a, t = rng_simplex(rng), rng_simplex(rng)
            sigma = rng.permutation(8)
            for strategy in ("linear", "product", "max_confidence"):
                cfg = FusionConfig(strategy=strategy, audio_weight=0.7)
                base = fuse(dist(a), dist(t), cfg)
                permed = fuse(dist(a[sigma]), dist(t[sigma]), cfg)
                np.testing.assert_allclose(
                    permed.distribution.probs, base.distribution.probs[sigma], atol=1e-12
                )
                assert int(permed.label) == int(np.nonzero(sigma == int(base.label))[0][0])

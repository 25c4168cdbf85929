import numpy as np
import pytest

from fedsim.signs import (
    StochasticSignConfig,
    apply_sign_update,
    flip_probabilities,
    majority_vote,
    pack_signs,
    sign_quantize,
    stochastic_sign_encode,
    unpack_signs,
)


class TestSignQuantize:
    def test_zero_maps_to_plus_one(self):
        out = sign_quantize(np.array([3.2, -0.1, 0.0]))
        assert out.tolist() == [1, -1, 1]

    def test_all_positive(self):
        assert np.all(sign_quantize(np.array([0.5, 2.0, 1e-12])) == 1)

    def test_odd_symmetry_without_zeros(self, rng):
        g = rng.normal(size=50)
        g = g[g != 0.0]
        assert np.array_equal(sign_quantize(-g), -sign_quantize(g))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            sign_quantize(np.array([1.0, np.nan]))
        with pytest.raises(ValueError):
            sign_quantize(np.array([np.inf]))

    def test_output_never_zero(self, rng):
        g = np.concatenate([np.zeros(5), rng.normal(size=20)])
        out = sign_quantize(g)
        assert set(np.unique(out)) <= {-1, 1}


class TestFlipProbabilities:
    def test_fair_coin_when_unbiased(self):
        cfg = StochasticSignConfig(b=0.0, p_out=0.0)
        probs, clamped = flip_probabilities(np.array([1.0, -2.0, 0.0]), cfg)
        assert np.allclose(probs, 0.5)
        assert clamped == 0

    def test_boundary_magnitude_never_flips(self):
        cfg = StochasticSignConfig(b=0.25, p_out=0.0)
        probs, clamped = flip_probabilities(np.array([2.0]), cfg)
        assert probs[0] == 0.0
        assert clamped == 0

    def test_hand_evaluated_point(self):
        cfg = StochasticSignConfig(b=0.1, p_out=0.1)
        probs, _ = flip_probabilities(np.array([2.0]), cfg)
        assert probs[0] == pytest.approx(0.25, abs=1e-15)

    def test_clamp_counted_for_oversized_magnitudes(self):
        cfg = StochasticSignConfig(b=1.0, p_out=0.0)
        probs, clamped = flip_probabilities(np.array([0.1, 5.0, -9.0]), cfg)
        assert clamped == 2
        assert probs[1] == 0.0 and probs[2] == 0.0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            StochasticSignConfig(b=-0.1, p_out=0.0)
        with pytest.raises(ValueError):
            StochasticSignConfig(b=0.1, p_out=0.5)
        with pytest.raises(ValueError):
            StochasticSignConfig(b=0.1, p_out=-0.01)


class TestStochasticEncode:
    def test_degenerates_to_quantizer_when_saturated(self, rng):
        g = rng.normal(size=30)
        g = g[np.abs(g) > 0.05]
        b = 0.5 / np.min(np.abs(g))
        cfg = StochasticSignConfig(b=b, p_out=0.0)
        out = stochastic_sign_encode(g, cfg, rng)
        assert np.array_equal(out, sign_quantize(g))

    def test_output_is_sign_vector(self, rng):
        cfg = StochasticSignConfig(b=0.1, p_out=0.2)
        out = stochastic_sign_encode(rng.normal(size=100), cfg, rng)
        assert set(np.unique(out)) <= {-1, 1}

    def test_flip_frequency_matches_formula(self):
        g = np.array([2.0])
        cfg = StochasticSignConfig(b=0.1, p_out=0.1)
        rng = np.random.default_rng(7)
        trials = 40_000
        sent = stochastic_sign_encode(np.full(trials, 2.0), cfg, rng)
        freq = np.mean(sent == -1)
        sigma = np.sqrt(0.25 * 0.75 / trials)
        assert abs(freq - 0.25) < 4 * sigma
        assert g.shape == (1,)

    def test_same_stream_reproduces(self):
        g = np.linspace(-3, 3, 64)
        cfg = StochasticSignConfig(b=0.05, p_out=0.1)
        a = stochastic_sign_encode(g, cfg, np.random.default_rng(42))
        b = stochastic_sign_encode(g, cfg, np.random.default_rng(42))
        assert np.array_equal(a, b)


class TestMajorityVote:
    def test_strict_majorities(self):
        packets = [np.array([1, 1]), np.array([1, -1]), np.array([-1, -1])]
        assert majority_vote(packets).tolist() == [1, -1]

    def test_unanimity(self):
        p = np.array([1, -1, 1, 1], dtype=np.int8)
        assert np.array_equal(majority_vote([p, p, p]), p)

    def test_tie_resolves_positive(self):
        assert majority_vote([np.array([1]), np.array([-1])]).tolist() == [1]

    def test_permutation_invariant(self, rng):
        packets = [sign_quantize(rng.normal(size=40)) for _ in range(7)]
        base = majority_vote(packets)
        order = rng.permutation(7)
        assert np.array_equal(base, majority_vote([packets[i] for i in order]))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            majority_vote([np.array([1, -1]), np.array([1])])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            majority_vote([])


class TestApplySignUpdate:
    def test_direct_arithmetic(self):
        out = apply_sign_update(np.zeros(2), np.array([1, -1]), 0.1)
        assert out.tolist() == [-0.1, 0.1]

    def test_zero_eta_rejected(self):
        with pytest.raises(ValueError):
            apply_sign_update(np.zeros(2), np.array([1, -1]), 0.0)

    def test_inverse_step_exact(self, rng):
        w = rng.normal(size=16)
        vote = sign_quantize(rng.normal(size=16))
        back = apply_sign_update(apply_sign_update(w, vote, 0.01), -vote, 0.01)
        assert np.array_equal(back, w)


class TestPacking:
    def test_round_trip(self, rng):
        for d in (1, 7, 8, 9, 64, 100):
            signs = sign_quantize(rng.normal(size=d))
            assert np.array_equal(unpack_signs(pack_signs(signs), d), signs)

    def test_payload_is_one_bit_per_coordinate(self):
        signs = np.ones(100, dtype=np.int8)
        assert len(pack_signs(signs)) == 13  # ceil(100 / 8)

    def test_little_endian_bit_order(self):
        signs = np.array([1, -1, -1, -1, -1, -1, -1, -1], dtype=np.int8)
        assert pack_signs(signs)[0] == 1

    def test_length_validation(self):
        with pytest.raises(ValueError):
            unpack_signs(b"\x00", 9)

import numpy as np
import pytest

from fedsim.signs import sign_quantize
from fedsim.wireless import (
    ChannelModel,
    DeviceModel,
    apply_channel,
    comm_energy,
    comm_time,
    compute_energy,
    compute_time,
    outage_probability,
    outage_surrogate,
    power_for_outage,
    round_energy,
    round_time,
    sample_rayleigh_outage,
)


@pytest.fixture()
def device():
    return DeviceModel(alpha=2e-28, c=20, D=5e6, f_min=0.3e9, f_max=2e9, P_max=1.0)


@pytest.fixture()
def channel():
    return ChannelModel(N0=1e-8, B=15e3, packet_bits=7850)


class TestComputeCosts:
    def test_energy_hand_values(self, device):
        assert compute_energy(device, 1e9) == pytest.approx(0.01, rel=1e-12)
        assert compute_energy(device, 0.3e9) == pytest.approx(9e-4, rel=1e-12)

    def test_energy_quadratic_law(self, device):
        assert compute_energy(device, 2e9) == pytest.approx(
            4 * compute_energy(device, 1e9), rel=1e-12
        )

    def test_time_hand_values(self, device):
        assert compute_time(device, 1e9) == pytest.approx(0.1, rel=1e-12)
        assert compute_time(device, 2e9) == pytest.approx(0.05, rel=1e-12)

    def test_nonpositive_frequency_rejected(self, device):
        with pytest.raises(ValueError):
            compute_time(device, 0.0)
        with pytest.raises(ValueError):
            compute_energy(device, -1e9)


class TestCommCosts:
    def test_time_and_energy(self, channel):
        assert comm_time(channel, 5.2333333333333334) == pytest.approx(0.1, rel=1e-12)
        assert comm_energy(channel, 5.2333333333333334, 1.0) == pytest.approx(
            0.1, rel=1e-12
        )

    def test_round_totals(self, device, channel):
        t = round_time(device, channel, 2e9, 5.2333333333333334)
        e = round_energy(device, channel, 2e9, 5.2333333333333334, 1.0)
        assert t == pytest.approx(0.15, rel=1e-12)
        assert e == pytest.approx(0.14, rel=1e-12)

    def test_nonpositive_rate_rejected(self, channel):
        with pytest.raises(ValueError):
            comm_time(channel, 0.0)


class TestOutage:
    def test_monotone_in_rate_and_power(self, channel):
        p1 = outage_probability(5.0, 0.5, channel)
        assert outage_probability(6.0, 0.5, channel) > p1
        assert outage_probability(5.0, 0.9, channel) < p1

    def test_zero_rate_never_outages(self, channel):
        assert outage_probability(0.0, 0.5, channel) == 0.0

    def test_inverse_identity(self, channel):
        for rate in np.linspace(0.5, 12.0, 30):
            for target in (0.01, 0.1, 0.3):
                power = power_for_outage(rate, target, channel)
                assert outage_probability(rate, power, channel) == pytest.approx(
                    target, abs=1e-12
                )

    def test_surrogate_upper_bounds_exact(self, channel):
        for rate in np.linspace(0.5, 10.0, 20):
            exact = outage_probability(rate, 0.7, channel)
            assert outage_surrogate(rate, 0.7, channel) >= exact

    def test_surrogate_tight_at_high_snr(self, channel):
        exact = outage_probability(1.0, 1.0, channel)
        approx = outage_surrogate(1.0, 1.0, channel)
        assert approx == pytest.approx(exact, rel=1e-4)

    def test_probability_range(self, channel, rng):
        # extreme rates saturate to exactly 1.0 in float arithmetic
        for _ in range(100):
            p = outage_probability(rng.uniform(0, 20), rng.uniform(0.01, 1), channel)
            assert 0.0 <= p <= 1.0


class TestRayleighSampling:
    def test_matches_formula_within_band(self, channel):
        rng = np.random.default_rng(99)
        trials = 100_000
        for rate, power in [(4.0, 0.3), (7.0, 0.8), (10.0, 1.0)]:
            p = outage_probability(rate, power, channel)
            draws = sample_rayleigh_outage(rate, power, channel, rng, size=trials)
            sigma = np.sqrt(p * (1 - p) / trials)
            assert abs(draws.mean() - p) < 4 * sigma

    def test_scalar_draw(self, channel):
        rng = np.random.default_rng(5)
        out = sample_rayleigh_outage(6.0, 0.5, channel, rng)
        assert isinstance(out, (bool, np.bool_))


class TestApplyChannel:
    def test_outage_flips_whole_packet(self):
        packet = sign_quantize(np.array([1.0, -2.0, 3.0]))
        got, outage = apply_channel(packet, 1.0 - 1e-16, np.random.default_rng(0))
        assert outage
        assert np.array_equal(got, -packet)

    def test_no_outage_is_identity(self):
        packet = sign_quantize(np.array([1.0, -2.0]))
        got, outage = apply_channel(packet, 0.0, np.random.default_rng(0))
        assert not outage
        assert np.array_equal(got, packet)

    def test_deterministic_given_stream(self):
        packet = sign_quantize(np.linspace(-1, 1, 9))
        a = apply_channel(packet, 0.5, np.random.default_rng(3))
        b = apply_channel(packet, 0.5, np.random.default_rng(3))
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]


class TestDeviceValidation:
    def test_frequency_ordering_enforced(self):
        with pytest.raises(ValueError):
            DeviceModel(alpha=1e-28, c=10, D=1e6, f_min=2e9, f_max=1e9, P_max=1.0)

    def test_power_bounds_enforced(self):
        with pytest.raises(ValueError):
            DeviceModel(
                alpha=1e-28, c=10, D=1e6, f_min=1e9, f_max=2e9, P_max=0.5, P_min=0.5
            )

    def test_channel_positive_fields(self):
        with pytest.raises(ValueError):
            ChannelModel(N0=0.0, B=15e3, packet_bits=100)
        with pytest.raises(ValueError):
            ChannelModel(N0=1e-8, B=15e3, packet_bits=0)

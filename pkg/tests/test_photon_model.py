import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photoncert.errors import BadWeights, MismatchedLengths, TruncationTooSevere, ValidationError, ZeroMeanSource
from photoncert.photon_model import (
    Mixture,
    PhotonNumberDistribution,
    Poisson,
    SinglePhoton,
    Thermal,
    correlation_from_distribution,
    factorial_moment,
    mean_photon_number,
    mixture_distribution,
    parse_source,
    poisson_distribution,
    single_photon_distribution,
    thermal_distribution,
)


def poisson_pmf(mu, n):
    return math.exp(-mu) * mu**n / math.factorial(n)


class TestPoisson:
    def test_p1_at_042(self):
        d = poisson_distribution(0.42, 25)
        assert d[1] == pytest.approx(poisson_pmf(0.42, 1), abs=1e-15)
        assert d[1] == pytest.approx(0.275960, abs=5e-7)

    def test_p0_at_01(self):
        assert poisson_distribution(0.1, 25)[0] == pytest.approx(0.90484, abs=5e-6)

    def test_vacuum_limit(self):
        p0 = poisson_distribution(1e-8, 25)[0]
        assert 1 - 1e-7 <= p0 <= 1

    def test_truncation_too_severe(self):
        with pytest.raises(TruncationTooSevere):
            poisson_distribution(5.0, 4)

    def test_rejects_nonpositive_mean(self):
        with pytest.raises(ValidationError):
            poisson_distribution(0.0, 25)


class TestThermal:
    def test_mu_one(self):
        d = thermal_distribution(1.0, 40)
        assert d[0] == 0.5
        assert d[1] == 0.25

    def test_p0_at_042(self):
        assert thermal_distribution(0.42, 40)[0] == pytest.approx(1 / 1.42, abs=1e-15)

    def test_truncation_too_severe(self):
        with pytest.raises(TruncationTooSevere):
            thermal_distribution(0.42, 2)


class TestSinglePhoton:
    def test_mean(self):
        assert mean_photon_number(single_photon_distribution(25)) == 1

    def test_g2_zero(self):
        assert correlation_from_distribution(single_photon_distribution(25), 2) == 0

    def test_boundary_cut(self):
        d = single_photon_distribution(1)
        assert d.n_cut == 1 and d.probs == (0.0, 1.0)


class TestMixture:
    def test_identity(self):
        d = poisson_distribution(0.42, 25)
        assert mixture_distribution([d], [1.0]) == d

    def test_half_half_vacuum(self):
        m = mixture_distribution([poisson_distribution(0.42, 25), thermal_distribution(0.42, 25)], [0.5, 0.5])
        assert m[0] == pytest.approx((math.exp(-0.42) + 1 / 1.42) / 2, abs=1e-15)
        assert m[0] == pytest.approx(0.68064, abs=5e-6)

    def test_bad_weights(self):
        d = poisson_distribution(0.42, 25)
        with pytest.raises(BadWeights):
            mixture_distribution([d, d], [0.6, 0.5])

    def test_mismatched_lengths(self):
        d = poisson_distribution(0.42, 25)
        with pytest.raises(MismatchedLengths):
            mixture_distribution([d, d], [1.0])

    def test_different_cuts_rejected(self):
        with pytest.raises(ValidationError):
            mixture_distribution([poisson_distribution(0.42, 25), poisson_distribution(0.42, 30)], [0.5, 0.5])


class TestMean:
    def test_poisson(self):
        assert mean_photon_number(poisson_distribution(0.42, 25)) == pytest.approx(0.42, abs=1e-9)

    def test_thermal(self):
        assert mean_photon_number(thermal_distribution(1.0, 60)) == pytest.approx(1.0, abs=1e-9)


class TestCorrelations:
    def test_poisson_g2(self):
        assert correlation_from_distribution(poisson_distribution(0.42, 25), 2) == pytest.approx(1, abs=1e-9)

    @pytest.mark.parametrize("m, expected, tol", [(2, 2.0, 1e-6), (3, 6.0, 1e-5), (4, 24.0, 1e-4)])
    def test_thermal_factorial(self, m, expected, tol):
        assert correlation_from_distribution(thermal_distribution(0.42, 60), m) == pytest.approx(expected, abs=tol)

    def test_zero_mean(self):
        vac = PhotonNumberDistribution((1.0, 0.0))
        with pytest.raises(ZeroMeanSource):
            correlation_from_distribution(vac, 2)

    def test_order_checked(self):
        with pytest.raises(ValidationError):
            correlation_from_distribution(poisson_distribution(0.42, 25), 1)

    def test_factorial_moment_oracle(self):
        d = thermal_distribution(0.8, 50)
        direct = sum(p * n * (n - 1) * (n - 2) for n, p in enumerate(d.probs))
        assert factorial_moment(d, 3) == pytest.approx(direct, rel=1e-13)


class TestDistributionInvariants:
    def test_mass_above_one_rejected(self):
        with pytest.raises(ValidationError):
            PhotonNumberDistribution((0.6, 0.5))

    def test_mass_missing_rejected(self):
        with pytest.raises(ValidationError):
            PhotonNumberDistribution((0.5, 0.4))

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            PhotonNumberDistribution((1.1, -0.1))

    def test_cut_zero_rejected(self):
        with pytest.raises(ValidationError):
            PhotonNumberDistribution((1.0,))


mus = st.floats(0.01, 3.0)


@given(mu=mus, m=st.sampled_from([2, 3, 4]))
def test_poisson_correlations_are_one(mu, m):
    n_cut = max(25, int(mu * 10) + 30)
    assert abs(correlation_from_distribution(poisson_distribution(mu, n_cut), m) - 1) < 1e-6


@given(mu=st.floats(0.05, 1.0), m=st.sampled_from([2, 3, 4]))
@settings(max_examples=40)
def test_thermal_correlation_grows_with_cut(mu, m):
    values = [correlation_from_distribution(thermal_distribution(mu, n), m) for n in (60, 80, 120)]
    assert values[0] <= values[1] <= values[2] <= math.factorial(m) * (1 + 1e-12)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_single_photon_correlations_exactly_zero(m):
    assert correlation_from_distribution(single_photon_distribution(25), m) == 0.0


@given(mu=st.floats(0.05, 1.5), w=st.floats(0.01, 0.99), m=st.sampled_from([2, 3, 4]))
def test_equal_mean_mixture_is_linear(mu, w, m):
    a, b = poisson_distribution(mu, 80), thermal_distribution(mu, 80)
    mix = mixture_distribution([a, b], [w, 1 - w])
    expected = w * correlation_from_distribution(a, m) + (1 - w) * correlation_from_distribution(b, m)
    assert correlation_from_distribution(mix, m) == pytest.approx(expected, abs=1e-9, rel=1e-9)


@given(mu=mus, m=st.sampled_from([2, 3, 4]))
@settings(max_examples=20)
def test_correlation_is_deterministic(mu, m):
    d = thermal_distribution(mu, 100)
    assert correlation_from_distribution(d, m) == correlation_from_distribution(d, m)


class TestSourceKinds:
    def test_parse_roundtrip(self):
        for text in ("poisson:0.42", "thermal:0.42", "single"):
            assert str(parse_source(text)) == text

    def test_parse_mixture(self):
        src = parse_source("0.7*thermal:0.42+0.3*poisson:0.42")
        assert isinstance(src, Mixture)
        assert src.mean == pytest.approx(0.42)

    @pytest.mark.parametrize("text", ["", "poisson", "poisson:-1", "laser:1", "0.5*single"])
    def test_parse_rejects(self, text):
        with pytest.raises(ValidationError):
            parse_source(text)

    @pytest.mark.parametrize("src", [Poisson(0.42), Thermal(0.42), SinglePhoton(),
                                     Mixture((Thermal(0.42), Poisson(0.42)), (0.5, 0.5))])
    def test_sampling_matches_distribution(self, src):
        # the empirical mean of 2e5 samples sits within 6 standard errors
        rng = np.random.default_rng(1)
        x = src.sample(rng, 200_000)
        d = src.distribution(60).array
        n = np.arange(len(d))
        var = float(d @ n**2 - (d @ n) ** 2)
        assert abs(x.mean() - src.mean) <= 6 * math.sqrt(var / len(x)) + 1e-12

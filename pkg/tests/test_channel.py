import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from mpa.channel import (
    SIGMA_MIN,
    ConditionalGainDist,
    MismatchModel,
    effective_distance,
    fold_estimation_error,
    jakes_correlation,
    pairs_to_csv,
    sample_channels,
    sample_pair,
    sigma_from_correlation,
    sigma_from_distance,
    wavelength,
)
from mpa.errors import DomainError

LAM = 0.11186285746268657
FIRST_J0_ROOT_OVER_2PI = 0.38273987478100618


def operating_model(kappa=1.0):
    return MismatchModel.from_wavelengths(1.5, 114 / 3.6, 5e-3, kappa=kappa)


# --------------------------------------------------------------------------
# geometry and correlation
# --------------------------------------------------------------------------

def test_wavelength_and_operating_distance():
    assert wavelength(2.68e9) == pytest.approx(LAM, rel=1e-15)
    m = operating_model()
    assert m.d_a == pytest.approx(0.16779428619, rel=1e-10)
    assert m.d == pytest.approx(0.0094609529, rel=1e-8)
    assert m.d / m.lam == pytest.approx(0.0846, abs=1e-4)


def test_effective_distance_cases():
    assert effective_distance(0.5, 10.0, 0.05) == 0.0
    assert effective_distance(0.3, 0.0, 0.01) == 0.3
    assert effective_distance(0.1, 30.0, 0.01) == pytest.approx(0.2)
    with pytest.raises(DomainError):
        effective_distance(-1.0, 1.0, 1.0)


def test_jakes_matrix():
    assert jakes_correlation(0.0, LAM)[0, 1] == 1.0
    phi = jakes_correlation(FIRST_J0_ROOT_OVER_2PI * LAM, LAM)
    assert abs(phi[0, 1]) < 1e-12
    for d in np.linspace(0, 5 * LAM, 37):
        phi = jakes_correlation(d, LAM)
        assert np.allclose(phi, phi.T) and np.all(np.diag(phi) == 1.0)
        assert abs(phi[0, 1]) <= 1.0
        assert np.all(np.linalg.eigvalsh(phi) >= -1e-15)


def test_sigma_endpoints():
    assert sigma_from_distance(0.0, LAM) == 0.0
    assert sigma_from_distance(FIRST_J0_ROOT_OVER_2PI * LAM, LAM) == pytest.approx(1.0, abs=1e-9)
    assert sigma_from_correlation(1.0) == 0.0
    assert sigma_from_correlation(0.0) == 1.0


def test_sigma_at_operating_point():
    assert operating_model().sigma == pytest.approx(0.5449444049, rel=1e-9)


def test_sigma_is_continuous_in_distance():
    d = np.arange(0.0, 2.0 + 1e-12, 1e-3) * LAM
    s = np.array([sigma_from_distance(x, LAM) for x in d])
    assert np.all((s >= 0) & (s <= 1))
    assert np.max(np.abs(np.diff(s))) < 0.01


def test_sampled_correlation_recovers_sigma():
    m = operating_model()
    h_hat, h = sample_channels(m, 400_000, seed=21)
    rho = np.corrcoef(h_hat.real, h.real)[0, 1]
    assert rho == pytest.approx(math.sqrt(1 - m.sigma**2), abs=0.01)
    assert math.sqrt(1 - rho * rho) == pytest.approx(m.sigma, rel=0.02)


# --------------------------------------------------------------------------
# estimation-error folding
# --------------------------------------------------------------------------

def test_fold_examples():
    assert fold_estimation_error(0.4, 1.0) == pytest.approx((0.4, 1 - 0.16))
    assert fold_estimation_error(0.4, 0.0) == pytest.approx((1.0, 0.0))
    s_eff, nc = fold_estimation_error(0.3, 0.9)
    assert s_eff**2 == pytest.approx(0.2629, rel=1e-12)
    assert nc == pytest.approx(0.81 * 0.91, rel=1e-12)
    rng = np.random.default_rng(0)
    q, z = rng.standard_normal((2, 1_000_000))
    assert np.var(0.9 * 0.3 * q + math.sqrt(1 - 0.81) * z) == pytest.approx(0.2629, rel=0.01)


@given(st.floats(0, 1), st.floats(0, 1))
def test_fold_preserves_unit_power(sigma, kappa):
    s_eff, nc = fold_estimation_error(sigma, kappa)
    assert nc + s_eff**2 == pytest.approx(1.0, abs=1e-12)
    assert 0.0 <= s_eff <= 1.0


def test_model_validation():
    with pytest.raises(DomainError):
        MismatchModel(0.1, 1.0, 0.01, kappa=1.5)
    with pytest.raises(DomainError):
        ConditionalGainDist(1.0, 1.5, 0.5)
    with pytest.raises(DomainError):
        fold_estimation_error(1.2, 0.5)


# --------------------------------------------------------------------------
# conditional law
# --------------------------------------------------------------------------

def test_cdf_basic_values():
    d = ConditionalGainDist.from_sigma(1.0, 0.5)
    assert d.cdf(0.0) == 0.0
    e = ConditionalGainDist.from_sigma(0.0, 0.5)
    x = np.array([0.1, 0.5, 2.0])
    assert np.allclose(e.cdf(x), 1 - np.exp(-x / 0.25), atol=1e-14)
    assert np.allclose(e.pdf(x), np.exp(-x / 0.25) / 0.25, rtol=1e-13)
    assert d.sf(0.7) == pytest.approx(1 - d.cdf(0.7), abs=1e-15)
    with pytest.raises(DomainError):
        d.cdf(-0.1)


def test_cdf_matches_noncentral_chi2():
    d = ConditionalGainDist.from_sigma(1.3, 0.4, 0.9)
    x = np.linspace(0.0, 6.0, 61)
    ref = stats.ncx2.cdf(2 * x / d.sigma_eff**2, 2, 2 * d.mean_known / d.sigma_eff**2)
    assert np.max(np.abs(d.cdf(x) - ref)) < 1e-12


@pytest.mark.parametrize("g_hat, sigma", [(1.0, 0.5), (0.2, 0.9), (3.0, 0.1), (1.0, 0.3)])
def test_pdf_normalised_and_consistent(g_hat, sigma):
    d = ConditionalGainDist.from_sigma(g_hat, sigma)
    mass = integrate.quad(d.pdf, 0, np.inf, points=None, limit=400, epsabs=1e-13)[0]
    assert mass == pytest.approx(1.0, abs=1e-8)
    for x in (0.05, 0.5, 1.5, 3.0):
        fd = (d.cdf(x + 1e-6) - d.cdf(x - 1e-6)) / 2e-6
        assert fd == pytest.approx(d.pdf(x), rel=1e-5, abs=1e-9)


def test_pdf_mode_matches_sample_histogram():
    d = ConditionalGainDist.from_sigma(1.0, 0.3)
    x = np.linspace(0, 4, 40001)
    mode = x[np.argmax(d.pdf(x))]
    s = d.sample(2_000_000, np.random.default_rng(8))
    counts, edges = np.histogram(s, bins=np.arange(0.0, 4.0, 0.05))
    centres = 0.5 * (edges[1:] + edges[:-1])
    assert abs(centres[np.argmax(counts)] - mode) <= 0.05


def test_ppf_inverts_cdf():
    d = ConditionalGainDist.from_sigma(2.0, 0.6)
    for p in (1e-4, 0.1, 0.5, 0.9, 0.9999):
        assert d.cdf(d.ppf(p)) == pytest.approx(p, abs=1e-11)
    assert d.ppf(0.0) == 0.0
    with pytest.raises(DomainError):
        d.ppf(1.0)


def test_degenerate_law_is_a_step():
    d = ConditionalGainDist(1.5, SIGMA_MIN / 2, 1.0)
    assert d.degenerate
    assert d.cdf(1.49) == 0.0 and d.cdf(1.5) == 1.0
    assert d.ppf(0.3) == 1.5
    with pytest.raises(DomainError):
        d.pdf(1.0)


def test_sample_mean_and_ks():
    d = ConditionalGainDist.from_sigma(1.0, 0.5)
    s = d.sample(1_000_000, np.random.default_rng(13))
    assert s.mean() == pytest.approx(d.mean(), rel=0.005)
    assert stats.kstest(s, d.cdf).statistic < 0.002


@settings(max_examples=30)
@given(st.floats(0.0, 4.0), st.floats(0.05, 0.99))
def test_cdf_validity(g_hat, sigma):
    d = ConditionalGainDist.from_sigma(g_hat, sigma)
    x = np.linspace(0.0, 4.0 * (g_hat + 1.0) + 40.0 * sigma**2, 400)
    y = d.cdf(x)
    assert np.all(np.diff(y) >= -1e-14)
    assert y[0] == 0.0 and y[-1] > 1 - 1e-6


# --------------------------------------------------------------------------
# pair sampling
# --------------------------------------------------------------------------

def test_marginal_gain_is_unit_exponential():
    pairs = sample_pair(operating_model(), 1_000_000, seed=5)
    assert pairs.shape == (1_000_000, 2)
    assert pairs[:, 1].mean() == pytest.approx(1.0, abs=0.005)
    assert stats.kstest(pairs[:, 1], "expon").statistic < 0.005
    assert stats.kstest(pairs[:, 0], "expon").statistic < 0.005


def test_perfect_csit_gives_equal_gains():
    m = MismatchModel(0.5, 10.0, 0.05)
    assert m.sigma == 0.0
    pairs = sample_pair(m, 1000, seed=1)
    assert np.array_equal(pairs[:, 0], pairs[:, 1])


def test_estimation_error_correlation():
    m = operating_model(kappa=0.9)
    h_hat, h = sample_channels(m, 400_000, seed=2)
    rho = np.corrcoef(h_hat.real, h.real)[0, 1]
    assert rho == pytest.approx(0.9 * math.sqrt(1 - m.sigma**2), abs=0.01)


def test_conditional_samples_match_cdf_in_bin():
    m = operating_model()
    pairs = sample_pair(m, 2_000_000, seed=9)
    sel = np.abs(pairs[:, 0] - 1.0) <= 0.01
    g = pairs[sel, 1]
    assert g.size > 10_000
    assert stats.kstest(g, m.conditional(1.0).cdf).statistic < 0.01


def test_sampling_is_deterministic():
    m = operating_model()
    a = sample_pair(m, 70_000, seed=4)
    b = sample_pair(m, 70_000, seed=4)
    c = sample_pair(m, 70_000, seed=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(DomainError):
        sample_pair(m, 0, seed=1)


def test_sampling_independent_of_thread_count():
    code = ("import hashlib; from mpa.channel import MismatchModel, sample_pair;"
            "m = MismatchModel.from_wavelengths(1.5, 114/3.6, 5e-3);"
            "print(hashlib.sha256(sample_pair(m, 300000, 3).tobytes()).hexdigest())")
    digests = set()
    for threads in ("1", "4"):
        env = dict(os.environ, MPA_THREADS=threads)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        digests.add(out.stdout.strip())
    assert len(digests) == 1


def test_pairs_csv():
    text = pairs_to_csv([[0.5, 0.25], [1.0, 2.0]])
    assert text == "g_hat,g\n0.5,0.25\n1.0,2.0\n"

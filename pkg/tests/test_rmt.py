import math

import numpy as np
import pytest
from scipy.integrate import quad

from chaoscontrol.rmt import (POISSON_FRACTION_01, InsufficientStatistics, SpectrumSet, bessel_autocorrelation,
                              empirical_density_check, ensemble_autocorrelation, heisenberg_time,
                              kicked_rotor_ratio, sample_gaussian, scrambling_ratio, semicircle_cdf,
                              semicircle_density, spacing_repulsion_check, unfolded_spacings)


def j1_quadrature(x):
    return quad(lambda tau: math.cos(tau - x * math.sin(tau)), 0, math.pi, limit=200)[0] / math.pi


@pytest.fixture(scope="module")
def goe256():
    return sample_gaussian(256, 1, 50, seed=2024)


@pytest.fixture(scope="module")
def goe_spectra(goe256):
    return goe256.spectra()


def test_sample_symmetry_and_determinism():
    s = sample_gaussian(8, 1, 3, 1)
    for h in s.matrices:
        assert np.array_equal(h, h.T)
    u = sample_gaussian(8, 2, 3, 1)
    for h in u.matrices:
        assert np.array_equal(h, h.conj().T)
        assert np.iscomplexobj(h)
    again = sample_gaussian(8, 1, 3, 1)
    assert all(np.array_equal(a, b) for a, b in zip(s.matrices, again.matrices))
    with pytest.raises(ValueError):
        sample_gaussian(8, 4, 1, 0)
    with pytest.raises(ValueError):
        sample_gaussian(1, 1, 1, 0)


def test_goe_variances_n2():
    s = sample_gaussian(2, 1, 100_000, 7)
    H = np.array(s.matrices)
    diag = np.concatenate([H[:, 0, 0], H[:, 1, 1]])
    assert np.var(diag) == pytest.approx(1.0, rel=0.02)
    assert np.var(H[:, 0, 1]) == pytest.approx(0.5, rel=0.02)


def test_gue_variances():
    s = sample_gaussian(4, 2, 40_000, 3)
    H = np.array(s.matrices)
    assert np.var(H[:, 0, 0].real) == pytest.approx(1 / 4, rel=0.03)
    assert np.var(H[:, 0, 1].real) == pytest.approx(1 / 8, rel=0.03)
    assert np.var(H[:, 0, 1].imag) == pytest.approx(1 / 8, rel=0.03)


def test_support(goe_spectra):
    e = goe_spectra.pooled()
    assert e.min() > -2.2 and e.max() < 2.2
    assert all(np.all(np.diff(x) >= 0) for x in goe_spectra.spectra)


def test_semicircle():
    assert semicircle_density(0.0) == pytest.approx(1 / math.pi)
    assert semicircle_density(2.0) == 0.0 and semicircle_density(-3.0) == 0.0
    total = quad(lambda e: semicircle_density(e), -2, 2)[0]
    assert total == pytest.approx(1.0, abs=1e-6)
    for x in (-1.5, 0.0, 0.7, 1.9):
        assert semicircle_cdf(x) == pytest.approx(quad(lambda e: semicircle_density(e), -2, x)[0], abs=1e-8)
    assert semicircle_cdf(-5) == 0.0 and semicircle_cdf(5) == 1.0


def test_density_check(goe256):
    assert empirical_density_check(goe256) < 0.03
    small = sample_gaussian(2, 1, 3, 0)
    assert empirical_density_check(small) >= 0.0
    with pytest.raises(ValueError):
        empirical_density_check(SpectrumSet([]))


def test_heisenberg_time():
    assert heisenberg_time(256, 1.0) == 512.0
    assert heisenberg_time(512, 0.3) == pytest.approx(2 * heisenberg_time(256, 0.3))
    # mean spacing pi/N at the band centre
    assert heisenberg_time(100, 0.7) == pytest.approx(2 * math.pi * 0.7 / (math.pi / 100))


@pytest.mark.parametrize("x", [0.1, 1.0, 3.8317, 5.0, 12.3, 40.0])
def test_bessel_against_quadrature(x):
    hbar = 0.5
    t = x * hbar / 2
    assert bessel_autocorrelation(t, hbar) == pytest.approx(hbar * j1_quadrature(x) / t, abs=1e-12)


def test_bessel_limits():
    assert bessel_autocorrelation(0.0, 0.3) == 1.0
    assert bessel_autocorrelation(1e-9, 0.3) == pytest.approx(1.0, abs=1e-12)
    from scipy.optimize import brentq
    z = brentq(lambda t: bessel_autocorrelation(t, 1.0), 1.5, 2.5)
    assert z == pytest.approx(1.916, abs=1e-3)


def test_ensemble_autocorrelation(goe256, tmp_path):
    hbar = 1.0
    t = np.linspace(0.0, 5 * hbar, 101)
    series = ensemble_autocorrelation(goe256, t, hbar)
    assert series.empirical[0] == pytest.approx(1.0, abs=1e-14)
    assert np.max(np.abs(series.empirical[1:] - series.bessel[1:])) < 0.05
    series.to_csv(tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_text().startswith("t,empirical,bessel")
    with pytest.raises(ValueError):
        ensemble_autocorrelation(goe256, [-1.0], hbar)


def test_ratios():
    assert scrambling_ratio(256) == pytest.approx(0.00371, abs=1e-5)
    for N in (2, 17, 256, 10**6):
        for hbar in (0.1, 1.0, 3.0):
            assert scrambling_ratio(N) * heisenberg_time(N, hbar) == pytest.approx(1.9 * hbar, rel=1e-15)
    assert kicked_rotor_ratio(256, math.log(4)) == pytest.approx(0.015625, abs=1e-6)
    assert kicked_rotor_ratio(math.e, 1.0) == pytest.approx(1 / math.e)
    for N in range(8, 5000, 37):
        assert kicked_rotor_ratio(N, math.log(4)) > scrambling_ratio(N)


def test_goe_repulsion(goe_spectra):
    rep = spacing_repulsion_check(goe_spectra, beta=1)
    assert rep.n_spacings >= 1000
    assert rep.fraction_below < 0.02
    assert rep.repulsion
    assert rep.poisson_fraction == pytest.approx(POISSON_FRACTION_01)
    assert 0.5 < rep.exponent < 2.0
    s = unfolded_spacings(goe_spectra)
    assert np.mean(s) == pytest.approx(1.0)


def test_poisson_baseline():
    rng = np.random.default_rng(5)
    uniform = SpectrumSet([rng.uniform(0, 1, 500) for _ in range(40)])
    rep = spacing_repulsion_check(uniform, unfolding="mean")
    assert abs(rep.fraction_below - 0.095) < 0.01
    assert not rep.repulsion
    assert abs(rep.exponent) < 0.4


def test_insufficient_statistics():
    with pytest.raises(InsufficientStatistics):
        spacing_repulsion_check(sample_gaussian(2, 1, 1, 0).spectra(), beta=1)
    with pytest.raises(ValueError):
        unfolded_spacings(SpectrumSet([np.arange(5.0)]), unfolding="poly")

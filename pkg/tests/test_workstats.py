"""CGF assembly, cumulants, finite-temperature averages, histograms."""

import math

import numpy as np
import pytest

from floquet_work.floquet import DriveProtocol, build_spectrum
from floquet_work.workstats import (
    average_work,
    cgf_asymptotic,
    cgf_finite_n,
    cgf_finite_temperature,
    cgf_residual,
    cumulants_asymptotic,
    entropy_sweep,
    g_infinity,
    laplace_curve,
    work_histogram,
)

from _oracles import log_weight_series


@pytest.fixture(scope="module")
def driven_table():
    protocol = DriveProtocol.sinusoidal(h0=1.0, amplitude=1.0, omega0=2.0, phi0=0.0)
    return build_spectrum(protocol, n_k=1000, workers=1)


@pytest.fixture(scope="module")
def static_table():
    protocol = DriveProtocol.sinusoidal(h0=1.5, amplitude=0.0, omega0=2.0)
    return build_spectrum(protocol, n_k=128, workers=1)


@pytest.fixture(scope="module")
def gapped_table():
    # h_i = 2.5, all E_k >= 1.5: safe for large-beta comparisons
    protocol = DriveProtocol.sinusoidal(h0=1.5, amplitude=1.0, omega0=2.0, phi0=0.0)
    return build_spectrum(protocol, n_k=500, workers=1)


def test_cgf_normalization_at_origin(driven_table):
    assert cgf_finite_n(driven_table, 7, 0.0) == 0.0
    assert cgf_asymptotic(driven_table, 0.0) == 0.0
    assert cgf_finite_temperature(driven_table, 7, 0.0, 1.0) == 0.0


def test_static_drive_has_zero_cgf(static_table):
    for s in (0.5, 3.0, 12.0):
        assert abs(cgf_finite_n(static_table, 11, s)) < 1e-11
        assert abs(cgf_asymptotic(static_table, s)) < 1e-11


def test_laplace_curve_is_nonpositive_and_monotone(driven_table):
    curve = laplace_curve(driven_table, np.linspace(0.0, 20.0, 41), n=9)
    curve.validate()
    assert np.all(curve.values <= 1e-12)
    assert np.all(np.diff(curve.values) <= 1e-12)
    curve_inf = laplace_curve(driven_table, np.linspace(0.0, 20.0, 41))
    curve_inf.validate()


def test_finite_n_approaches_stationary_value(driven_table):
    # sup-distance over an s-grid, averaged over n-windows, decreases
    s_grid = np.linspace(0.5, 10.0, 8)
    asym = np.array([cgf_asymptotic(driven_table, s) for s in s_grid])

    def window_sup(n0):
        sups = []
        for n in range(n0, n0 + 10):
            vals = np.array([cgf_finite_n(driven_table, n, s) for s in s_grid])
            sups.append(np.abs(vals - asym).max())
        return float(np.mean(sups))

    assert window_sup(200) < window_sup(3)


def test_long_time_window_average_matches_stationary(driven_table):
    for s in (0.5, 1.0, 5.0):
        window = [cgf_finite_n(driven_table, n, s) for n in range(10_000, 10_101)]
        assert abs(np.mean(window) - cgf_asymptotic(driven_table, s)) < 1e-3


def test_large_s_plateau_equals_fidelity_plateau(driven_table):
    assert abs(cgf_asymptotic(driven_table, 1e6) - g_infinity(driven_table)) < 1e-8


def test_residual_matches_direct_difference_at_moderate_s(driven_table):
    for s in (1.0, 2.0, 3.0):
        direct = cgf_asymptotic(driven_table, s) - g_infinity(driven_table)
        assert cgf_residual(driven_table, s) == pytest.approx(direct, rel=1e-3)


def test_appendix_series_identity():
    rng = np.random.default_rng(31)
    for xi in rng.uniform(0.0, 0.999, 200):
        closed = -2.0 * math.log((1.0 + math.sqrt(1.0 - xi)) / 2.0)
        assert abs(log_weight_series(xi) - closed) < 1e-8


def test_jarzynski_identity_random_tables():
    rng = np.random.default_rng(8)
    for _ in range(12):
        protocol = DriveProtocol.sinusoidal(
            h0=rng.uniform(0.0, 2.0), amplitude=rng.uniform(0.2, 1.0),
            omega0=rng.uniform(0.6, 2.5), phi0=rng.uniform(0.0, 2 * math.pi))
        table = build_spectrum(protocol, n_k=64, workers=1)
        beta = rng.uniform(0.2, 5.0)
        n = int(rng.integers(1, 60))
        assert abs(cgf_finite_temperature(table, n, 1j * beta, beta)) < 1e-10


def test_zero_temperature_limit_of_fourier_cgf(gapped_table):
    # all E_k >= 1.5 here, so beta = 200 is already deep in the T = 0 limit
    for u in (0.3, 1.7):
        cold = cgf_finite_temperature(gapped_table, 9, u, 200.0)
        frozen = cgf_finite_temperature(gapped_table, 9, u, math.inf)
        assert abs(cold - frozen) < 1e-8


def test_beta_guard_on_complex_path(gapped_table):
    with pytest.raises(ValueError):
        cgf_finite_temperature(gapped_table, 3, 1j * 200.0, 200.0)


def test_cumulants_static_drive_vanish(static_table):
    cum = cumulants_asymptotic(static_table, 100)
    assert cum.k1 == pytest.approx(0.0, abs=1e-10)
    assert cum.k2 == pytest.approx(0.0, abs=1e-10)


def test_first_cumulant_matches_cgf_derivative(driven_table):
    cum = cumulants_asymptotic(driven_table, 1000)
    h = 1e-4
    derivative = (cgf_asymptotic(driven_table, h)
                  - cgf_asymptotic(driven_table, -h)) / (2.0 * h)
    assert cum.k1 == pytest.approx(-1000 * derivative, rel=1e-4)


def test_second_cumulant_matches_cgf_derivative(driven_table):
    cum = cumulants_asymptotic(driven_table, 1000)
    h = 1e-4
    second = (cgf_asymptotic(driven_table, h)
              + cgf_asymptotic(driven_table, -h)) / h ** 2
    assert cum.k2 == pytest.approx(1000 * second, rel=1e-4)


def test_relative_width_scaling(driven_table):
    small = cumulants_asymptotic(driven_table, 500)
    large = cumulants_asymptotic(driven_table, 2000)
    assert small.relative_width == pytest.approx(2.0 * large.relative_width,
                                                 rel=1e-12)


def test_average_work_zero_temperature_is_first_cumulant(driven_table):
    cum = cumulants_asymptotic(driven_table, 1000)
    w = average_work(driven_table, math.inf, math.inf, 1000)
    assert w == pytest.approx(cum.k1, rel=1e-12)


def test_average_work_static_drive(static_table):
    assert average_work(static_table, math.inf, 2.0, 100) == pytest.approx(0.0, abs=1e-10)
    assert average_work(static_table, 17, 2.0, 100) == pytest.approx(0.0, abs=1e-10)


def test_average_work_window_average_matches_stationary(driven_table):
    beta = 3.0
    stationary = average_work(driven_table, math.inf, beta, 1000)
    window = [average_work(driven_table, n, beta, 1000)
              for n in range(5000, 5101)]
    assert np.mean(window) == pytest.approx(stationary, rel=1e-3)


def test_entropy_sweep_basics():
    grid = np.linspace(1.5, 2.5, 5)
    curve = entropy_sweep(grid, beta=5.0, length=200, amplitude=1.0,
                          n_k=100, workers=1)
    curve.validate()
    assert np.all(curve.delta_s_irr >= 0.0)
    flat = entropy_sweep(grid, beta=5.0, length=200, amplitude=0.0,
                         n_k=100, workers=1)
    assert np.abs(flat.delta_s_irr).max() < 1e-10
    with pytest.raises(ValueError):
        entropy_sweep(grid, beta=math.inf, length=200)
    with pytest.raises(ValueError):
        entropy_sweep(np.array([-1.0, 1.0]), beta=5.0, length=200)


def test_histogram_static_drive_is_pure_delta(static_table):
    hist = work_histogram(static_table, math.inf, 256, 0.05)
    # the stored xi carry ~1e-15 integrator noise, so "empty" means
    # continuum mass at that scale
    assert hist.delta0_weight == pytest.approx(1.0, abs=1e-13)
    assert float(np.sum(hist.probability)) < 1e-12
    hist.validate()


def test_histogram_mass_conservation(gapped_table):
    hist = work_histogram(gapped_table, math.inf, 1000, 0.05)
    assert abs(hist.total_probability - 1.0) < 1e-10
    assert np.all(hist.probability >= 0.0)


def test_histogram_threshold_is_bin_edge(gapped_table):
    hist = work_histogram(gapped_table, math.inf, 1000, 0.04)
    assert hist.threshold == pytest.approx(3.0, abs=1e-14)
    distances = np.abs(np.concatenate([hist.w_lo, hist.w_hi]) - hist.threshold)
    assert distances.min() < 1e-12


def test_histogram_finite_n_delta_weight_matches_product(gapped_table):
    n = 23
    hist = work_histogram(gapped_table, n, 1000, 0.05)
    # ln delta0 equals L times the large-s stroboscopic CGF exactly
    # (the midpoint grid is the anti-periodic momentum set of the chain)
    log_product = 1000 * cgf_finite_n(gapped_table, n, 1e9)
    assert math.log(hist.delta0_weight) == pytest.approx(log_product, rel=1e-10)


def test_histogram_stationary_delta_weight_near_fidelity_plateau(gapped_table):
    # The time-averaged product approximation reproduces L * g_infinity
    # only approximately; at this strong drive the measured log-weight
    # gap is ~24% (the exact stationary delta weight is e^{L g_inf}).
    hist = work_histogram(gapped_table, math.inf, 1000, 0.05)
    target = 1000 * g_infinity(gapped_table)
    assert math.log(hist.delta0_weight) == pytest.approx(target, rel=0.35)


def test_histogram_validation_errors(gapped_table, static_table):
    with pytest.raises(ValueError):
        work_histogram(gapped_table, math.inf, 999, 0.05)   # odd length
    with pytest.raises(ValueError):
        work_histogram(gapped_table, math.inf, 800, 0.05)   # n_k mismatch
    with pytest.raises(ValueError):
        work_histogram(gapped_table, math.inf, 1000, -0.1)
    with pytest.raises(ValueError):
        work_histogram(gapped_table, 0, 1000, 0.05)


def test_histogram_alias_guard_for_gapless_chain():
    # At a critical initial field the smallest excitation 2 E_{k1} ~ 2 pi/L
    # falls inside the first bin unless the bins are finer.
    protocol = DriveProtocol.sinusoidal(h0=1.0, amplitude=1.0, omega0=2.0,
                                        phi0=-math.pi / 2)
    table = build_spectrum(protocol, n_k=64, workers=1)
    with pytest.raises(ValueError):
        work_histogram(table, math.inf, 128, 0.05)
    fine = work_histogram(table, math.inf, 128, 0.01)
    fine.validate()

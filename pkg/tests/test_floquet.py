"""Per-mode Floquet solutions: propagators, decomposition, spectrum tables."""

import math
import os

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm

from floquet_work.floquet import (
    DriveProtocol,
    bogoliubov_ground,
    build_spectrum,
    floquet_decompose,
    fold_quasi_energy,
    midpoint_grid,
    mode_hamiltonian,
    overlaps,
    period_propagator,
    rotated_frame_check,
    worker_count,
)
from floquet_work.numerics import IntegratorConfig, unitarity_defect
from floquet_work.workstats import cgf_asymptotic


def test_mode_hamiltonian_entries():
    h = mode_hamiltonian(math.pi / 2, 1.0)
    np.testing.assert_allclose(h, np.array([[1.0, -1.0j], [1.0j, -1.0]]))
    for k, field in [(0.3, 0.2), (2.0, 1.7), (math.pi, 0.9)]:
        m = mode_hamiltonian(k, field)
        assert abs(np.trace(m)) == 0.0
        np.testing.assert_allclose(m, m.conj().T)


def test_mode_hamiltonian_small_k_structure():
    k = 1e-6
    m = mode_hamiltonian(k, 1.4)
    assert m[0, 0] == pytest.approx(0.4, abs=1e-9)
    assert m[0, 1] == pytest.approx(-1j * k, abs=1e-15)


def test_bogoliubov_gap_values():
    _, _, energy = bogoliubov_ground(math.pi / 2, 1.0)
    assert energy == pytest.approx(math.sqrt(2.0), rel=1e-14)
    u, v, energy = bogoliubov_ground(math.pi / 2, 0.0)
    assert energy == pytest.approx(1.0, rel=1e-14)
    assert abs(u) == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-12)
    assert abs(v) == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-12)


def test_bogoliubov_small_k_expansion():
    h_i, k = 2.0, 1e-2
    _, _, energy = bogoliubov_ground(k, h_i)
    expansion = (h_i - 1.0) + h_i * k ** 2 / (2.0 * (h_i - 1.0))
    assert abs(energy - expansion) / energy < 1e-3


def test_bogoliubov_is_ground_eigenvector():
    rng = np.random.default_rng(2)
    for _ in range(25):
        k = rng.uniform(0.05, math.pi)
        h_i = rng.uniform(-0.5, 2.5)
        u, v, energy = bogoliubov_ground(k, h_i)
        vec = np.array([u, v])
        assert abs(np.linalg.norm(vec) - 1.0) < 1e-12
        residual = mode_hamiltonian(k, h_i) @ vec + energy * vec
        assert np.abs(residual).max() < 1e-12


def test_static_propagator_matches_matrix_exponential():
    protocol = DriveProtocol.sinusoidal(h0=1.4, amplitude=0.0, omega0=2.0)
    for k in (0.4, 1.3, 2.8):
        u = period_propagator(k, protocol)
        u_exact = expm(-1j * mode_hamiltonian(k, 1.4) * protocol.tau)
        assert np.abs(u - u_exact).max() < 1e-8


def test_zone_edge_propagators_ignore_the_drive():
    # The drive couples through sin k, which vanishes at k = 0 and pi.
    rng = np.random.default_rng(3)
    for _ in range(5):
        h0 = rng.uniform(0.2, 1.8)
        protocol = DriveProtocol.sinusoidal(
            h0=h0, amplitude=rng.uniform(0.2, 1.0),
            omega0=rng.uniform(0.8, 2.5), phi0=rng.uniform(0, 2 * math.pi))
        tau = protocol.tau
        for k, gap in ((1e-8, h0 - 1.0), (math.pi, h0 + 1.0)):
            phases = np.sort(np.angle(np.linalg.eigvals(
                period_propagator(k, protocol))))
            expected = np.sort([math.remainder(-gap * tau, 2 * math.pi),
                                math.remainder(gap * tau, 2 * math.pi)])
            np.testing.assert_allclose(phases, expected, atol=1e-6)


def test_floquet_decompose_diagonal_unitary():
    theta = 0.7
    u = np.diag([np.exp(-1j * theta), np.exp(1j * theta)])
    mu, plus, minus, degenerate = floquet_decompose(u, tau=2.0)
    assert not degenerate
    assert mu == pytest.approx(theta / 2.0, rel=1e-12)
    assert abs(plus[0]) == pytest.approx(1.0, abs=1e-12)
    assert abs(minus[1]) == pytest.approx(1.0, abs=1e-12)


def test_floquet_decompose_identity_is_degenerate():
    mu, _, _, degenerate = floquet_decompose(np.eye(2, dtype=complex), tau=1.0)
    assert degenerate
    assert mu == pytest.approx(0.0, abs=1e-12)


def test_static_floquet_modes_are_energy_eigenstates():
    rng = np.random.default_rng(17)
    for _ in range(50):
        k = rng.uniform(0.1, math.pi - 0.1)
        h0 = rng.uniform(0.0, 2.0)
        omega0 = rng.uniform(0.7, 2.7)
        protocol = DriveProtocol.sinusoidal(h0=h0, amplitude=0.0, omega0=omega0)
        u = period_propagator(k, protocol)
        mu, plus, minus, degenerate = floquet_decompose(u, protocol.tau)
        if degenerate:
            continue
        gu, gv, energy = bogoliubov_ground(k, h0)
        assert mu == pytest.approx(fold_quasi_energy(energy, omega0), abs=1e-6)
        ground = np.array([gu, gv])
        weights = sorted([overlaps(plus, ground), overlaps(minus, ground)])
        # the ground state coincides with one of the two Floquet modes;
        # which label it carries depends on the folding branch
        assert weights[0] == pytest.approx(0.0, abs=1e-9)
        assert weights[1] == pytest.approx(1.0, abs=1e-9)


def test_overlap_examples():
    e0 = np.array([1.0, 0.0], dtype=complex)
    e1 = np.array([0.0, 1.0], dtype=complex)
    plus = (e0 + e1) / math.sqrt(2.0)
    assert overlaps(e0, e0) == pytest.approx(1.0, abs=1e-14)
    assert overlaps(e0, e1) == pytest.approx(0.0, abs=1e-14)
    assert overlaps(plus, e0) == pytest.approx(0.5, abs=1e-14)
    with pytest.raises(ValueError):
        overlaps(2.0 * e0, e1)


def test_static_spectrum_has_no_excitation_weight():
    protocol = DriveProtocol.sinusoidal(h0=1.5, amplitude=0.0, omega0=2.0)
    table = build_spectrum(protocol, n_k=128, workers=1)
    table.validate()
    assert np.abs(table.xi).max() < 1e-12
    folded = [fold_quasi_energy(e, 2.0) for e in table.energy]
    np.testing.assert_allclose(table.quasi_energy, folded, atol=1e-8)


def test_spectrum_grid_is_midpoint_and_sorted():
    protocol = DriveProtocol.sinusoidal(h0=1.2, amplitude=0.5, omega0=1.7)
    table = build_spectrum(protocol, n_k=64, workers=1)
    np.testing.assert_allclose(table.k, midpoint_grid(64))
    assert np.all(np.diff(table.k) > 0)
    assert table.k[0] > 0 and table.k[-1] < math.pi
    table.validate()
    with pytest.raises(ValueError):
        build_spectrum(protocol, n_k=32, workers=1)


def test_spectrum_grid_refinement_self_convergence():
    protocol = DriveProtocol.sinusoidal(h0=1.6, amplitude=0.3, omega0=2.7)
    coarse = build_spectrum(protocol, n_k=512, workers=1)
    fine = build_spectrum(protocol, n_k=4096, workers=1)
    for s in (1.0, 5.0):
        assert abs(cgf_asymptotic(coarse, s) - cgf_asymptotic(fine, s)) < 1e-4


def test_chunked_build_matches_serial():
    protocol = DriveProtocol.sinusoidal(h0=1.1, amplitude=0.9, omega0=1.9, phi0=0.4)
    serial = build_spectrum(protocol, n_k=128, workers=1)
    chunked = build_spectrum(protocol, n_k=128, workers=2)
    np.testing.assert_array_equal(serial.xi, chunked.xi)
    np.testing.assert_array_equal(serial.quasi_energy, chunked.quasi_energy)


def test_momentum_reflection_symmetry():
    # H_{-k} = sigma_z H_k sigma_z implies equal overlap weights at +-k.
    protocol = DriveProtocol.sinusoidal(h0=1.2, amplitude=0.8, omega0=2.1, phi0=0.3)
    gu, gv, _ = bogoliubov_ground(0.9, protocol.h_initial)
    weights = {}
    for k in (0.9, -0.9):
        u = period_propagator(k, protocol)
        _, plus, _, _ = floquet_decompose(u, protocol.tau)
        ground = np.array([gu, gv]) if k > 0 else np.array([gu, -gv])
        weights[k] = overlaps(plus, ground)
    assert weights[0.9] == pytest.approx(weights[-0.9], abs=1e-9)


def test_resonant_spectrum_is_gapless_at_small_k():
    # At a resonance the folded quasi-energy reaches the fold boundary
    # ({0} for even l, {omega0/2} for odd l) linearly in k.
    for h0, omega0 in [(1.5, 1.0), (2.0, 1.0)]:   # l = 1 and l = 2
        protocol = DriveProtocol.sinusoidal(h0=h0, amplitude=1.0, omega0=omega0)
        table = build_spectrum(protocol, n_k=1024, workers=1)
        coeffs = np.polyfit(table.k[:6], table.quasi_energy[:6], 1)
        intercept = coeffs[1]
        boundary_gap = min(abs(intercept), abs(omega0 / 2.0 - intercept))
        assert boundary_gap < 1e-3 * omega0
        assert abs(coeffs[0]) > 0.01   # finite slope: linear closure


def test_nonresonant_spectrum_gap_matches_folded_field():
    protocol = DriveProtocol.sinusoidal(h0=1.37, amplitude=1.0, omega0=2.0)
    table = build_spectrum(protocol, n_k=1024, workers=1)
    coeffs = np.polyfit(table.k[:6], table.quasi_energy[:6], 2)
    intercept = np.polyval(coeffs, 0.0)
    assert abs(intercept - fold_quasi_energy(0.37, 2.0)) < 1e-3 * 2.0


def test_rotated_frame_static_drive_is_exact():
    protocol = DriveProtocol.sinusoidal(h0=1.3, amplitude=0.0, omega0=2.0)
    assert rotated_frame_check(0.7, protocol) < 1e-12


def test_rotated_frame_agreement_sinusoidal():
    protocol = DriveProtocol.sinusoidal(h0=1.0, amplitude=1.0, omega0=2.0)
    assert rotated_frame_check(math.pi / 2, protocol) < 1e-6
    assert rotated_frame_check(1e-3, protocol) < 1e-6


def test_rotated_frame_agreement_tabulated():
    omega0 = 1.7
    times = np.linspace(0.0, 2 * math.pi / omega0, 64, endpoint=False)
    samples = 1.2 + 0.8 * np.cos(omega0 * times) + 0.3 * np.sin(2 * omega0 * times)
    protocol = DriveProtocol.tabulated(samples, omega0=omega0)
    assert rotated_frame_check(1.1, protocol) < 1e-6


def test_sinusoidal_protocol_fields():
    protocol = DriveProtocol.sinusoidal(h0=1.1, amplitude=0.6, omega0=2.0, phi0=0.25)
    assert protocol.tau == pytest.approx(math.pi, rel=1e-15)
    assert protocol.h_initial == pytest.approx(1.1 + 0.6 * math.cos(0.25), rel=1e-15)
    for t in (0.0, 0.4, 2.9):
        expected = 1.1 + 0.6 * math.cos(2.0 * t + 0.25)
        assert protocol.field(t) == pytest.approx(expected, rel=1e-15)


def test_tabulated_protocol_average_and_start():
    omega0 = 1.3
    tau = 2 * math.pi / omega0
    times = np.linspace(0.0, tau, 48, endpoint=False)
    samples = 0.9 + 0.5 * np.cos(omega0 * times) - 0.2 * np.sin(3 * omega0 * times)
    protocol = DriveProtocol.tabulated(samples, omega0=omega0)
    assert protocol.h_initial == pytest.approx(samples[0], abs=1e-12)
    # independent quadrature of the interpolant reproduces the average
    mean, _ = quad(protocol.field, 0.0, tau, limit=200)
    assert abs(mean / tau - protocol.h0) < 1e-10


def test_protocol_validation():
    with pytest.raises(ValueError):
        DriveProtocol.sinusoidal(h0=1.0, amplitude=1.0, omega0=0.0)
    with pytest.raises(ValueError):
        DriveProtocol.tabulated([1.0, 2.0, 3.0], omega0=1.0)
    with pytest.raises(ValueError):
        DriveProtocol(kind="square", omega0=1.0, h0=1.0)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("FLOQUET_WORK_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("FLOQUET_WORK_WORKERS", "0")
    with pytest.raises(ValueError):
        worker_count()
    monkeypatch.delenv("FLOQUET_WORK_WORKERS")
    assert worker_count() >= 1


def test_propagator_unitarity_over_table():
    protocol = DriveProtocol.sinusoidal(h0=0.8, amplitude=1.0, omega0=0.9, phi0=1.0)
    u = period_propagator(midpoint_grid(64), protocol)
    assert unitarity_defect(u).max() < 1e-8


def test_adaptive_spectrum_matches_fixed_step():
    protocol = DriveProtocol.sinusoidal(h0=1.2, amplitude=0.7, omega0=1.5)
    fixed = build_spectrum(protocol, n_k=64, workers=1)
    adaptive = build_spectrum(
        protocol, n_k=64,
        config=IntegratorConfig(method="rk45", rtol=1e-11), workers=1)
    np.testing.assert_allclose(fixed.xi, adaptive.xi, atol=1e-7)
    np.testing.assert_allclose(fixed.quasi_energy, adaptive.quasi_energy, atol=1e-7)

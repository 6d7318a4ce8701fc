"""Work statistics assembled from a Floquet spectrum table.

All stroboscopic quantities follow from the per-mode data (E_k, mu_k,
xi_k): the Laplace-domain cumulant generating function at finite period
count n and its n -> infinity stationary limit, the Fourier-domain
finite-temperature version, work cumulants, finite-temperature average
work and irreversible entropy, and an exact finite-chain work histogram
built from the per-mode product structure.

Brillouin-zone integrals use the midpoint rule on the table's k-grid,
with local 8x sub-sampling where the excitation weight approaches 1 (the
integrand has an integrable square-root cusp there).
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass

import numpy as np

from .floquet import DriveProtocol, SpectrumTable, build_spectrum, worker_count
from .numerics import IntegratorConfig

__all__ = [
    "CgfCurve",
    "CumulantSet",
    "WorkHistogram",
    "EntropyCurve",
    "cgf_finite_n",
    "cgf_asymptotic",
    "g_infinity",
    "cgf_residual",
    "cgf_finite_temperature",
    "cumulants_asymptotic",
    "average_work",
    "entropy_sweep",
    "work_histogram",
]

REFINE_THRESHOLD = 1e-3
REFINE_FACTOR = 8

LN2 = math.log(2.0)


class QuadratureDomainError(ArithmeticError):
    """A per-mode factor left the domain of the logarithm."""


def _zone_average(values, n_k):
    # integral_0^pi dk/(2 pi) f(k) by the midpoint rule
    return float(np.sum(values)) / (2.0 * n_k)


def _refined_cell_values(table, integrand):
    """Per-cell midpoint values of integrand(xi, energy), locally refined.

    Cells where 1 - xi_k < REFINE_THRESHOLD are split into REFINE_FACTOR
    sub-cells with linearly interpolated xi and E (the integrand has an
    integrable square-root cusp where xi reaches 1).
    """
    vals = integrand(table.xi, table.energy)
    flagged = np.flatnonzero(1.0 - table.xi < REFINE_THRESHOLD)
    if flagged.size:
        delta_k = table.delta_k
        offsets = ((np.arange(REFINE_FACTOR) + 0.5) / REFINE_FACTOR - 0.5) * delta_k
        for j in flagged:
            k_sub = table.k[j] + offsets
            xi_sub = np.interp(k_sub, table.k, table.xi)
            e_sub = np.interp(k_sub, table.k, table.energy)
            vals[j] = float(np.mean(integrand(xi_sub, e_sub)))
    return vals


def _refined_zone_average(table, integrand):
    return _zone_average(_refined_cell_values(table, integrand), table.n_k)


def _stationary_integrand(xi_s):
    # 2 ln[(1 + sqrt(1 - xi_s)) / 2]
    return 2.0 * (np.log1p(np.sqrt(1.0 - xi_s)) - LN2)


def cgf_finite_n(table, n, s):
    """ln G(is)/L after n complete periods, at temperature zero.

    Midpoint quadrature of
    ln{1 - xi_k sin^2(mu_k n tau) (1 - e^{-2 s E_k})} over the zone.
    """
    if s < 0.0:
        raise ValueError("s must be non-negative")
    if n < 1 or n != int(n):
        raise ValueError("n must be a positive integer")
    if s == 0.0:
        return 0.0
    tau = table.protocol.tau
    osc = np.sin(table.quasi_energy * (n * tau)) ** 2
    x = table.xi * osc * (-np.expm1(-2.0 * s * table.energy))
    if np.any(x >= 1.0):
        raise QuadratureDomainError("per-mode factor reached the log domain edge")
    return _zone_average(np.log1p(-x), table.n_k)


def cgf_asymptotic(table, s):
    """Stationary (n -> infinity) value of ln G(is)/L at temperature zero.

    Small negative s is accepted (the analytic continuation is regular
    there), which permits central differences about s = 0 for cumulants.
    """
    if s == 0.0:
        return 0.0

    def integrand(xi, energy):
        xi_s = xi * (-np.expm1(-2.0 * s * energy))
        return _stationary_integrand(xi_s)

    return _refined_zone_average(table, integrand)


def g_infinity(table):
    """Large-s plateau of the stationary CGF (log dynamical fidelity / L)."""
    return _refined_zone_average(
        table, lambda xi, energy: _stationary_integrand(xi))


def _residual_integrand(xi, energy, s):
    # 2 { ln[(1+sqrt(1-xi(s)))/2] - ln[(1+sqrt(1-xi))/2] } written so the
    # exponentially small difference never suffers cancellation.
    decay = np.exp(-2.0 * s * energy)
    root_inf = np.sqrt(np.maximum(1.0 - xi, 0.0))
    root_s = np.sqrt(np.maximum(1.0 - xi + xi * decay, 0.0))
    diff = xi * decay / np.maximum(root_s + root_inf, 1e-300)
    return 2.0 * np.log1p(diff / (1.0 + root_inf))


LAYER_CELLS = 4


def _boundary_layer_residual(table, s, cells=LAYER_CELLS):
    """Residual contribution of the boundary region [0, cells * delta_k].

    Near a k = 0 resonance the integrand develops a layer extending down
    to k ~ e^{-s E_0} whose logarithmic bulk carries the leading
    s e^{-2 s E_0} behaviour, and for a critical (gapless) initial field
    at large s the whole integrand collapses into the first few cells;
    neither is resolved by a fixed grid.  Quadratics through the three
    smallest grid points model xi and E, integrated on a log-spaced
    subgrid reaching below the layer.
    """
    kx = table.k[:3]
    # Work with the deficit g = 1 - xi: for k below ~1e-8 the resonant
    # deficit beta^2 k^2 is not representable inside xi itself.  g is an
    # even function of k; the stored xi carry the integrator's ~1e-9
    # noise, so a fitted g(0) inside the noise floor is snapped to the
    # exact resonance (a spurious gap there would cut the layer off, a
    # spurious negative g would saturate it).
    basis = np.column_stack([np.ones(3), kx ** 2])
    (g0, g2), _, _, _ = np.linalg.lstsq(basis, 1.0 - table.xi[:3], rcond=None)
    g0 = 0.0 if g0 < 1e-7 else float(g0)
    model_e = np.polyfit(kx, table.energy[:3], 2)
    k_hi = cells * table.delta_k
    e0 = max(float(np.polyval(model_e, 0.0)), 1e-300)
    k_saturation = math.exp(-min(s * e0, 700.0))
    k_lo = max(min(1e-6 * k_hi, 1e-2 * k_saturation), 1e-290)
    span = math.log(k_hi / k_lo)
    m = max(96, int(span / 0.1) + 1)
    t = math.log(k_lo) + (np.arange(m) + 0.5) * (span / m)
    k_sub = np.exp(t)
    g_sub = np.clip(g0 + g2 * k_sub ** 2, 0.0, 1.0)
    e_sub = np.maximum(np.polyval(model_e, k_sub), 1e-300)
    decay = np.exp(-2.0 * s * e_sub)
    root_inf = np.sqrt(g_sub)
    root_s = np.sqrt(g_sub + (1.0 - g_sub) * decay)
    diff = (1.0 - g_sub) * decay / np.maximum(root_s + root_inf, 1e-300)
    f_sub = 2.0 * np.log1p(diff / (1.0 + root_inf))
    integral = float(np.sum(f_sub * k_sub)) * (span / m)
    # Saturated remainder below k_lo: the integrand is constant there.
    integral += float(f_sub[0]) * k_lo
    return integral


def cgf_residual(table, s):
    """cgf_asymptotic(s) - g_infinity, evaluated without cancellation.

    The difference of the two integrands is computed in closed form, and
    the boundary cell at k -> 0 is integrated on a dedicated log-spaced
    subgrid, so the result stays accurate even when it is exponentially
    small in s.
    """
    if not s > 0.0:
        raise ValueError("s must be positive")

    def integrand(xi, energy):
        return _residual_integrand(xi, energy, s)

    vals = _refined_cell_values(table, integrand)
    bulk = float(np.sum(vals[LAYER_CELLS:])) * table.delta_k
    return (bulk + _boundary_layer_residual(table, s)) / (2.0 * math.pi)


def cgf_finite_temperature(table, n, u, beta):
    """ln G(u)/L after n periods for an initial Gibbs state (complex).

    `beta` is the inverse temperature; `math.inf` selects the exact
    zero-temperature branch (Fermi factor identically zero).  `u` may be
    complex; u = i*beta reproduces the stroboscopic Jarzynski identity
    ln G = 0 (the free-energy change vanishes at multiples of the period).
    """
    if n < 1 or n != int(n):
        raise ValueError("n must be a positive integer")
    if not (beta == math.inf or beta > 0.0):
        raise ValueError("beta must be positive or math.inf")
    energy = table.energy
    if beta == math.inf:
        fermi = np.zeros_like(energy)
    else:
        exponent = 2.0 * beta * energy
        if complex(u).imag != 0.0 and float(exponent.max()) > 700.0:
            # On the analytic-continuation path (e.g. u = i beta) the
            # Fermi factor is multiplied by e^{+2 beta E}-sized terms, so
            # it must stay representable at full relative precision.
            raise ValueError(
                "beta too large for complex u; use beta = math.inf "
                "for the zero-temperature limit")
        fermi = np.where(exponent > 700.0, 0.0,
                         1.0 / (np.exp(np.minimum(exponent, 700.0)) + 1.0))
    phase = np.exp(2j * u * energy)
    bracket = (1.0 - phase) * (1.0 - fermi) + (1.0 - np.exp(-2j * u * energy)) * fermi
    tau = table.protocol.tau
    osc = np.sin(table.quasi_energy * (n * tau)) ** 2
    factor = 1.0 - table.xi * osc * bracket
    if np.any(np.abs(factor) < 1e-14):
        raise QuadratureDomainError("per-mode factor vanished; log branch ambiguous")
    total = np.sum(np.log(factor))
    return complex(total) / (2.0 * table.n_k)


@dataclass(eq=False)
class CgfCurve:
    """Sampled cumulant generating function per unit length."""

    grid: np.ndarray            # s values (Laplace) or u values (Fourier)
    values: np.ndarray          # real for Laplace domain, complex otherwise
    domain: str = "laplace"
    n: float = math.inf         # period count; math.inf marks the limit
    beta: float = math.inf      # inverse temperature; math.inf marks T = 0

    def validate(self):
        if self.domain not in ("laplace", "fourier"):
            raise ValueError("domain must be 'laplace' or 'fourier'")
        if self.grid.size != self.values.size:
            raise ValueError("grid and values must be index-aligned")
        if self.domain == "laplace":
            vals = np.real(self.values)
            if np.any(vals > 1e-12):
                raise ValueError("Laplace-domain CGF must be non-positive")
            if np.any(np.diff(vals) > 1e-12):
                raise ValueError("Laplace-domain CGF must be non-increasing")
        at_zero = np.flatnonzero(self.grid == 0.0)
        if at_zero.size and np.any(self.values[at_zero] != 0.0):
            raise ValueError("CGF must vanish exactly at the origin")


def laplace_curve(table, s_grid, n=math.inf):
    """Convenience builder for a T=0 Laplace-domain CgfCurve."""
    s_grid = np.asarray(s_grid, dtype=float)
    if math.isinf(n):
        vals = np.array([cgf_asymptotic(table, s) for s in s_grid])
    else:
        vals = np.array([cgf_finite_n(table, int(n), s) for s in s_grid])
    curve = CgfCurve(grid=s_grid, values=vals, domain="laplace", n=n)
    curve.validate()
    return curve


@dataclass
class CumulantSet:
    """First two cumulants of the asymptotic work distribution."""

    k1: float        # average work (extensive)
    k2: float        # work variance (extensive)
    length: int

    def __post_init__(self):
        if self.k1 < 0.0 or self.k2 < 0.0:
            raise ValueError("work cumulants must be non-negative")

    @property
    def k1_density(self):
        return self.k1 / self.length

    @property
    def k2_density(self):
        return self.k2 / self.length

    @property
    def relative_width(self):
        return math.sqrt(self.k2) / self.k1 if self.k1 > 0.0 else math.inf


def cumulants_asymptotic(table, length):
    """K1 and K2 of the stationary work distribution for a chain of `length`.

    Derivatives of the stationary CGF at the origin give
    K1/L = int dk/2pi xi_k E_k and
    K2/L = int dk/2pi xi_k (2 - 3 xi_k / 2) E_k^2, with
    xi_k = 4 |r+|^2 |r-|^2.  Both follow from the per-mode excitation
    probabilities time-averaged as sin^2 -> 1/2 and sin^4 -> 3/8.
    """
    if length % 2 or length < 2:
        raise ValueError("length must be a positive even integer")
    xi, energy = table.xi, table.energy
    k1 = length * _zone_average(xi * energy, table.n_k)
    k2 = length * _zone_average(xi * (2.0 - 1.5 * xi) * energy ** 2, table.n_k)
    return CumulantSet(k1=k1, k2=k2, length=length)


def average_work(table, n, beta, length):
    """Average work after n periods for an initial Gibbs state.

    Pass n = math.inf for the stationary value (the oscillating
    cos(2 mu_k n tau) term averages to zero).  beta = math.inf gives the
    zero-temperature limit tanh -> 1.
    """
    if not (beta == math.inf or beta > 0.0):
        raise ValueError("beta must be positive or math.inf")
    if length % 2 or length < 2:
        raise ValueError("length must be a positive even integer")
    energy = table.energy
    thermal = np.ones_like(energy) if beta == math.inf else np.tanh(beta * energy)
    if math.isinf(n):
        osc = 1.0
    else:
        if n < 1 or n != int(n):
            raise ValueError("n must be a positive integer or math.inf")
        tau = table.protocol.tau
        osc = 1.0 - np.cos(2.0 * table.quasi_energy * (n * tau))
    return length * _zone_average(table.xi * energy * thermal * osc, table.n_k)


@dataclass(eq=False)
class EntropyCurve:
    """Stationary irreversible entropy per drive frequency."""

    omega0: np.ndarray
    delta_s_irr: np.ndarray
    beta: float
    length: int
    amplitude: float

    def validate(self):
        if np.any(self.delta_s_irr < -1e-12):
            raise ValueError("irreversible entropy must be non-negative")


def _entropy_point(payload):
    omega0, amplitude, beta, length, n_k, config = payload
    protocol = DriveProtocol.sinusoidal(h0=1.0, amplitude=amplitude,
                                        omega0=omega0, phi0=0.0)
    table = build_spectrum(protocol, n_k=n_k, config=config, workers=1)
    return beta * average_work(table, math.inf, beta, length)


def entropy_sweep(omega0_grid, beta, length, amplitude=1.0, n_k=None,
                  config=None, workers=None):
    """Stationary irreversible entropy over a drive-frequency grid.

    The protocol family is h(t) = 1 + amplitude * cos(omega0 t); the
    free-energy change vanishes at stroboscopic times so
    Delta S_irr = beta * <W>_infinity.  Grid points are independent and
    are distributed over `workers` processes.
    """
    if not beta > 0.0 or math.isinf(beta):
        raise ValueError("entropy sweep needs a finite positive beta")
    omega0_grid = np.asarray(omega0_grid, dtype=float)
    if np.any(omega0_grid <= 0.0):
        raise ValueError("omega0 grid must be positive")
    if n_k is None:
        n_k = max(64, length // 2)
    if config is None:
        config = IntegratorConfig()
    if workers is None:
        workers = worker_count()
    payloads = [(float(w), amplitude, beta, length, n_k, config)
                for w in omega0_grid]
    if workers > 1 and len(payloads) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_entropy_point, payloads, chunksize=4))
    else:
        values = [_entropy_point(p) for p in payloads]
    curve = EntropyCurve(
        omega0=omega0_grid,
        delta_s_irr=np.asarray(values),
        beta=beta,
        length=length,
        amplitude=amplitude,
    )
    curve.validate()
    return curve


@dataclass(eq=False)
class WorkHistogram:
    """Finite-chain work distribution from the per-mode product structure.

    The probability mass at exactly W = 0 is kept apart from the binned
    continuum.  For n = math.inf the per-mode excitation probability uses
    the time-averaged sin^2 -> 1/2 replacement; this matches the
    stationary first cumulant but is an approximation for the full
    distribution, recorded in `approximation`.
    """

    length: int
    n: float
    bin_width: float
    threshold: float            # W_th = 2 |h_i - 1|, aligned to a bin edge
    delta0_weight: float
    w_lo: np.ndarray
    w_hi: np.ndarray
    probability: np.ndarray
    approximation: str | None = None

    @property
    def total_probability(self):
        return self.delta0_weight + float(np.sum(self.probability))

    def validate(self):
        if np.any(self.probability < 0.0) or self.delta0_weight < 0.0:
            raise ValueError("probabilities must be non-negative")
        if abs(self.total_probability - 1.0) > 1e-10:
            raise ValueError("histogram mass must sum to 1")


def work_histogram(table, n, length, bin_width):
    """Exact binned work distribution for a finite chain.

    The table's midpoint grid must consist of the anti-periodic momenta
    of the chain, i.e. table.n_k == length // 2.  Per mode, work 2 E_k is
    gained with probability p_k = xi_k sin^2(mu_k n tau) (finite n) or
    p_k = xi_k / 2 (n = math.inf); the joint distribution is the
    convolution over modes, accumulated on bins aligned so that the
    threshold 2 |h_i - 1| is a bin edge.
    """
    if length % 2 or length < 2:
        raise ValueError("length must be a positive even integer")
    if length // 2 > 10_000:
        raise ValueError("exact convolution supports length/2 <= 10000")
    if table.n_k != length // 2:
        raise ValueError(
            f"table has {table.n_k} modes; a chain of length {length} "
            f"needs a spectrum built with n_k = {length // 2}")
    if not bin_width > 0.0:
        raise ValueError("bin width must be positive")

    if math.isinf(n):
        p = 0.5 * table.xi
        approximation = "time-averaged product approximation"
    else:
        if n < 1 or n != int(n):
            raise ValueError("n must be a positive integer or math.inf")
        tau = table.protocol.tau
        p = table.xi * np.sin(table.quasi_energy * (n * tau)) ** 2
        approximation = None

    threshold = 2.0 * abs(table.protocol.h_initial - 1.0)
    m0 = math.ceil(threshold / bin_width - 1e-9)
    origin = threshold - m0 * bin_width  # in (-bin_width, 0]

    jumps = 2.0 * table.energy
    shifts = np.floor((jumps - origin) / bin_width).astype(int)
    if np.any(shifts < 1):
        raise ValueError(
            "bin width would alias the smallest excitation energy into "
            "the zero-work bin; choose a finer bin width")

    n_bins = int(math.floor((float(np.sum(jumps)) - origin) / bin_width)) + 2
    dist = np.zeros(n_bins)
    dist[0] = 1.0
    for p_k, shift in zip(p, shifts):
        if p_k == 0.0:
            continue
        shifted = np.zeros_like(dist)
        shifted[shift:] = dist[: n_bins - shift]
        dist = (1.0 - p_k) * dist + p_k * shifted

    delta0 = float(dist[0])
    body = dist[1:]
    last = int(np.max(np.flatnonzero(body > 0.0))) + 1 if np.any(body > 0.0) else 0
    body = body[:last]
    edges = origin + bin_width * np.arange(1, last + 2)
    hist = WorkHistogram(
        length=length,
        n=n,
        bin_width=bin_width,
        threshold=threshold,
        delta0_weight=delta0,
        w_lo=edges[:-1],
        w_hi=edges[1:],
        probability=body,
        approximation=approximation,
    )
    hist.validate()
    return hist

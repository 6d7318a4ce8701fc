"""Per-mode Floquet analysis of the driven transverse-field Ising chain.

Each momentum k in (0, pi] carries an independent two-level problem whose
generator is the Bogoliubov-de Gennes matrix

    H_k(t) = [[h(t) - cos k, -i sin k], [i sin k, cos k - h(t)]]

(coupling J = 1).  The one-period propagator of this generator yields the
Floquet modes and quasi-energies; overlaps of the modes with the initial
ground state feed every work-statistics formula downstream.
"""

from __future__ import annotations

import concurrent.futures
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .numerics import IntegratorConfig, identity_like, integrate_linear_ode

__all__ = [
    "DriveProtocol",
    "ModeSolution",
    "SpectrumTable",
    "fold_quasi_energy",
    "mode_hamiltonian",
    "bogoliubov_ground",
    "period_propagator",
    "floquet_decompose",
    "overlaps",
    "build_spectrum",
    "rotated_frame_check",
    "worker_count",
]

#: Environment variable controlling the default parallel worker count.
WORKERS_ENV = "FLOQUET_WORK_WORKERS"

DEGENERACY_TOL = 1e-12


def worker_count():
    """Worker count from the environment, defaulting to the logical cores."""
    raw = os.environ.get(WORKERS_ENV, "")
    if raw.strip():
        n = int(raw)
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be a positive integer")
        return n
    return os.cpu_count() or 1


@dataclass(eq=False)
class DriveProtocol:
    """Periodic transverse-field protocol h(t) with period tau = 2 pi / omega0.

    Two kinds are supported: an exact sinusoid
    h(t) = h0 + amplitude * cos(omega0 t + phi0), and a tabulated protocol
    given by uniform samples of h over one period, interpolated by a
    periodic cubic spline.  For tabulated protocols the average field h0
    is derived from the exact integral of the interpolant.
    """

    kind: str
    omega0: float
    h0: float
    amplitude: float = 0.0
    phi0: float = 0.0
    samples: np.ndarray | None = None
    _spline: object = field(default=None, repr=False)
    _spline_mean: float = field(default=0.0, repr=False)

    def __post_init__(self):
        if self.kind not in ("sinusoidal", "tabulated"):
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if not self.omega0 > 0.0:
            raise ValueError("omega0 must be positive")
        if self.kind == "tabulated":
            if self.samples is None or len(self.samples) < 8:
                raise ValueError("tabulated protocols need at least 8 samples")
            self.samples = np.asarray(self.samples, dtype=float)
            tau = self.tau
            knots = np.linspace(0.0, tau, self.samples.size + 1)
            values = np.append(self.samples, self.samples[0])
            self._spline = CubicSpline(knots, values, bc_type="periodic")
            self._spline_mean = float(self._spline.integrate(0.0, tau)) / tau
            self.h0 = self._spline_mean

    @classmethod
    def sinusoidal(cls, h0, amplitude, omega0, phi0=0.0):
        return cls(kind="sinusoidal", omega0=omega0, h0=h0,
                   amplitude=amplitude, phi0=phi0)

    @classmethod
    def tabulated(cls, samples, omega0):
        return cls(kind="tabulated", omega0=omega0, h0=0.0,
                   samples=np.asarray(samples, dtype=float))

    @property
    def tau(self):
        return 2.0 * math.pi / self.omega0

    @property
    def h_initial(self):
        return self.field(0.0)

    def field(self, t):
        """Field value h(t)."""
        if self.kind == "sinusoidal":
            return self.h0 + self.amplitude * math.cos(self.omega0 * t + self.phi0)
        return float(self._spline(t % self.tau))

    def field_deviation_integral(self, t):
        """f(t) = integral_0^t (h(t') - h0) dt', the rotating-frame phase."""
        if self.kind == "sinusoidal":
            w, p = self.omega0, self.phi0
            return self.amplitude * (math.sin(w * t + p) - math.sin(p)) / w
        tm = t % self.tau
        anti = self._spline.antiderivative()
        return float(anti(tm) - anti(0.0)) - self.h0 * tm

    def describe(self):
        """JSON-ready parameter dictionary."""
        info = {
            "kind": self.kind,
            "omega0": self.omega0,
            "h0": self.h0,
            "h_initial": self.h_initial,
            "tau": self.tau,
        }
        if self.kind == "sinusoidal":
            info["amplitude"] = self.amplitude
            info["phi0"] = self.phi0
        else:
            info["samples"] = [float(v) for v in self.samples]
        return info


def fold_quasi_energy(value, omega0):
    """Fold a quasi-energy into the fundamental half-interval [0, omega0/2]."""
    y = abs(value) % omega0
    return min(y, omega0 - y)


def mode_hamiltonian(k, h):
    """Bogoliubov-de Gennes generator for momentum k at field value h."""
    eps = h - math.cos(k)
    delta = math.sin(k)
    return np.array([[eps, -1j * delta], [1j * delta, -eps]], dtype=complex)


def _ground_arrays(k, h_initial):
    """Batched ground-state amplitudes and half-gap for H_k(0)."""
    eps = h_initial - np.cos(k)
    delta = np.sin(k)
    energy = np.hypot(eps, delta)
    if np.any(energy == 0.0):
        raise ValueError("gapless mode: ground state undefined at this (k, h)")
    # Two algebraically equivalent eigenvector forms; pick the one whose
    # norm stays away from zero.
    pos = eps >= 0.0
    u = np.where(pos, 1j * delta, energy - eps)
    v = np.where(pos, eps + energy, -1j * delta)
    norm = np.sqrt(np.abs(u) ** 2 + np.abs(v) ** 2)
    return u / norm, v / norm, energy


def bogoliubov_ground(k, h_initial):
    """Ground state (u, v) and half-gap E of the static mode Hamiltonian.

    The ground state of H_k(0) has energy -E with
    E = sqrt((h_initial - cos k)^2 + sin^2 k); excitations cost 2E.
    """
    u, v, energy = _ground_arrays(np.asarray(float(k)), float(h_initial))
    return complex(u), complex(v), float(energy)


def _propagator_matrix_fn(k, protocol):
    k = np.asarray(k, dtype=float)
    cos_k = np.cos(k)
    delta = np.sin(k)
    template = np.zeros(k.shape + (2, 2), dtype=complex)
    template[..., 0, 1] = -1j * delta
    template[..., 1, 0] = 1j * delta

    def matrix_fn(t):
        eps = protocol.field(t) - cos_k
        out = template.copy()
        out[..., 0, 0] = eps
        out[..., 1, 1] = -eps
        return out

    return matrix_fn


def period_propagator(k, protocol, config=None):
    """One-period propagator U_k(tau, 0), batched over k.

    Accepts a scalar momentum (returns a (2, 2) array) or an array of
    momenta (returns (..., 2, 2)).
    """
    if config is None:
        config = IntegratorConfig()
    matrix_fn = _propagator_matrix_fn(k, protocol)
    return integrate_linear_ode(matrix_fn, 0.0, protocol.tau, config)


def _decompose_batch(u, tau):
    """Eigen-decomposition of a batch of one-period propagators.

    Returns (mu, plus, minus, degenerate) where `plus` holds the Floquet
    mode whose eigenvalue is exp(-i theta) with theta in (0, pi), and mu
    = theta / tau lies in [0, omega0 / 2].
    """
    u = np.asarray(u, dtype=complex)
    half_trace = 0.5 * (u[..., 0, 0] + u[..., 1, 1])
    defect = np.abs(u - half_trace[..., None, None] * identity_like(u.shape[:-2]))
    degenerate = defect.max(axis=(-2, -1)) < DEGENERACY_TOL

    lam, vec = np.linalg.eig(u)
    theta = -np.angle(lam)
    plus_idx = np.argmax(theta > 0.0, axis=-1)
    take = np.arange(lam.shape[0]) if lam.ndim == 2 else None
    if take is None:
        plus = vec[:, plus_idx]
        minus = vec[:, 1 - plus_idx]
        theta_plus = theta[plus_idx]
    else:
        plus = vec[take, :, plus_idx]
        minus = vec[take, :, 1 - plus_idx]
        theta_plus = theta[take, plus_idx]
    mu = theta_plus / tau
    # Degenerate propagators carry no mode information; mu comes from the
    # common eigenphase and the vectors are fixed up by the caller.
    deg_mu = np.abs(np.angle(half_trace)) / tau
    mu = np.where(degenerate, deg_mu, mu)
    return mu, plus, minus, degenerate


def floquet_decompose(u, tau):
    """Floquet modes and quasi-energy of a single one-period propagator.

    Returns (mu, mode_plus, mode_minus, degenerate).  When the propagator
    is proportional to the identity (degenerate flag), the returned modes
    are the coordinate basis and carry no physical meaning; callers should
    restore them by continuity in k.
    """
    u = np.asarray(u, dtype=complex)
    mu, plus, minus, degenerate = _decompose_batch(u[None, ...], tau)
    if degenerate[0]:
        plus = np.array([[1.0 + 0j, 0.0]])
        minus = np.array([[0.0 + 0j, 1.0]])
    return float(mu[0]), plus[0], minus[0], bool(degenerate[0])


def overlaps(mode_plus, ground):
    """Excitation weight |<mode_plus | ground>|^2 for normalized vectors."""
    mode_plus = np.asarray(mode_plus, dtype=complex)
    ground = np.asarray(ground, dtype=complex)
    for vec in (mode_plus, ground):
        norm = np.linalg.norm(vec)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError("overlap inputs must be normalized vectors")
    amp = np.vdot(mode_plus, ground)
    return min(float(abs(amp) ** 2), 1.0)


@dataclass
class ModeSolution:
    """Floquet solution of a single momentum mode."""

    k: float
    energy: float          # E_k, half the excitation gap of H_k(0)
    u: complex             # vacuum amplitude of the ground state
    v: complex             # pair amplitude of the ground state
    quasi_energy: float    # mu_k folded into [0, omega0/2]
    r_plus_sq: float       # |<phi_k^+ | ground>|^2
    xi: float              # 4 r_plus_sq (1 - r_plus_sq)
    degenerate: bool = False

    @property
    def r_minus_sq(self):
        return 1.0 - self.r_plus_sq

    def validate(self, omega0):
        if not 0.0 < self.k <= math.pi:
            raise ValueError("k out of range (0, pi]")
        if not -1e-12 <= self.r_plus_sq <= 1.0 + 1e-12:
            raise ValueError("r_plus_sq out of [0, 1]")
        if not -1e-12 <= self.xi <= 1.0 + 1e-12:
            raise ValueError("xi out of [0, 1]")
        if not -1e-12 <= self.quasi_energy <= omega0 / 2 + 1e-12:
            raise ValueError("quasi-energy outside [0, omega0/2]")
        if abs(abs(self.u) ** 2 + abs(self.v) ** 2 - 1.0) > 1e-9:
            raise ValueError("ground state not normalized")


@dataclass(eq=False)
class SpectrumTable:
    """Floquet mode data over a midpoint k-grid on (0, pi).

    Column arrays are index-aligned; `mode(i)` provides a per-mode view.
    """

    protocol: DriveProtocol
    config: IntegratorConfig
    k: np.ndarray
    energy: np.ndarray
    u: np.ndarray
    v: np.ndarray
    quasi_energy: np.ndarray
    r_plus_sq: np.ndarray
    xi: np.ndarray
    degenerate: np.ndarray

    def __len__(self):
        return self.k.size

    @property
    def n_k(self):
        return self.k.size

    @property
    def delta_k(self):
        return math.pi / self.k.size

    @property
    def r_minus_sq(self):
        return 1.0 - self.r_plus_sq

    def mode(self, i):
        return ModeSolution(
            k=float(self.k[i]),
            energy=float(self.energy[i]),
            u=complex(self.u[i]),
            v=complex(self.v[i]),
            quasi_energy=float(self.quasi_energy[i]),
            r_plus_sq=float(self.r_plus_sq[i]),
            xi=float(self.xi[i]),
            degenerate=bool(self.degenerate[i]),
        )

    def __iter__(self):
        return (self.mode(i) for i in range(len(self)))

    def validate(self):
        if not np.all(np.diff(self.k) > 0.0):
            raise ValueError("k grid must be strictly increasing")
        for i in range(len(self)):
            self.mode(i).validate(self.protocol.omega0)

    def with_exchanged_labels(self):
        """Copy of the table with the roles of the two Floquet modes swapped.

        The excitation weight xi = 4 r+ r- does not depend on the labels,
        so it is carried over unchanged.
        """
        return SpectrumTable(
            protocol=self.protocol,
            config=self.config,
            k=self.k.copy(),
            energy=self.energy.copy(),
            u=self.u.copy(),
            v=self.v.copy(),
            quasi_energy=self.quasi_energy.copy(),
            r_plus_sq=self.r_minus_sq,
            xi=self.xi.copy(),
            degenerate=self.degenerate.copy(),
        )


def midpoint_grid(n_k):
    """Midpoint momenta k_j = (j - 1/2) pi / n_k, j = 1..n_k."""
    return (np.arange(n_k) + 0.5) * (math.pi / n_k)


def _solve_modes(k, protocol, config):
    """Solve the Floquet problem for an array of momenta."""
    u_prop = period_propagator(k, protocol, config)
    mu, plus, minus, degenerate = _decompose_batch(u_prop, protocol.tau)
    gu, gv, energy = _ground_arrays(k, protocol.h_initial)
    ground = np.stack([gu, gv], axis=-1)
    r_plus = np.abs(np.einsum("...i,...i->...", plus.conj(), ground)) ** 2
    r_plus = np.clip(r_plus, 0.0, 1.0)
    # Degenerate propagators: inherit the mode basis from the nearest
    # smaller non-degenerate momentum.
    if np.any(degenerate):
        idx_bad = np.flatnonzero(degenerate)
        idx_good = np.flatnonzero(~degenerate)
        for j in idx_bad:
            if idx_good.size == 0:
                # No anchor anywhere (e.g. zero drive at a commensurate
                # period): fall back to the static eigenbasis.
                r_plus[j] = 0.0
                continue
            anchor = idx_good[np.argmin(np.abs(idx_good - j))]
            r_plus[j] = np.clip(
                np.abs(np.vdot(plus[anchor], ground[j])) ** 2, 0.0, 1.0)
    xi = 4.0 * r_plus * (1.0 - r_plus)
    return energy, gu, gv, mu, r_plus, xi, degenerate


def _spectrum_chunk(args):
    k, protocol, config = args
    return _solve_modes(k, protocol, config)


def build_spectrum(protocol, n_k=2000, config=None, workers=None):
    """Solve all modes on the midpoint grid and assemble a SpectrumTable.

    Parameters
    ----------
    protocol : DriveProtocol
    n_k : int
        Grid size, at least 64.  Midpoint nodes coincide with the
        anti-periodic-boundary momenta of a chain of length L = 2 n_k.
    config : IntegratorConfig, optional
    workers : int, optional
        Process count for chunked evaluation over k; defaults to the
        FLOQUET_WORK_WORKERS environment variable or the core count.
    """
    if n_k < 64:
        raise ValueError("n_k must be at least 64")
    if config is None:
        config = IntegratorConfig()
    if workers is None:
        workers = worker_count()
    k = midpoint_grid(n_k)
    if workers > 1 and n_k >= 4 * workers:
        chunks = np.array_split(k, workers)
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                _spectrum_chunk,
                [(chunk, protocol, config) for chunk in chunks],
            ))
        merged = [np.concatenate(cols) for cols in zip(*parts)]
    else:
        merged = list(_solve_modes(k, protocol, config))
    energy, gu, gv, mu, r_plus, xi, degenerate = merged
    return SpectrumTable(
        protocol=protocol,
        config=config,
        k=k,
        energy=energy,
        u=gu,
        v=gv,
        quasi_energy=mu,
        r_plus_sq=r_plus,
        xi=xi,
        degenerate=degenerate,
    )


def rotated_frame_check(k, protocol, config=None):
    """Lab-frame vs rotating-frame propagator agreement at one momentum.

    Integrates the generator in the frame where the field drive appears
    only as a phase e^{2 i f(t)} on the pair coupling; because
    f(tau) = f(0) = 0, the two one-period propagators must coincide.
    Returns the max-norm of their difference.
    """
    if config is None:
        config = IntegratorConfig()
    k = float(k)
    eps0 = protocol.h0 - math.cos(k)
    delta = math.sin(k)

    def rotated_fn(t):
        phase = np.exp(2j * protocol.field_deviation_integral(t))
        return np.array(
            [[eps0, -1j * delta * phase],
             [1j * delta * np.conj(phase), -eps0]],
            dtype=complex,
        )

    u_lab = period_propagator(k, protocol, config)
    u_rot = integrate_linear_ode(rotated_fn, 0.0, protocol.tau, config)
    return float(np.abs(u_rot - u_lab).max())

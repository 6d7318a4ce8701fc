"""Self-contained numerical kernels used by the rest of the package.

Provides fixed- and adaptive-step Runge-Kutta integration of 2x2 complex
linear Schrodinger-type ODEs (batched over an arbitrary leading shape),
small helpers for 2x2 complex matrix algebra, Bessel functions of the
first kind, and least-squares fitting (straight line, and power law on
log-log axes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "IntegratorConfig",
    "IntegrationError",
    "FitResult",
    "identity_like",
    "unitarity_defect",
    "is_unitary",
    "integrate_linear_ode",
    "bessel_j",
    "fit_linear",
    "fit_power_law",
]


class IntegrationError(RuntimeError):
    """Adaptive integration ran out of steps.

    Carries the achieved local error estimate so callers can decide
    whether the partial accuracy is acceptable.
    """

    def __init__(self, message, achieved_error, steps_taken):
        super().__init__(message)
        self.achieved_error = achieved_error
        self.steps_taken = steps_taken


@dataclass
class IntegratorConfig:
    """Settings for :func:`integrate_linear_ode`.

    Parameters
    ----------
    method : {'rk4', 'rk45'}
        Fixed-step classical Runge-Kutta or adaptive Dormand-Prince 5(4).
    steps_per_period : int
        Number of fixed steps over the integration interval ('rk4' only).
    rtol : float
        Local error tolerance per step ('rk45' only), at most 1e-3.
    max_steps : int
        Step budget for the adaptive method.
    """

    method: str = "rk4"
    steps_per_period: int = 512
    rtol: float = 1e-10
    max_steps: int = 200_000

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"unknown integration method {self.method!r}")
        if self.steps_per_period < 16:
            raise ValueError("steps_per_period must be at least 16")
        if not 0.0 < self.rtol <= 1e-3:
            raise ValueError("rtol must lie in (0, 1e-3]")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


def identity_like(shape):
    """Batch of 2x2 complex identity matrices with the given leading shape."""
    eye = np.zeros(tuple(shape) + (2, 2), dtype=complex)
    eye[..., 0, 0] = 1.0
    eye[..., 1, 1] = 1.0
    return eye


def unitarity_defect(u):
    """Max-norm of U^dag U - 1, reduced over the trailing matrix axes."""
    u = np.asarray(u)
    gram = np.swapaxes(u.conj(), -1, -2) @ u
    gram[..., 0, 0] -= 1.0
    gram[..., 1, 1] -= 1.0
    return np.abs(gram).max(axis=(-2, -1))


def is_unitary(u, tol=1e-9):
    """Whether every matrix in the batch is unitary to within `tol`."""
    return bool(np.all(unitarity_defect(u) < tol))


def _rhs(h_t, u):
    return -1j * (h_t @ u)


def _rk4_fixed(matrix_fn, t0, t1, n_steps):
    dt = (t1 - t0) / n_steps
    h_left = np.asarray(matrix_fn(t0), dtype=complex)
    u = identity_like(h_left.shape[:-2])
    for m in range(n_steps):
        t = t0 + m * dt
        h_mid = np.asarray(matrix_fn(t + 0.5 * dt), dtype=complex)
        h_right = np.asarray(matrix_fn(t + dt), dtype=complex)
        k1 = _rhs(h_left, u)
        k2 = _rhs(h_mid, u + (0.5 * dt) * k1)
        k3 = _rhs(h_mid, u + (0.5 * dt) * k2)
        k4 = _rhs(h_right, u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        h_left = h_right
    return u


# Dormand-Prince 5(4) tableau.
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
          187 / 2100, 1 / 40)


def _rk45_adaptive(matrix_fn, t0, t1, rtol, max_steps):
    h_probe = np.asarray(matrix_fn(t0), dtype=complex)
    u = identity_like(h_probe.shape[:-2])
    span = t1 - t0
    # Initial step guess from the generator magnitude at t0.
    hnorm = float(np.abs(h_probe).max())
    dt = min(span, 0.1 / max(hnorm, 1e-12))
    t = t0
    steps = 0
    err = 0.0
    while t < t1 - 1e-15 * span:
        if steps >= max_steps:
            raise IntegrationError(
                f"adaptive integrator exhausted {max_steps} steps at t={t:.6g} "
                f"(last error estimate {err:.3e}, rtol {rtol:.3e})",
                achieved_error=err,
                steps_taken=steps,
            )
        dt = min(dt, t1 - t)
        k = []
        for i in range(7):
            ui = u
            for a, kj in zip(_DP_A[i], k):
                if a != 0.0:
                    ui = ui + (dt * a) * kj
            k.append(_rhs(np.asarray(matrix_fn(t + _DP_C[i] * dt), dtype=complex), ui))
        u5 = u
        u4 = u
        for b5, b4, kj in zip(_DP_B5, _DP_B4, k):
            if b5 != 0.0:
                u5 = u5 + (dt * b5) * kj
            if b4 != 0.0:
                u4 = u4 + (dt * b4) * kj
        err = float(np.abs(u5 - u4).max())
        steps += 1
        if err <= rtol:
            t += dt
            u = u5
        factor = 0.9 * (rtol / max(err, 1e-300)) ** 0.2
        dt *= min(5.0, max(0.2, factor))
    return u


def integrate_linear_ode(matrix_fn, t0, t1, config=None):
    """Propagator U(t1, t0) of i dU/dt = H(t) U with U(t0, t0) = 1.

    Parameters
    ----------
    matrix_fn : callable
        Maps a time to a complex Hermitian generator of shape (..., 2, 2);
        the leading batch shape must not depend on t.
    t0, t1 : float
        Integration interval, t1 > t0.
    config : IntegratorConfig, optional
        Defaults to fixed-step RK4 with 512 steps over the interval.

    Returns
    -------
    ndarray
        The (..., 2, 2) propagator, unitary to within the integration error.
    """
    if config is None:
        config = IntegratorConfig()
    if not t1 > t0:
        raise ValueError("t1 must be greater than t0")
    if config.method == "rk4":
        return _rk4_fixed(matrix_fn, t0, t1, config.steps_per_period)
    return _rk45_adaptive(matrix_fn, t0, t1, config.rtol, config.max_steps)


def _bessel_series(order, x):
    # Ascending power series; safe from cancellation only for small |x|.
    half = 0.5 * x
    term = 1.0
    for m in range(1, order + 1):
        term *= half / m
    total = term
    m = 0
    while True:
        m += 1
        term *= -(half * half) / (m * (m + order))
        total += term
        if abs(term) <= 1e-17 * abs(total) + 1e-300:
            return total
        if m > 500:  # unreachable for |x| <= series cutoff
            return total


def _bessel_miller(order, x):
    # Downward recurrence, normalized with J_0 + 2 sum_m J_{2m} = 1.
    start = int(max(order, x) + 25 + 5.0 * math.sqrt(max(order, x)))
    if start % 2:
        start += 1
    jp = 0.0
    jc = 1e-30
    result = 0.0
    norm = 0.0
    for m in range(start, 0, -1):
        jm = (2.0 * m / x) * jc - jp
        jp = jc
        jc = jm
        if m - 1 == order:
            result = jc
        if (m - 1) % 2 == 0:
            norm += 2.0 * jc
        if abs(jc) > 1e250:  # rescale to avoid overflow
            jc *= 1e-250
            jp *= 1e-250
            result *= 1e-250
            norm *= 1e-250
    norm -= jc  # the m=0 term enters the sum singly
    return result / norm


def bessel_j(order, x):
    """Bessel function of the first kind J_order(x).

    Accurate to better than 1e-12 in absolute terms for integer
    0 <= order <= 20 and |x| <= 100.
    """
    if order < 0 or order != int(order):
        raise ValueError("order must be a non-negative integer")
    if order > 20 or abs(x) > 100:
        raise ValueError("bessel_j supports order <= 20 and |x| <= 100")
    order = int(order)
    x = float(x)
    sign = 1.0
    if x < 0.0:
        x = -x
        sign = -1.0 if order % 2 else 1.0
    if x == 0.0:
        return 1.0 if order == 0 else 0.0
    if x <= 8.0:
        return sign * _bessel_series(order, x)
    return sign * _bessel_miller(order, x)


@dataclass
class FitResult:
    """Least-squares fit outcome.

    `coefficients` is model-dependent: slope/intercept for a straight
    line, amplitude/exponent for a power law.
    """

    coefficients: dict = field(default_factory=dict)
    residual_norm: float = 0.0
    window: tuple = (0.0, 0.0)

    def __post_init__(self):
        lo, hi = self.window
        if not lo < hi:
            raise ValueError("fit window must satisfy lo < hi")
        if self.residual_norm < 0.0:
            raise ValueError("residual norm must be non-negative")


def fit_linear(xs, ys):
    """Least-squares straight line y = intercept + slope * x.

    Requires at least 3 strictly increasing x values.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3 or xs.size != ys.size:
        raise ValueError("need at least 3 matching (x, y) points")
    if not np.all(np.diff(xs) > 0.0):
        raise ValueError("x values must be strictly increasing")
    design = np.column_stack([np.ones_like(xs), xs])
    coef, _, _, _ = np.linalg.lstsq(design, ys, rcond=None)
    intercept, slope = coef
    resid = ys - (intercept + slope * xs)
    return FitResult(
        coefficients={"slope": float(slope), "intercept": float(intercept)},
        residual_norm=float(np.linalg.norm(resid)),
        window=(float(xs[0]), float(xs[-1])),
    )


def fit_power_law(ss, ys):
    """Fit y ~ amplitude / s**exponent by a straight line on log-log axes.

    Requires at least 4 points with strictly positive, increasing s and
    strictly positive y.
    """
    ss = np.asarray(ss, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if ss.size < 4 or ss.size != ys.size:
        raise ValueError("need at least 4 matching (s, y) points")
    if not (np.all(ss > 0.0) and np.all(np.diff(ss) > 0.0)):
        raise ValueError("s values must be positive and strictly increasing")
    if not np.all(ys > 0.0):
        raise ValueError("y values must be strictly positive for a power-law fit")
    line = fit_linear(np.log(ss), np.log(ys))
    exponent = -line.coefficients["slope"]
    amplitude = math.exp(line.coefficients["intercept"])
    return FitResult(
        coefficients={"exponent": float(exponent), "amplitude": float(amplitude)},
        residual_norm=line.residual_norm,
        window=(float(ss[0]), float(ss[-1])),
    )

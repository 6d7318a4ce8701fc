"""Critical-point classification and edge-singularity diagnostics.

The small-work behaviour of the stationary work distribution is governed
by the small-k modes.  Which singularity occurs at the threshold
W_th = 2 |h_i - 1| depends only on (i) whether the initial field h_i sits
at the equilibrium critical point h_c = 1 and (ii) whether the average
field h0 sits at a non-equilibrium critical point, i.e. whether
2 |h0 - 1| = l omega0 for an integer l (with coherent destruction of
tunnelling, a zero of J_l(2A/omega0), re-opening the Floquet gap).  The
classification uses parameters only; the fits and diagnostic curves here
validate it against spectrum data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .numerics import bessel_j, fit_power_law
from .workstats import cgf_residual

__all__ = [
    "ResonanceReport",
    "SmallKFit",
    "SingularityDiagnosis",
    "DiagnosticCurve",
    "RegimeMismatchError",
    "classify_resonance",
    "classify_case",
    "fit_small_k_overlap",
    "edge_coefficient_a",
    "diagnostic_R",
    "diagnostic_Rc",
    "critical_power_fit",
    "diagnose",
    "extrapolate_small_k",
    "quasi_energy_edge_limits",
]

CRITICAL_FIELD = 1.0


class RegimeMismatchError(RuntimeError):
    """The small-k overlap data contradicts the parameter-based regime."""

    def __init__(self, message, residual_assigned, residual_other):
        super().__init__(message)
        self.residual_assigned = residual_assigned
        self.residual_other = residual_other


@dataclass
class ResonanceReport:
    """Parameter-level classification of the drive against critical points."""

    h0: float
    omega0: float
    h_initial: float
    resonant: bool
    l: int | None
    cdt: bool
    h_critical_distance: float   # min_l | 2|h0 - 1| - l omega0 |
    initial_gap: float           # 2 |h_i - 1|
    tol_res: float
    tol_cdt: float


def classify_resonance(protocol, l_max=8, tol_res=1e-9, tol_cdt=1e-4):
    """Check the non-equilibrium resonance condition 2 |h0 - 1| = l omega0.

    Scans l = 0..l_max.  For sinusoidal drives a resonance additionally
    has coherent destruction of tunnelling when |J_l(2A/omega0)| < tol_cdt.
    The default tolerance admits four-significant-digit tunings of the
    drive frequency to a Bessel zero (e.g. omega0 = 0.3623 for l = 0,
    A = 1, where |J_0| is a few 1e-5).
    """
    if l_max < 0:
        raise ValueError("l_max must be non-negative")
    gap0 = 2.0 * abs(protocol.h0 - CRITICAL_FIELD)
    ls = np.arange(l_max + 1)
    distances = np.abs(gap0 - ls * protocol.omega0)
    best = int(np.argmin(distances))
    distance = float(distances[best])
    resonant = distance < tol_res
    cdt = False
    if resonant and protocol.kind == "sinusoidal":
        argument = 2.0 * protocol.amplitude / protocol.omega0
        cdt = abs(bessel_j(best, argument)) < tol_cdt
    return ResonanceReport(
        h0=protocol.h0,
        omega0=protocol.omega0,
        h_initial=protocol.h_initial,
        resonant=resonant,
        l=best if resonant else None,
        cdt=cdt,
        h_critical_distance=distance,
        initial_gap=2.0 * abs(protocol.h_initial - CRITICAL_FIELD),
        tol_res=tol_res,
        tol_cdt=tol_cdt,
    )


def classify_case(report, tol_critical=1e-9):
    """Singularity case from parameters alone.

    'c' when the initial field is critical; otherwise 'b' at a resonance
    without coherent destruction of tunnelling, else 'a'.
    """
    if abs(report.h_initial - CRITICAL_FIELD) <= tol_critical:
        return "c"
    if report.resonant and not report.cdt:
        return "b"
    return "a"


@dataclass
class SmallKFit:
    """Leading small-k behaviour of the vanishing overlap weight.

    In the 'nonresonant-quadratic' regime `coefficient` is alpha^2 with
    min(|r+|^2, |r-|^2) ~ (alpha^2 / 4) k^2; in the 'resonant-linear'
    regime it is beta with |r+|^2 ~ 1/2 - (beta / 2) k.
    """

    regime: str
    coefficient: float
    window: tuple
    residual_norm: float
    n_points: int = 0


def _through_origin_slope(x, y):
    return float(np.dot(x, y) / np.dot(x, x))


def fit_small_k_overlap(table, report, k_max=0.05):
    """Fit the small-k overlap expansion in the regime set by `report`.

    Raises RegimeMismatchError when the data visibly favours the other
    regime (the fits validate the parameter-based classification, they
    never decide it).
    """
    sel = table.k <= k_max
    if int(np.sum(sel)) < 8:
        raise ValueError(
            f"need at least 8 grid points below k_max={k_max}; "
            f"got {int(np.sum(sel))}")
    k = table.k[sel]
    r_plus = table.r_plus_sq[sel]
    resonant_regime = report.resonant and not report.cdt

    # Quadratic hypothesis on whichever weight vanishes at k -> 0.
    vanishing = r_plus if float(np.mean(r_plus)) < 0.5 else 1.0 - r_plus
    quad_coef = _through_origin_slope(k ** 2, vanishing)
    res_quad = float(np.linalg.norm(vanishing - quad_coef * k ** 2))

    # Linear hypothesis around the 1/2 plateau.
    lin_slope = _through_origin_slope(k, r_plus - 0.5)
    res_lin = float(np.linalg.norm(r_plus - 0.5 - lin_slope * k))

    if resonant_regime:
        if res_lin > 5.0 * res_quad + 1e-12:
            raise RegimeMismatchError(
                "resonant-linear regime assigned but the quadratic model "
                f"fits better (linear residual {res_lin:.3e}, quadratic "
                f"residual {res_quad:.3e})", res_lin, res_quad)
        return SmallKFit(
            regime="resonant-linear",
            coefficient=-2.0 * lin_slope,
            window=(0.0, k_max),
            residual_norm=res_lin,
            n_points=k.size,
        )
    if res_quad > 5.0 * res_lin + 1e-12:
        raise RegimeMismatchError(
            "nonresonant-quadratic regime assigned but the linear model "
            f"fits better (quadratic residual {res_quad:.3e}, linear "
            f"residual {res_lin:.3e})", res_quad, res_lin)
    alpha_sq = 4.0 * quad_coef
    if alpha_sq < 0.0:
        alpha_sq = 0.0
    return SmallKFit(
        regime="nonresonant-quadratic",
        coefficient=alpha_sq,
        window=(0.0, k_max),
        residual_norm=res_quad,
        n_points=k.size,
    )


def edge_coefficient_a(fit, h_initial):
    """Square-root edge strength a = alpha^2/(16 sqrt(pi)) (|h_i-1|/h_i)^{3/2}."""
    if fit.regime != "nonresonant-quadratic":
        raise ValueError("edge coefficient needs a quadratic-regime fit")
    if not h_initial > 0.0:
        raise ValueError("h_initial must be positive")
    if h_initial == CRITICAL_FIELD:
        raise ValueError("h_initial is critical: the power-law case applies")
    ratio = abs(h_initial - CRITICAL_FIELD) / h_initial
    return fit.coefficient / (16.0 * math.sqrt(math.pi)) * ratio ** 1.5


@dataclass(eq=False)
class DiagnosticCurve:
    """Rescaled large-s CGF residual against a candidate asymptotic form."""

    s: np.ndarray
    values: np.ndarray
    kind: str                 # 'R', 'Rc' or 'residual'

    def last_decade(self):
        sel = self.s >= self.s[-1] / 10.0
        return self.s[sel], self.values[sel]

    def plateau_value(self):
        _, tail = self.last_decade()
        return float(np.mean(tail))

    def last_decade_variation(self):
        """Relative spread (max - min) / |mean| over the last decade of s."""
        _, tail = self.last_decade()
        mean = float(np.mean(tail))
        if mean == 0.0:
            return 0.0 if float(np.ptp(tail)) == 0.0 else math.inf
        return float(np.ptp(tail)) / abs(mean)

    def plateaus(self, threshold=0.05):
        return self.last_decade_variation() < threshold


def _rescaled_residual(table, s_grid, denominator, kind, enforce_regime=True):
    s_grid = np.asarray(s_grid, dtype=float)
    gap = abs(table.protocol.h_initial - CRITICAL_FIELD)
    if gap == 0.0:
        raise ValueError("diagnostic defined for non-critical initial field")
    if enforce_regime and np.any(s_grid * gap < 3.0 - 1e-12):
        raise ValueError("grid outside the asymptotic regime s |h_i - 1| >= 3")
    denoms = np.asarray([denominator(s, gap) for s in s_grid])
    keep = denoms > 0.0
    if not np.all(keep):
        warnings.warn(
            f"{kind} diagnostic: exponential scale underflows beyond "
            f"s = {s_grid[keep][-1] if np.any(keep) else s_grid[0]:.3g}; "
            "grid truncated", RuntimeWarning, stacklevel=3)
        s_grid, denoms = s_grid[keep], denoms[keep]
    residuals = np.array([cgf_residual(table, s) for s in s_grid])
    return DiagnosticCurve(s=s_grid, values=residuals / denoms, kind=kind)


def diagnostic_R(table, s_grid):
    """R(s) = residual / (e^{-2|h_i-1|s} / s^{3/2}).

    Flat at large s when the square-root edge form holds (case a); the
    plateau estimates the edge strength a.
    """
    return _rescaled_residual(
        table, s_grid,
        lambda s, gap: math.exp(-2.0 * gap * s) / s ** 1.5,
        kind="R")


def diagnostic_Rc(table, s_grid):
    """R_c(s) = residual / (s e^{-2|h_i-1|s}).

    Flat at large s for a resonant, tunnelling-preserving drive (case b),
    where the plateau measures the delta-derivative strength a_c.
    """
    return _rescaled_residual(
        table, s_grid,
        lambda s, gap: s * math.exp(-2.0 * gap * s),
        kind="Rc")


@dataclass
class SingularityDiagnosis:
    """Identified small-work singularity and its measured strength.

    `strength` is case-dependent: {'a': ..., 'plateau': ...} for the
    square-root edge, {'a_c': ...} for the delta-derivative edge, and
    {'D': ..., 'b': ...} for the critical power law.
    """

    case: str
    threshold: float
    strength: dict = field(default_factory=dict)
    window: tuple = (0.0, 0.0)
    residual_norm: float = 0.0
    notes: str | None = None


def critical_power_fit(table, s_grid, tol_critical=1e-9):
    """Power-law fit of the CGF residual for a critical initial field.

    Fits residual(s) ~ D / s^b and classifies b near 1 (step singularity
    at W = 0) or near 3 (quadratic rise); exponents more than 25% away
    from both are reported unclassified.
    """
    if abs(table.protocol.h_initial - CRITICAL_FIELD) > tol_critical:
        raise ValueError("critical power fit needs h_initial = 1")
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid < 10.0):
        raise ValueError("critical fit grid must satisfy s >= 10")
    residuals = np.array([cgf_residual(table, s) for s in s_grid])
    fit = fit_power_law(s_grid, residuals)
    b = fit.coefficients["exponent"]
    amplitude = fit.coefficients["amplitude"]
    if abs(b - 1.0) <= 0.25:
        notes = "step singularity (1/s decay)"
    elif abs(b - 3.0) <= 0.75:
        notes = "quadratic rise (1/s^3 decay)"
    else:
        notes = "unclassified exponent"
    return SingularityDiagnosis(
        case="c",
        threshold=0.0,
        strength={"D": amplitude, "b": b},
        window=(float(s_grid[0]), float(s_grid[-1])),
        residual_norm=fit.residual_norm,
        notes=notes,
    )


def default_diagnostic_grid(gap, points=48, span=340.0):
    """Log-spaced s grid covering [3/gap, span/gap] for edge diagnostics.

    The span keeps 2 * gap * s below the exponential underflow limit of
    the rescaling denominators.
    """
    return np.geomspace(3.0 / gap, span / gap, points)


def diagnose(table, l_max=8, tol_res=1e-9, tol_cdt=1e-6, k_max=0.05,
             s_grid=None):
    """Full singularity diagnosis of a spectrum table.

    Returns (report, small_k_fit_or_None, curves, diagnosis) where
    `curves` maps curve names to DiagnosticCurve objects.  The case label
    is decided by the drive parameters alone; the fits and curves
    validate it.
    """
    report = classify_resonance(table.protocol, l_max=l_max,
                                tol_res=tol_res, tol_cdt=tol_cdt)
    case = classify_case(report)
    curves = {}
    if case == "c":
        grid = np.geomspace(10.0, 200.0, 32) if s_grid is None else np.asarray(s_grid)
        diagnosis = critical_power_fit(table, grid)
        residuals = np.array([cgf_residual(table, s) for s in grid])
        curves["residual"] = DiagnosticCurve(s=grid, values=residuals,
                                             kind="residual")
        return report, None, curves, diagnosis

    gap = abs(table.protocol.h_initial - CRITICAL_FIELD)
    grid = default_diagnostic_grid(gap) if s_grid is None else np.asarray(s_grid)
    small_fit = fit_small_k_overlap(table, report, k_max=k_max)
    if case == "a":
        curve = diagnostic_R(table, grid)
        curves["R"] = curve
        strength = {"a": edge_coefficient_a(small_fit, table.protocol.h_initial),
                    "plateau": curve.plateau_value()}
        notes = "square-root edge" if curve.plateaus() else \
            "square-root edge (plateau not yet converged on this grid)"
    else:
        curve = diagnostic_Rc(table, grid)
        curves["Rc"] = curve
        strength = {"a_c": curve.plateau_value()}
        notes = "delta-derivative edge" if curve.plateaus() else \
            "delta-derivative edge (plateau not yet converged on this grid)"
    diagnosis = SingularityDiagnosis(
        case=case,
        threshold=report.initial_gap,
        strength=strength,
        window=(float(curve.s[0]), float(curve.s[-1])),
        residual_norm=curve.last_decade_variation(),
        notes=notes,
    )
    return report, small_fit, curves, diagnosis


def extrapolate_small_k(k_values, values):
    """Quadratic extrapolation of the first three samples to k = 0."""
    if len(k_values) < 3:
        raise ValueError("need at least three samples to extrapolate")
    coeffs = np.polyfit(k_values[:3], values[:3], 2)
    return float(np.polyval(coeffs, 0.0))


def quasi_energy_edge_limits(table):
    """Quasi-energies extrapolated to the zone edges k -> 0 and k -> pi.

    The limits equal the folded |h0 -+ 1| for any drive (the field
    decouples from the zone-edge modes).
    """
    mu0 = extrapolate_small_k(table.k, table.quasi_energy)
    mu_pi = extrapolate_small_k(
        (math.pi - table.k[::-1]), table.quasi_energy[::-1])
    return mu0, mu_pi

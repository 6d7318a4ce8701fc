"""Stroboscopic work statistics of the periodically driven Ising chain.

The package solves the transverse-field Ising chain under a time-periodic
uniform field mode by mode: each momentum k carries a two-level problem
whose one-period propagator yields Floquet quasi-energies and overlaps
with the initial ground state.  From that spectrum it assembles the work
cumulant generating function after n drive periods and its stationary
limit, work cumulants, finite-temperature averages and irreversible
entropy, exact finite-chain work histograms, and the classification of
the small-work edge singularities against the equilibrium and
non-equilibrium critical points of the drive.
"""

__version__ = "0.1.0"

from .numerics import (
    IntegratorConfig,
    IntegrationError,
    FitResult,
    integrate_linear_ode,
    unitarity_defect,
    is_unitary,
    bessel_j,
    fit_linear,
    fit_power_law,
)
from .floquet import (
    DriveProtocol,
    ModeSolution,
    SpectrumTable,
    fold_quasi_energy,
    mode_hamiltonian,
    bogoliubov_ground,
    period_propagator,
    floquet_decompose,
    overlaps,
    build_spectrum,
    rotated_frame_check,
)
from .workstats import (
    CgfCurve,
    CumulantSet,
    WorkHistogram,
    EntropyCurve,
    cgf_finite_n,
    cgf_asymptotic,
    g_infinity,
    cgf_residual,
    cgf_finite_temperature,
    cumulants_asymptotic,
    average_work,
    entropy_sweep,
    work_histogram,
)
from .asymptotics import (
    ResonanceReport,
    SmallKFit,
    SingularityDiagnosis,
    DiagnosticCurve,
    classify_resonance,
    classify_case,
    fit_small_k_overlap,
    edge_coefficient_a,
    diagnostic_R,
    diagnostic_Rc,
    critical_power_fit,
    diagnose,
)

__all__ = [name for name in dir() if not name.startswith("_")]

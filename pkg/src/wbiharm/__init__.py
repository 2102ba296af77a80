"""Numerical toolkit for the weighted fourth-order equation Delta(|x|^alpha Delta u) = |x|^l u^p."""

__version__ = "0.1.0"

from .exponents import (
    InvalidParamsError,
    ProblemParams,
    bootstrap_sequences,
    classify_regime,
    derive_exponents,
    linearization_spectrum,
    pohozaev_coefficient,
)
from .transform import ChartKind, RadialProfile, TransformedProfile, from_transformed, to_transformed
from .radial_ode import classify_trajectory, integrate, liouville_scan, shoot_navier_ball
from .identities import energy, pde_residual, pohozaev_check
from .asymptotics import check_bounds, fit_tail, monotonicity_report
from .variational import Grid1D, assemble_forms, first_eigenpair, minimize_rayleigh

"""Principal eigenpairs of ``-eps Lap - 2 alpha grad m . grad + V`` for quadratic ``m`` as ``alpha -> infinity``."""
from .asymptotics import (
    EigenfunctionExpansion,
    EigenvalueExpansion,
    SweepRecord,
    fit_residual_order,
    pohozaev_projection,
    predict_lambda,
    rescale_eigenfunction,
    run_sweep,
    track_max_point,
)
from .eigensolver import ConvergenceError, EigenPair, second_eigenvalue, smallest_eigenpair
from .limit import (
    CorrectionSet,
    HermiteBasis,
    LimitPair,
    build_hermite_basis,
    build_rhs,
    closed_form_limit,
    gaussian_moment,
    solve_correction,
    solve_corrections,
)
from .model import BoxDomain, DriftSpec, Frame, Grid, GridField, HomogeneousPart, LocalModel, PotentialSpec
from .operator import (
    assemble_nonsymmetric,
    assemble_symmetric,
    gauge_factor,
    rayleigh_quotient,
)

__version__ = "0.1.0"

"""Discrete Besov norms, liftings of circle-valued maps and their Jacobians on dyadic grids."""

from .besov import (
    HaarCoefficients,
    Method,
    NormReport,
    diff_seminorm,
    haar_average_norm,
    haar_coeff_decompose,
    haar_coeff_norm,
    haar_coeff_synthesize,
    poincare_ratio,
    vmo_modulus,
)
from .errors import *  # noqa: F401,F403
from .grid import (
    BesovParams,
    CircleMap,
    Domain,
    DyadicGrid,
    GridFunction,
    coarsen,
    diff,
    dyadic_average,
    make_grid,
    mollify,
    refine,
    sample,
    sample_points,
    slice_at,
    subcube,
)
from .jacobian import TestForm, WindingField, disintegrate_check, pair_jacobian, plaquette_winding, uwedge_grad
from .lifting import (
    LiftResult,
    ObstructionWitness,
    axis_windings,
    lift_continuous,
    lift_dyadic,
    lift_mollifier,
    nearest_phase,
)

__version__ = "0.1.0"

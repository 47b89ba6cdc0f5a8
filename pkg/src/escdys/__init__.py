"""Equilibrium crystal shapes from a phase-field energy minimised by Davis-Yin splitting.

The discrete anisotropic surface energy is split into a convex quadratic,
a concave remainder and the indicator of the mass/box constraint set, and
minimised with a three-operator splitting whose substeps are an FFT solve,
an explicit gradient and a projection.
"""

from .anisotropy import Ellipsoidal, FourFold, Isotropic, KFold, Riemannian
from .constraints import ConstraintSet, project
from .dys import StepPolicy, StopRule, kkt_residual, run
from .energy import SplittingParams, discrete_energy
from .geometry import extract_contour, manifold_distance, wulff_2d
from .gradient_flow import CahnHilliardParams, run_to_steady
from .grid import GridSpec

__all__ = [
    "GridSpec", "Isotropic", "FourFold", "KFold", "Riemannian", "Ellipsoidal",
    "SplittingParams", "discrete_energy", "ConstraintSet", "project",
    "StepPolicy", "StopRule", "run", "kkt_residual",
    "CahnHilliardParams", "run_to_steady",
    "wulff_2d", "extract_contour", "manifold_distance",
]

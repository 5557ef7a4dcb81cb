"""Entire large solutions of radial semilinear problems: shooting, transforms and bounds."""

from .errors import (DomainError, ELSError, InapplicableError, KOViolation, NoSeparatrixError,
                     NoSolutionError, OrderingViolationError, OutOfRangeError, PreconditionError,
                     TrajectoryInvalidError)
from .nonlinearity import (Nonlinearity, F_inverse, eval_F, increasing_majorant, ko_integral,
                           monotone_envelope, parse_nonlinearity, phi, phi_inverse)
from .potential import (EllipsoidPotential, RadialPotential, check_Hrho, ellipsoid_criterion,
                        mean_curvature_margin, newtonian_potential, parse_potential)
from .shooting import (BoundedLimit, EntireLarge, FiniteRadiusBlowup, Indeterminate,
                       RadialSolution, ShootingConfig, boundary_blowup_ball, classify_probe,
                       find_bounded, find_els, integrate_ivp)
from .transformed import (GapReport, ProfileVT, TransformConfig, check_tKV_monotone,
                          from_transformed, hopital_limit, to_transformed, uniqueness_gap,
                          vequation_residual)
from .bounds import (BoundReport, energy_P_radial, fiddgr_check, gamma_bound,
                     implicit_lower_bound, largest_gamma_c, subsolution_w_beta)

__version__ = "0.1.0"

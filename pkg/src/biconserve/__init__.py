"""ODE systems, closed-form families and residual checks for biconservative surfaces
with flat normal bundle in four-dimensional space forms."""

from .core import (BicKState, BicState, BiconserveError, BihState, ConstantProfile, ConstantU,
                   DegenerateDenominatorError, DomainError, NoAdmissibleRangeError,
                   NonFiniteError, NormalProfile, ParameterError, PnmcState, PolynomialProfile,
                   PolynomialU, PreconditionError, ProfileRangeError, TabulatedProfile,
                   ToleranceConfig, UProfile, omega_bar_membership, omega_membership)
from .families import (FamilyCurve, FamilyId, FamilyParams, FamilyPoint, eval_family,
                       family_bounds, family_system_residual, first_integral_rhs, metric_curvature,
                       metric_g22, second_order_residual, solve_u_riccati)
from .integrate import (DomainExit, IntegrationSpec, ReachedEnd, StepFailure, StepLimit,
                        Trajectory, TrajectoryU, dense_eval, integrate)
from .systems import (SystemKind, bih_constraint_residual, gauss_constraint_residual, rhs_bic,
                      rhs_bic_k, rhs_bih, rhs_pnmc)
from .verify import (ResidualReport, bih_poly_k_eps, bih_poly_y_zero, codazzi_residuals,
                     pnmc_beta_check, pnmc_compat_residual, pnmc_constants)

__version__ = "0.1.0"

"""Numerical verification toolkit for Schauder-type estimates of kinetic
Fokker-Planck and linear Landau equations."""
from .config import ConfigError, RunConfig, load_config, parse_config, serialize_config
from .densities import (DensityField, bimodal, grid_density, maxwellian, shifted_maxwellian,
                        zero_density)
from .fundamental import (ConstantOperator, ConvolutionRule, GammaDerivativeSpec,
                          QuadratureError, SingularPointError, gamma, gamma_derivative,
                          gamma_moment_integral, solve_const_anisotropic, solve_const_isotropic)
from .geometry import (KineticCylinder, PhasePoint, cylinder_contains, dilate, galilean_inverse,
                       galilean_shift, quasimetric)
from .holder import GridSpec, SampledField, SeminormSpec, check_interpolation, seminorm
from .landau import (LandauQuadrature, appendix_bounds_check, barrier_check,
                     build_change_of_variables, coeff_a, coeff_b, coeff_c, estimate_mu0)
from .report import VerificationReport, emit_report
from .schauder import (EllipticityError, ManufacturedCase, VariableCoefficient, bootstrap_sweep,
                       run_constant_case, run_variable_case)

__version__ = "0.1.0"

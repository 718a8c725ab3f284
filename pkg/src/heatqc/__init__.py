"""Heat-kernel quasiconformal extension of weights and Carleson diagnostics."""

__version__ = "0.1.0"

from .errors import (ConfigError, DomainError, NonDoublingSuspected, NonQuasiconformalSample,  # noqa: E402
                     SingularityError, ToleranceNotMet, ZeroMeanRequired)
from .kernels import KERNELS, Kernel, ScaleKind, get_kernel, kernel_eval, kernel_moments  # noqa: E402
from .quadrature import QuadratureConfig, QuadratureResult, convolve_grid, convolve_point  # noqa: E402
from .weights import WeightSpec, catalog, lookup, resolve, weight_eval, weight_primitive  # noqa: E402
from .extension import beltrami, derivative_matrix, extension_point, heat_solution  # noqa: E402
from .carleson import box_energy, carleson_scan, thm3_energy, thm5_energy, vanishing_profile  # noqa: E402
from .analysis import (ainfty_ratio, bmo_vmo_profile, jn_tail, lp_square_function,  # noqa: E402
                       maximal_function, mean_oscillation)

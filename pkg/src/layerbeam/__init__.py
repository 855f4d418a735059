"""layerbeam: paraxial beam propagation through randomly layered media.

The package simulates the regularized second-order envelope model driven by
a stationary Ornstein-Uhlenbeck medium, solves the limiting Ito model with
an exact split-step spectral scheme, and numerically certifies the
homogenization step connecting the two (stationary covariances, the
non-commuting eps->0 / delta->0 limits, and the coherent-field decay rate).
"""

__version__ = "0.1.0"

from .scales import ModelParams, PhysicalScales, derive_params, make_params, regime_report
from .noise import OUPath, ou_autocovariance_theory, sample_ou_path, sample_wiener_path
from .grid import (SpectralField, TransverseGrid, gaussian_beam, make_grid,
                   plane_wave, to_physical, to_spectral)
from .spde import (SpdeCoefficients, closed_form_solution, coherent_field,
                   spde_coefficients, spde_step)
from .fullmodel import (FullState, StabilityError, mode_coefficients, solve_full,
                        stability_limit, step_full)
from .homog import (GammaSystem, StationaryCovariance, build_gamma,
                    limit_noncommutativity_demo, stationary_covariance_closed_form,
                    stationary_covariance_numeric, verify_appendix_a)
from .analysis import (DecayReport, EnsembleStats, convergence_study,
                       decay_constant_theory, ensemble_full, ensemble_spde,
                       fit_decay, mu_expansion_check)

"""Neutral fractional stochastic evolution equations of order alpha in (1, 2).

Mittag-Leffler special functions, diagonal generators and their cosine/sine
families, Q-Wiener and Poisson noise, a mild-solution solver driven by
successive approximations with integral contractors, and the existence and
moment-stability criteria together with Monte Carlo checks of the latter.
"""
from .errors import (ConfigError, DegenerateDenominatorError, DivergenceError, FitDomainError,
                     IllPosedNeutralTermError, InapplicableCriterionError, NoRootError,
                     SingularExponentError, UnsupportedRegimeError)
from .grid import TimeGrid
from .specfun import MLParams, UnsupportedRangeError, gamma_fn, mittag_leffler, ml_array
from .spectral import (FamilyBounds, SpectralGenerator, estimate_exponential_bounds,
                       estimate_family_bounds, estimate_smoothing_constant, frac_power_norm)
from .noise import (JumpSpec, NoiseRealization, QWienerSpec, coarsen, compensated_integral,
                    path_rng, sample_noise, sample_poisson, sample_wiener)
from .model import (CoefficientSet, ContractorSet, ProblemSpec, StatedConstants, Trajectory,
                    damped_problem, example_problem, load_problem, problem_from_dict,
                    problem_to_dict, save_problem)
from .solver import (direct_scheme, mild_map, picard_initial, picard_residual, picard_solve,
                     picard_update, regularity_solve, run_ensemble, solve_path,
                     uniqueness_gap, write_residual_csv, write_trajectory_csv)
from .conditions import check_contractor_conditions
from .stability import (InequalityParams, MCConfig, criteria_report, decay_root,
                        estimate_moment, existence_criterion, fit_decay, n_epsilon,
                        resolve_constants, stability_criterion, verify_stability)

__version__ = "0.1.0"

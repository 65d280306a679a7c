"""Credible ellipsoids for linear functionals in Gaussian-noise PDE regression.

Spectral priors on the Dirichlet-Laplacian eigenbasis, Darcy and
Schrodinger forward maps, information matrices and their renormalisation,
pCN posterior sampling, chi-square calibrated ellipsoids and a coverage
harness.
"""
__version__ = "0.1.0"

from .spectral import (Basis, ConfigurationError, Grid, SpectralField, bump, eigenpair,
                       project, projection_error, sobolev_norm)
from .forward import (ForwardModel, PdeSolution, SolverError, forward_eval, linearize,
                      solve_darcy, solve_schrodinger)
from .fisher import (DegenerateFunctionalError, FunctionalSet, InformationBundle,
                     functional_jacobian, information_bundle, information_matrix,
                     renormalize, representers, stability_curve)
from .posterior import (AdaptationError, Dataset, FunctionalPosterior, PosteriorSamples,
                        PriorSpec, conjugate_draws, conjugate_oracle, functional_moments,
                        log_likelihood, prior_sample, run_pcn)
from .credsets import (CredibleEllipsoid, CredibleInterval, chi2_cdf, chi2_quantile,
                       contains, diameter, ellipsoid_case1, ellipsoid_case2, interval_case2)
from .config import ConfigError, ExperimentConfig, PsiSpec
from .harness import (bvm_diagnostics, centering_statistic, condition_audit, coverage_study,
                      diameter_scaling_study, generate_dataset)

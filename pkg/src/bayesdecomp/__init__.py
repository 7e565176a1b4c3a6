"""Bayesian decomposition of signals into piecewise-constant and smooth
components, with wavelet-based priors, a gradient-hierarchical Gaussian prior,
and NUTS / RTO / Gibbs posterior samplers."""

from .core import (BayesdecompError, DecompProblem, Grid, RngHandle, Signal,
                   add_noise, load_signal, make_grid, save_signal)
from .diagnostics import (ChainStats, autocorrelation, chain_stats,
                          credible_interval, cumulative_mean,
                          effective_sample_size, relative_error)
from .experiment import ExperimentConfig, compare, diagnose, run_experiment
from .linalg import CglsResult, LinearBlock, StackedLsqProblem, cgls_solve
from .operators import (ConvOperator, GradOperator, conv_apply, grad_adjoint,
                        grad_apply, make_gaussian_kernel)
from .phantoms import PhantomSpec, generate_phantom
from .priors import (BesovParams, HierGaussState, ScalingDiagonal,
                     besov_neglog_density, besov_neglog_grad,
                     generalized_gaussian_variance, hier_gauss_neglog,
                     sample_besov_prior, sample_generalized_gaussian,
                     scaling_diagonal)
from .samplers import (ChainStore, GaussianTarget, GibbsConfig,
                       HierGaussHypers, SingleBesovPosterior, TwoBesovHypers,
                       TwoBesovPosterior, gibbs_gaussian_besov,
                       gibbs_two_besov, nuts_sample, recenter_components,
                       rto_sample_g, rto_sample_h, sample_hyper_lambda_diag,
                       sample_hyper_lambda_h)
from .wavelet import (CoeffVector, WaveletBasis, daubechies_filters,
                      dwt_forward, dwt_forward_2d, dwt_inverse,
                      dwt_inverse_2d, wavelet_matrix)

__version__ = "0.1.0"

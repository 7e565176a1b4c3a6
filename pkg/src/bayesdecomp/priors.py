"""Wavelet-domain smoothness priors (scaled generalized-Gaussian coefficients)
and the gradient-domain hierarchical Gaussian prior terms.

All densities are negative logs up to an additive constant; normalizing
constants are never needed by the samplers and are omitted throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Grid, RngHandle, Signal
from .operators import forward_diff
from .wavelet import WaveletBasis, forward_values, inverse_values, level_blocks


@dataclass(frozen=True)
class BesovParams:
    """Smoothness prior parameters: exp(-lam * ||S W f||_p^p) on a grid.

    s controls smoothness, p the coefficient tail (p=1 Laplace, p=2 Gaussian),
    lam the overall strength; basis supplies W.
    """

    s: float
    p: float
    lam: float
    basis: WaveletBasis
    grid: Grid

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError("s must be > 0")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.lam <= 0:
            raise ValueError("lam must be > 0")

    @property
    def scale_exponent(self) -> float:
        return self.s + self.grid.d / 2.0 - self.grid.d / self.p


@dataclass(frozen=True)
class ScalingDiagonal:
    """Diagonal of the dyadic scaling matrix S (positive, length n)."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).copy()
        if np.any(vals <= 0):
            raise ValueError("scaling diagonal must be strictly positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def scaling_values(grid: Grid, s: float, p: float) -> np.ndarray:
    """Raw scaling diagonal: 1 for the scaling coefficient, 2^(j*(s+d/2-d/p))
    on the level-j detail block."""
    expo = s + grid.d / 2.0 - grid.d / p
    diag = np.empty(grid.n)
    diag[0] = 1.0
    for j, blk in level_blocks(grid):
        diag[blk] = 2.0 ** (j * expo)
    return diag


def scaling_diagonal(params: BesovParams) -> ScalingDiagonal:
    return ScalingDiagonal(values=scaling_values(params.grid, params.s, params.p))


def besov_neglog_density(f: Signal, params: BesovParams) -> float:
    """lam * sum_i |S_ii (W f)_i|^p  (negative log density, no constant)."""
    if f.grid != params.grid:
        raise ValueError("signal grid does not match prior grid")
    c = forward_values(f.values, params.basis, params.grid)
    sc = scaling_values(params.grid, params.s, params.p) * c
    return float(params.lam * np.sum(np.abs(sc) ** params.p))


def besov_neglog_grad(f: Signal, params: BesovParams) -> np.ndarray:
    """Gradient of :func:`besov_neglog_density` w.r.t. f.

    d/df [lam ||S W f||_p^p] = lam * p * W^T S (|S W f|^(p-1) sign(S W f)),
    with sign(0) = 0 as the subgradient choice at p = 1.
    """
    if f.grid != params.grid:
        raise ValueError("signal grid does not match prior grid")
    diag = scaling_values(params.grid, params.s, params.p)
    c = forward_values(f.values, params.basis, params.grid)
    sc = diag * c
    inner = params.lam * params.p * diag * np.abs(sc) ** (params.p - 1.0) * np.sign(sc)
    return inverse_values(inner, params.basis, params.grid)


def generalized_gaussian_variance(p: float) -> float:
    """Variance of the density c_p^-1 exp(-|x|^p): Gamma(3/p) / Gamma(1/p)."""
    return math.gamma(3.0 / p) / math.gamma(1.0 / p)


def sample_generalized_gaussian(
    p: float, rng: RngHandle | np.random.Generator, size: Optional[int] = None
):
    """Draw from exp(-|x|^p) via |X|^p ~ Gamma(1/p, 1) with a random sign."""
    if p < 1:
        raise ValueError("p must be >= 1")
    gen = rng.generator() if isinstance(rng, RngHandle) else rng
    shape = () if size is None else (size,)
    g = gen.gamma(1.0 / p, 1.0, size=shape)
    sign = np.where(gen.random(shape) < 0.5, -1.0, 1.0)
    x = sign * g ** (1.0 / p)
    return float(x) if size is None else x


def sample_besov_prior(
    params: BesovParams, rng: RngHandle | np.random.Generator
) -> Signal:
    """Prior draw f = W^T S^-1 xi * lam^(-1/p), xi i.i.d. generalized Gaussian.

    Coefficient i then has density prop. to exp(-lam |S_ii c_i|^p), matching
    :func:`besov_neglog_density`.
    """
    gen = rng.generator() if isinstance(rng, RngHandle) else rng
    xi = sample_generalized_gaussian(params.p, gen, size=params.grid.n)
    diag = scaling_values(params.grid, params.s, params.p)
    coeffs = params.lam ** (-1.0 / params.p) * xi / diag
    return Signal(grid=params.grid, values=inverse_values(coeffs, params.basis, params.grid))


@dataclass(frozen=True)
class HierGaussState:
    """Current gradient-variance state: Lambda diagonal plus its IG hyperprior."""

    lambda_diag: np.ndarray
    alpha1: float
    beta1: float

    def __post_init__(self):
        vals = np.asarray(self.lambda_diag, dtype=np.float64).copy()
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValueError("lambda_diag entries must be finite and > 0")
        vals.setflags(write=False)
        object.__setattr__(self, "lambda_diag", vals)
        if self.alpha1 <= 0 or self.beta1 <= 0:
            raise ValueError("alpha1 and beta1 must be > 0")


def hier_gauss_neglog(g: Signal, state: HierGaussState) -> float:
    """(1/2) sum_i (D_d g)_i^2 / Lambda_ii."""
    dg = forward_diff(g.values, g.grid.d)
    if dg.size != state.lambda_diag.size:
        raise ValueError("lambda_diag length must equal d*n")
    return float(0.5 * np.sum(dg * dg / state.lambda_diag))

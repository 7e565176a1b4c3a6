"""Posterior samplers: NUTS for fixed-strength wavelet-prior posteriors, RTO
draws of Gaussian conditionals via perturbed least squares, and the two Gibbs
schemes (gradient-hierarchical Gaussian + smooth prior; two hierarchical
wavelet priors).

All samplers are driven by a single numpy Generator owned by the call, so a
(seed, stream) pair reproduces chains bit-for-bit.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from .core import DecompProblem, Grid, RngHandle, Signal
from .linalg import CglsResult, LinearBlock, StackedLsqProblem, cgls_solve
from .operators import ConvOperator, forward_diff, forward_diff_adjoint, make_gaussian_kernel
from .priors import BesovParams, scaling_values
from .wavelet import forward_values, inverse_values, wavelet_matrix

# Below this size the scaled transform S W is materialized once as a dense
# matrix so sampler hot loops run on BLAS matvecs; above it the structured
# fast transforms are used.
_DENSE_LIMIT = 1024


def _as_generator(rng: Union[RngHandle, np.random.Generator]) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngHandle) else rng


class _ScaledTransform:
    """Apply/adjoint pair for S W (scaling diagonal times wavelet analysis)."""

    def __init__(self, params: BesovParams):
        self.params = params
        self.grid = params.grid
        self.diag = scaling_values(params.grid, params.s, params.p)
        if params.grid.n <= _DENSE_LIMIT:
            w = wavelet_matrix(params.basis, params.grid)
            self._sw = self.diag[:, None] * w
            self._swt = np.ascontiguousarray(self._sw.T)
        else:
            self._sw = None
            self._swt = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self._sw is not None:
            return self._sw @ x
        return self.diag * forward_values(x, self.params.basis, self.grid)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        if self._swt is not None:
            return self._swt @ y
        return inverse_values(self.diag * y, self.params.basis, self.grid)


# --- chain storage -----------------------------------------------------------

_FMT = "%.17g"


@dataclass
class ChainStore:
    """Thinned per-variable sample history plus run metadata.

    ``samples`` maps variable name to an array of shape (kept, dim) (or
    (kept,) for scalar hyperparameters); ``meta`` carries config, seed,
    counters and wall time.
    """

    samples: dict[str, np.ndarray]
    meta: dict

    def save(self, outdir: str | Path) -> None:
        """One text file per variable (rows = thinned iterations, comma-
        separated coordinates) plus a manifest."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        shapes = {}
        for name, arr in self.samples.items():
            mat = np.atleast_2d(arr.T).T if arr.ndim == 1 else arr
            lines = [",".join(_FMT % v for v in row) for row in mat]
            (outdir / f"chain_{name}.txt").write_text("\n".join(lines) + "\n")
            shapes[name] = list(arr.shape)
        manifest = {"variables": shapes, "meta": _yaml_safe(self.meta)}
        (outdir / "chains.manifest.yaml").write_text(
            yaml.safe_dump(manifest, sort_keys=True)
        )

    @staticmethod
    def load(outdir: str | Path) -> "ChainStore":
        outdir = Path(outdir)
        manifest = yaml.safe_load((outdir / "chains.manifest.yaml").read_text())
        samples = {}
        for name, shape in manifest["variables"].items():
            rows = (outdir / f"chain_{name}.txt").read_text().splitlines()
            arr = np.array([[float(x) for x in r.split(",")] for r in rows])
            samples[name] = arr.reshape(shape)
        return ChainStore(samples=samples, meta=manifest["meta"])


def _yaml_safe(obj):
    """Recursively coerce numpy scalars/arrays so yaml.safe_dump accepts them."""
    if isinstance(obj, dict):
        return {k: _yaml_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_yaml_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _kept_count(n_samples: int, burn_in: int, thin: int) -> int:
    return (n_samples - burn_in) // thin


def _is_kept(i: int, burn_in: int, thin: int) -> bool:
    return i > burn_in and (i - burn_in) % thin == 0


# --- posteriors for NUTS -----------------------------------------------------


class TwoBesovPosterior:
    """Fixed-strength posterior on the stacked state [g, h] (dimension 2n):

    neglog(g, h) = ||A(g+h) - y||^2 / (2 sigma^2)
                   + lam_g ||S_g W_g g||_{p_g}^{p_g}
                   + lam_h ||S_h W_h h||_{p_h}^{p_h}
    """

    def __init__(
        self,
        problem: DecompProblem,
        params_g: BesovParams,
        params_h: BesovParams,
        conv: Optional[ConvOperator] = None,
    ):
        if params_g.grid != problem.grid or params_h.grid != problem.grid:
            raise ValueError("prior grids must match the problem grid")
        self.problem = problem
        self.grid = problem.grid
        self.n = problem.grid.n
        self.dim = 2 * self.n
        self.conv = conv if conv is not None else make_gaussian_kernel(
            problem.grid, problem.kernel_sigma
        )
        self.params_g = params_g
        self.params_h = params_h
        self._tg = _ScaledTransform(params_g)
        self._th = _ScaledTransform(params_h)

    @property
    def components(self) -> dict[str, slice]:
        return {"g": slice(0, self.n), "h": slice(self.n, 2 * self.n)}

    def _prior_term(self, t: _ScaledTransform, x, p, lam):
        sc = t.apply(x)
        val = lam * np.sum(np.abs(sc) ** p)
        inner = lam * p * np.abs(sc) ** (p - 1.0) * np.sign(sc)
        return val, t.adjoint(inner)

    def neglog_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        g = x[: self.n]
        h = x[self.n:]
        r = self.conv.apply_values(g + h) - self.problem.data
        s2 = self.problem.noise_sigma ** 2
        like = float(r @ r) / (2.0 * s2)
        dlike = self.conv.adjoint_values(r) / s2
        vg, gg = self._prior_term(self._tg, g, self.params_g.p, self.params_g.lam)
        vh, gh = self._prior_term(self._th, h, self.params_h.p, self.params_h.lam)
        grad = np.concatenate([dlike + gg, dlike + gh])
        return like + vg + vh, grad

    def neglog(self, x: np.ndarray) -> float:
        return self.neglog_and_grad(x)[0]


class SingleBesovPosterior:
    """Fixed-strength posterior on f alone (one wavelet prior, dimension n)."""

    def __init__(
        self,
        problem: DecompProblem,
        params: BesovParams,
        conv: Optional[ConvOperator] = None,
    ):
        if params.grid != problem.grid:
            raise ValueError("prior grid must match the problem grid")
        self.problem = problem
        self.grid = problem.grid
        self.n = problem.grid.n
        self.dim = self.n
        self.conv = conv if conv is not None else make_gaussian_kernel(
            problem.grid, problem.kernel_sigma
        )
        self.params = params
        self._t = _ScaledTransform(params)

    @property
    def components(self) -> dict[str, slice]:
        return {"f": slice(0, self.n)}

    def neglog_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        r = self.conv.apply_values(x) - self.problem.data
        s2 = self.problem.noise_sigma ** 2
        like = float(r @ r) / (2.0 * s2)
        dlike = self.conv.adjoint_values(r) / s2
        sc = self._t.apply(x)
        p, lam = self.params.p, self.params.lam
        val = lam * np.sum(np.abs(sc) ** p)
        inner = lam * p * np.abs(sc) ** (p - 1.0) * np.sign(sc)
        return like + val, dlike + self._t.adjoint(inner)

    def neglog(self, x: np.ndarray) -> float:
        return self.neglog_and_grad(x)[0]


class GaussianTarget:
    """Multivariate Gaussian N(mu, cov) as a NUTS target (testing stub)."""

    def __init__(self, mu: np.ndarray, cov: np.ndarray):
        self.mu = np.asarray(mu, dtype=np.float64)
        self.prec = np.linalg.inv(np.atleast_2d(cov))
        self.dim = self.mu.size

    @property
    def components(self) -> dict[str, slice]:
        return {"x": slice(0, self.dim)}

    def neglog_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        d = x - self.mu
        pd = self.prec @ d
        return 0.5 * float(d @ pd), pd

    def neglog(self, x: np.ndarray) -> float:
        return self.neglog_and_grad(x)[0]


# --- NUTS --------------------------------------------------------------------

_DELTA_MAX = 1000.0


def _leapfrog(target, theta, r, grad, eps):
    r_half = r - 0.5 * eps * grad
    theta1 = theta + eps * r_half
    with np.errstate(over="ignore", invalid="ignore"):
        nl1, grad1 = target.neglog_and_grad(theta1)
    r1 = r_half - 0.5 * eps * grad1
    joint = -nl1 - 0.5 * float(r1 @ r1)
    if not np.isfinite(joint):
        joint = -np.inf
    return theta1, r1, grad1, nl1, joint


def _find_reasonable_epsilon(target, theta, grad, joint0, gen):
    eps = 1.0
    r0 = gen.standard_normal(theta.size)
    joint_init = joint0 - 0.5 * float(r0 @ r0)
    _, _, _, _, joint1 = _leapfrog(target, theta, r0, grad, eps)
    delta = joint1 - joint_init
    a = 1.0 if delta > np.log(0.5) else -1.0
    while a * (delta + np.log(2.0)) > 0.0:
        eps *= 2.0 ** a
        if eps > 1e7 or eps < 1e-12:
            break
        _, _, _, _, joint1 = _leapfrog(target, theta, r0, grad, eps)
        delta = joint1 - joint_init
    return eps


class _Tree:
    __slots__ = (
        "theta_minus", "r_minus", "grad_minus",
        "theta_plus", "r_plus", "grad_plus",
        "theta", "grad", "nl", "n", "s", "alpha", "n_alpha", "divergent",
    )


def _build_tree(target, theta, r, grad, log_u, v, j, eps, joint0, gen):
    t = _Tree()
    if j == 0:
        theta1, r1, grad1, nl1, joint = _leapfrog(target, theta, r, grad, v * eps)
        t.theta_minus = t.theta_plus = t.theta = theta1
        t.r_minus = t.r_plus = r1
        t.grad_minus = t.grad_plus = t.grad = grad1
        t.nl = nl1
        t.n = 1 if log_u <= joint else 0
        t.s = 1 if log_u < joint + _DELTA_MAX else 0
        t.divergent = t.s == 0
        t.alpha = min(1.0, float(np.exp(min(joint - joint0, 0.0))))
        t.n_alpha = 1
        return t
    left = _build_tree(target, theta, r, grad, log_u, v, j - 1, eps, joint0, gen)
    t.theta_minus, t.r_minus, t.grad_minus = left.theta_minus, left.r_minus, left.grad_minus
    t.theta_plus, t.r_plus, t.grad_plus = left.theta_plus, left.r_plus, left.grad_plus
    t.theta, t.grad, t.nl = left.theta, left.grad, left.nl
    t.n, t.s = left.n, left.s
    t.alpha, t.n_alpha = left.alpha, left.n_alpha
    t.divergent = left.divergent
    if left.s == 1:
        if v == -1:
            sub = _build_tree(target, left.theta_minus, left.r_minus,
                              left.grad_minus, log_u, v, j - 1, eps, joint0, gen)
            t.theta_minus, t.r_minus, t.grad_minus = sub.theta_minus, sub.r_minus, sub.grad_minus
        else:
            sub = _build_tree(target, left.theta_plus, left.r_plus,
                              left.grad_plus, log_u, v, j - 1, eps, joint0, gen)
            t.theta_plus, t.r_plus, t.grad_plus = sub.theta_plus, sub.r_plus, sub.grad_plus
        if sub.n > 0 and gen.random() < sub.n / max(t.n + sub.n, 1):
            t.theta, t.grad, t.nl = sub.theta, sub.grad, sub.nl
        span = t.theta_plus - t.theta_minus
        ok = (float(span @ t.r_minus) >= 0.0) and (float(span @ t.r_plus) >= 0.0)
        t.s = sub.s * (1 if ok else 0)
        t.n += sub.n
        t.alpha += sub.alpha
        t.n_alpha += sub.n_alpha
        t.divergent = t.divergent or sub.divergent
    return t


def nuts_sample(
    posterior,
    n_samples: int,
    burn_in: int,
    rng: Union[RngHandle, np.random.Generator],
    *,
    thin: int = 1,
    max_tree_depth: int = 10,
    target_accept: float = 0.8,
    init: Optional[np.ndarray] = None,
) -> ChainStore:
    """No-U-Turn sampling of ``posterior`` (needs neglog_and_grad).

    Step size is tuned by dual averaging toward ``target_accept`` during
    burn-in only, then frozen; trajectory length uses the doubling / u-turn
    procedure with the given maximum tree depth and an identity mass matrix.
    """
    if n_samples <= burn_in:
        raise ValueError("n_samples must exceed burn_in")
    gen = _as_generator(rng)
    dim = posterior.dim
    theta = np.zeros(dim) if init is None else np.asarray(init, dtype=np.float64).copy()
    nl, grad = posterior.neglog_and_grad(theta)
    if not np.isfinite(nl):
        raise ValueError("posterior is not finite at the initial state")

    eps = _find_reasonable_epsilon(posterior, theta, grad, -nl, gen)
    mu = np.log(10.0 * eps)
    eps_bar, h_bar = 1.0, 0.0
    gamma, t0, kappa = 0.05, 10.0, 0.75

    kept = _kept_count(n_samples, burn_in, thin)
    comps = posterior.components
    out = {name: np.empty((kept, sl.stop - sl.start)) for name, sl in comps.items()}
    divergences = 0
    depth_total = 0
    accept_total = 0.0
    k = 0
    t_start = time.perf_counter()
    for m in range(1, n_samples + 1):
        r0 = gen.standard_normal(dim)
        joint0 = -nl - 0.5 * float(r0 @ r0)
        log_u = joint0 - gen.exponential(1.0)
        theta_minus = theta_plus = theta
        r_minus = r_plus = r0
        grad_minus = grad_plus = grad
        n_acc, s, j = 1, 1, 0
        alpha, n_alpha = 0.0, 1
        while s == 1 and j < max_tree_depth:
            v = 1 if gen.random() < 0.5 else -1
            if v == -1:
                tree = _build_tree(posterior, theta_minus, r_minus, grad_minus,
                                   log_u, v, j, eps, joint0, gen)
                theta_minus, r_minus, grad_minus = tree.theta_minus, tree.r_minus, tree.grad_minus
            else:
                tree = _build_tree(posterior, theta_plus, r_plus, grad_plus,
                                   log_u, v, j, eps, joint0, gen)
                theta_plus, r_plus, grad_plus = tree.theta_plus, tree.r_plus, tree.grad_plus
            if tree.s == 1 and gen.random() < min(1.0, tree.n / n_acc):
                theta = tree.theta
                grad = tree.grad
                nl = tree.nl
            n_acc += tree.n
            span = theta_plus - theta_minus
            ok = (float(span @ r_minus) >= 0.0) and (float(span @ r_plus) >= 0.0)
            s = tree.s * (1 if ok else 0)
            alpha, n_alpha = tree.alpha, tree.n_alpha
            if tree.divergent:
                divergences += 1
            j += 1
        depth_total += j
        accept_total += alpha / n_alpha
        # dual averaging (burn-in only)
        if m <= burn_in:
            frac = 1.0 / (m + t0)
            h_bar = (1.0 - frac) * h_bar + frac * (target_accept - alpha / n_alpha)
            log_eps = mu - np.sqrt(m) / gamma * h_bar
            eta = m ** (-kappa)
            eps_bar = float(np.exp(eta * log_eps + (1.0 - eta) * np.log(eps_bar)))
            eps = float(np.exp(log_eps))
        else:
            eps = eps_bar
        if _is_kept(m, burn_in, thin):
            for name, sl in comps.items():
                out[name][k] = theta[sl]
            k += 1
    wall = time.perf_counter() - t_start
    meta = {
        "sampler": "nuts",
        "n_samples": n_samples, "burn_in": burn_in, "thin": thin,
        "max_tree_depth": max_tree_depth, "target_accept": target_accept,
        "step_size": float(eps_bar),
        "divergences": int(divergences),
        "mean_tree_depth": depth_total / n_samples,
        "mean_accept": accept_total / n_samples,
        "wall_time_s": wall,
    }
    return ChainStore(samples={n: a for n, a in out.items()}, meta=meta)


# --- RTO draws of Gaussian conditionals ---------------------------------------


def _likelihood_block(conv: ConvOperator, sigma: float, m: int) -> LinearBlock:
    return LinearBlock(apply=conv.apply_values, adjoint=conv.adjoint_values,
                       out_dim=m, scale=1.0 / sigma)


def _grad_prior_block(lambda_diag: np.ndarray, grid: Grid) -> LinearBlock:
    w = 1.0 / np.sqrt(lambda_diag)
    d = grid.d
    return LinearBlock(
        apply=lambda x: w * forward_diff(x, d),
        adjoint=lambda v: forward_diff_adjoint(w * v, d),
        out_dim=d * grid.n,
        scale=1.0,
    )


def _besov_prior_block(t: _ScaledTransform, weight: float) -> LinearBlock:
    return LinearBlock(apply=t.apply, adjoint=t.adjoint,
                       out_dim=t.grid.n, scale=float(np.sqrt(weight)))


def _rto_draw(
    blocks: list[LinearBlock],
    rhs0: np.ndarray,
    n: int,
    gen: Optional[np.random.Generator],
    perturbation: Optional[np.ndarray],
    tol: float,
    max_iter: int,
    x0: Optional[np.ndarray] = None,
) -> CglsResult:
    if perturbation is None:
        perturbation = gen.standard_normal(rhs0.size)
    prob = StackedLsqProblem(blocks=blocks, rhs=rhs0 + perturbation, n=n)
    return cgls_solve(prob, tol=tol, max_iter=max_iter, x0=x0)


def rto_sample_g(
    h: Signal,
    lambda_diag: np.ndarray,
    problem: DecompProblem,
    *,
    rng: Optional[Union[RngHandle, np.random.Generator]] = None,
    perturbation: Optional[np.ndarray] = None,
    conv: Optional[ConvOperator] = None,
    cgls_tol: float = 1e-8,
    cgls_max_iter: int = 200,
) -> tuple[Signal, CglsResult]:
    """Draw the rough component given (h, Lambda) by solving the randomly
    perturbed least-squares stack [A/sigma; Lambda^{-1/2} D] g = [(y-Ah)/sigma; 0].

    With ``perturbation=None`` a standard normal perturbation is drawn from
    ``rng``; passing zeros returns the conditional mean.  CGLS non-convergence
    is reported through the returned result, never silently dropped.
    """
    grid = problem.grid
    lam = np.asarray(lambda_diag, dtype=np.float64)
    if np.any(lam <= 0):
        raise ValueError("lambda_diag must be strictly positive")
    conv = conv if conv is not None else make_gaussian_kernel(grid, problem.kernel_sigma)
    sigma = problem.noise_sigma
    m = problem.data.size
    blocks = [_likelihood_block(conv, sigma, m), _grad_prior_block(lam, grid)]
    rhs0 = np.concatenate([
        (problem.data - conv.apply_values(h.values)) / sigma,
        np.zeros(grid.d * grid.n),
    ])
    gen = _as_generator(rng) if rng is not None else None
    res = _rto_draw(blocks, rhs0, grid.n, gen, perturbation, cgls_tol, cgls_max_iter)
    return Signal(grid=grid, values=res.x), res


def rto_sample_h(
    g: Signal,
    lambda_h: float,
    problem: DecompProblem,
    params_h: BesovParams,
    *,
    rng: Optional[Union[RngHandle, np.random.Generator]] = None,
    perturbation: Optional[np.ndarray] = None,
    conv: Optional[ConvOperator] = None,
    prior_weight: Optional[float] = None,
    cgls_tol: float = 1e-8,
    cgls_max_iter: int = 200,
) -> tuple[Signal, CglsResult]:
    """Draw the smooth component given (g, lambda_h) from the stack
    [A/sigma; sqrt(lambda_h) S_h W_h] h = [(y-Ag)/sigma; 0] + noise.

    ``prior_weight`` overrides the quadratic-form weight in front of
    ||S W h||^2 (the hierarchical wavelet-pair model uses 2*lambda because its
    prior is exp(-lambda ||.||^2) rather than exp(-lambda/2 ||.||^2)).
    """
    if lambda_h <= 0:
        raise ValueError("lambda_h must be > 0")
    grid = problem.grid
    conv = conv if conv is not None else make_gaussian_kernel(grid, problem.kernel_sigma)
    t = _ScaledTransform(params_h)
    weight = lambda_h if prior_weight is None else prior_weight
    sigma = problem.noise_sigma
    m = problem.data.size
    blocks = [_likelihood_block(conv, sigma, m), _besov_prior_block(t, weight)]
    rhs0 = np.concatenate([
        (problem.data - conv.apply_values(g.values)) / sigma,
        np.zeros(grid.n),
    ])
    gen = _as_generator(rng) if rng is not None else None
    res = _rto_draw(blocks, rhs0, grid.n, gen, perturbation, cgls_tol, cgls_max_iter)
    return Signal(grid=grid, values=res.x), res


# --- conjugate hyperparameter updates -----------------------------------------


def _sample_lambda_diag(dg: np.ndarray, alpha1: float, beta1: float,
                        gen: np.random.Generator) -> np.ndarray:
    rates = beta1 + dg * dg
    return 1.0 / gen.gamma(alpha1 + 0.5, 1.0 / rates)


def sample_hyper_lambda_diag(
    g: Signal, alpha1: float, beta1: float,
    rng: Union[RngHandle, np.random.Generator],
) -> np.ndarray:
    """Lambda_ii ~ InvGamma(alpha1 + 1/2, beta1 + (D_d g)_i^2), independently."""
    if alpha1 <= 0 or beta1 <= 0:
        raise ValueError("alpha1 and beta1 must be > 0")
    gen = _as_generator(rng)
    dg = forward_diff(g.values, g.grid.d)
    return _sample_lambda_diag(dg, alpha1, beta1, gen)


def sample_hyper_lambda_h(
    h: Signal, alpha2: float, beta2: float, params_h: BesovParams,
    rng: Union[RngHandle, np.random.Generator],
) -> float:
    """lambda_h ~ Gamma(n/2 + alpha2, rate beta2 + ||S_h W_h h||^2 / 2)."""
    if alpha2 <= 0 or beta2 <= 0:
        raise ValueError("alpha2 and beta2 must be > 0")
    gen = _as_generator(rng)
    t = _ScaledTransform(params_h)
    sc = t.apply(h.values)
    rate = beta2 + 0.5 * float(sc @ sc)
    return float(gen.gamma(h.grid.n / 2.0 + alpha2, 1.0 / rate))


def recenter_components(g: Signal, h: Signal) -> tuple[Signal, Signal]:
    """Shift the rough component to zero mean, moving its mean into the smooth
    one: (g - mean(g), h + mean(g)); the sum is preserved."""
    if g.grid != h.grid:
        raise ValueError("components live on different grids")
    m = float(np.mean(g.values))
    return (
        Signal(grid=g.grid, values=g.values - m),
        Signal(grid=h.grid, values=h.values + m),
    )


# --- Gibbs samplers ------------------------------------------------------------


@dataclass(frozen=True)
class HierGaussHypers:
    """IG(alpha1, beta1) on gradient variances; Gamma(alpha2, beta2) on lambda_h."""

    alpha1: float
    beta1: float
    alpha2: float
    beta2: float


@dataclass(frozen=True)
class TwoBesovHypers:
    """Gamma(a1, b1) on lambda_g and Gamma(a2, b2) on lambda_h."""

    a1: float
    b1: float
    a2: float
    b2: float


@dataclass(frozen=True)
class GibbsConfig:
    n_samples: int
    burn_in: int
    thin: int
    seed: int
    hypers: Union[HierGaussHypers, TwoBesovHypers]
    cgls_tol: float = 1e-8
    cgls_max_iter: int = 200
    fix_hypers: bool = False

    def __post_init__(self):
        if not (0 <= self.burn_in < self.n_samples):
            raise ValueError("need 0 <= burn_in < n_samples")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")


class _RtoConditional:
    """One Gaussian conditional's RTO machinery inside a Gibbs loop.

    The stack is [A/sigma; prior rows].  At small n the whole stacked matrix
    is kept dense and the prior rows are rescaled in place each draw (same
    CGLS iteration, BLAS applies); at large n the matrix-free blocks are used.
    """

    def __init__(self, conv: ConvOperator, sigma: float, grid: Grid,
                 prior_rows: int, prior_base: Optional[np.ndarray]):
        self.conv = conv
        self.sigma = sigma
        self.grid = grid
        self.n = grid.n
        self.m = grid.n
        self.prior_rows = prior_rows
        self.like = _likelihood_block(conv, sigma, self.m)
        self.dense = prior_base is not None
        if self.dense:
            self._base = prior_base  # unscaled prior rows (prior_rows, n)
            self._mat = np.empty((self.m + prior_rows, self.n))
            self._mat[: self.m] = conv.apply_values(np.eye(self.n)).T / sigma
            self._block = LinearBlock(
                apply=lambda x: self._mat @ x,
                adjoint=lambda y: self._mat.T @ y,
                out_dim=self.m + prior_rows,
            )

    def draw(self, other_component: np.ndarray, data: np.ndarray,
             row_scale: np.ndarray | float, blocks_fallback,
             gen: np.random.Generator, tol: float, max_iter: int) -> CglsResult:
        rhs0 = np.empty(self.m + self.prior_rows)
        rhs0[: self.m] = (data - self.conv.apply_values(other_component)) / self.sigma
        rhs0[self.m:] = 0.0
        if self.dense:
            scale = np.asarray(row_scale)
            np.multiply(scale[:, None] if scale.ndim else scale, self._base,
                        out=self._mat[self.m:])
            blocks = [self._block]
        else:
            blocks = blocks_fallback()
        return _rto_draw(blocks, rhs0, self.n, gen, None, tol, max_iter)


def _dense_grad_matrix(grid: Grid) -> np.ndarray:
    """Dense D_d (d*n, n), built column-by-column from forward_diff."""
    n = grid.n
    cols = np.empty((grid.d * n, n))
    e = np.zeros(n)
    for i in range(n):
        e[i] = 1.0
        cols[:, i] = forward_diff(e, grid.d)
        e[i] = 0.0
    return cols


def gibbs_gaussian_besov(
    problem: DecompProblem,
    params_h: BesovParams,
    config: GibbsConfig,
    rng: Union[RngHandle, np.random.Generator],
) -> ChainStore:
    """Gibbs chain for the gradient-hierarchical model: cycle
    g (RTO) -> h (RTO) -> Lambda (inverse gamma) -> lambda_h (gamma).

    Stored g/h samples are recentered (zero-mean g); the chain itself evolves
    on the raw states.  Initial state: g = h = 0, Lambda = 1, lambda_h = 1.
    """
    hyp = config.hypers
    if not isinstance(hyp, HierGaussHypers):
        raise TypeError("gibbs_gaussian_besov needs HierGaussHypers")
    grid = problem.grid
    n, d = grid.n, grid.d
    gen = _as_generator(rng)
    conv = make_gaussian_kernel(grid, problem.kernel_sigma)
    t_h = _ScaledTransform(params_h)
    sigma = problem.noise_sigma
    dense = n <= _DENSE_LIMIT
    cond_g = _RtoConditional(conv, sigma, grid, d * n,
                             _dense_grad_matrix(grid) if dense else None)
    cond_h = _RtoConditional(conv, sigma, grid, n,
                             t_h._sw if dense else None)

    g = np.zeros(n)
    h = np.zeros(n)
    lam_diag = np.ones(d * n)
    lam_h = 1.0

    kept = _kept_count(config.n_samples, config.burn_in, config.thin)
    out_g = np.empty((kept, n))
    out_h = np.empty((kept, n))
    out_lam = np.empty((kept, d * n))
    out_lam_h = np.empty(kept)
    nonconverged = 0
    k = 0
    t_start = time.perf_counter()
    for i in range(1, config.n_samples + 1):
        res = cond_g.draw(
            h, problem.data, 1.0 / np.sqrt(lam_diag),
            lambda: [cond_g.like, _grad_prior_block(lam_diag, grid)],
            gen, config.cgls_tol, config.cgls_max_iter,
        )
        g = res.x
        nonconverged += 0 if res.converged else 1

        res = cond_h.draw(
            g, problem.data, np.sqrt(lam_h),
            lambda: [cond_h.like, _besov_prior_block(t_h, lam_h)],
            gen, config.cgls_tol, config.cgls_max_iter,
        )
        h = res.x
        nonconverged += 0 if res.converged else 1

        if not config.fix_hypers:
            lam_diag = _sample_lambda_diag(forward_diff(g, d), hyp.alpha1,
                                           hyp.beta1, gen)
            sc = t_h.apply(h)
            lam_h = float(gen.gamma(n / 2.0 + hyp.alpha2,
                                    1.0 / (hyp.beta2 + 0.5 * float(sc @ sc))))

        if _is_kept(i, config.burn_in, config.thin):
            mg = g.mean()
            out_g[k] = g - mg
            out_h[k] = h + mg
            out_lam[k] = lam_diag
            out_lam_h[k] = lam_h
            k += 1
        if not np.all(np.isfinite(g)) or not np.all(np.isfinite(h)):
            raise FloatingPointError(f"non-finite state at iteration {i}")
    wall = time.perf_counter() - t_start
    meta = {
        "sampler": "gibbs_gaussian_besov",
        "config": _yaml_safe(asdict(config)),
        "init": {"g": 0.0, "h": 0.0, "lambda_diag": 1.0, "lambda_h": 1.0},
        "recentered": True,
        "cgls_nonconverged": int(nonconverged),
        "wall_time_s": wall,
    }
    return ChainStore(
        samples={"g": out_g, "h": out_h, "lambda_diag": out_lam,
                 "lambda_h": out_lam_h},
        meta=meta,
    )


def gibbs_two_besov(
    problem: DecompProblem,
    params_g: BesovParams,
    params_h: BesovParams,
    config: GibbsConfig,
    rng: Union[RngHandle, np.random.Generator],
) -> ChainStore:
    """Gibbs chain for the hierarchical wavelet-pair model (both p = 2):
    g (RTO) -> h (RTO) -> lambda_g (gamma) -> lambda_h (gamma).

    The component conditionals carry the prior as exp(-lambda ||S W x||^2),
    so the RTO prior blocks are weighted by 2*lambda.
    """
    hyp = config.hypers
    if not isinstance(hyp, TwoBesovHypers):
        raise TypeError("gibbs_two_besov needs TwoBesovHypers")
    if params_g.p != 2 or params_h.p != 2:
        raise ValueError("the hierarchical wavelet-pair sampler requires p = 2")
    grid = problem.grid
    n = grid.n
    gen = _as_generator(rng)
    conv = make_gaussian_kernel(grid, problem.kernel_sigma)
    t_g = _ScaledTransform(params_g)
    t_h = _ScaledTransform(params_h)
    sigma = problem.noise_sigma
    dense = n <= _DENSE_LIMIT
    cond_g = _RtoConditional(conv, sigma, grid, n, t_g._sw if dense else None)
    cond_h = _RtoConditional(conv, sigma, grid, n, t_h._sw if dense else None)

    g = np.zeros(n)
    h = np.zeros(n)
    lam_g = 1.0
    lam_h = 1.0

    kept = _kept_count(config.n_samples, config.burn_in, config.thin)
    out_g = np.empty((kept, n))
    out_h = np.empty((kept, n))
    out_lam_g = np.empty(kept)
    out_lam_h = np.empty(kept)
    nonconverged = 0
    k = 0
    t_start = time.perf_counter()
    for i in range(1, config.n_samples + 1):
        res = cond_g.draw(
            h, problem.data, np.sqrt(2.0 * lam_g),
            lambda: [cond_g.like, _besov_prior_block(t_g, 2.0 * lam_g)],
            gen, config.cgls_tol, config.cgls_max_iter,
        )
        g = res.x
        nonconverged += 0 if res.converged else 1

        res = cond_h.draw(
            g, problem.data, np.sqrt(2.0 * lam_h),
            lambda: [cond_h.like, _besov_prior_block(t_h, 2.0 * lam_h)],
            gen, config.cgls_tol, config.cgls_max_iter,
        )
        h = res.x
        nonconverged += 0 if res.converged else 1

        if not config.fix_hypers:
            scg = t_g.apply(g)
            sch = t_h.apply(h)
            lam_g = float(gen.gamma(hyp.a1 + n / 2.0,
                                    1.0 / (hyp.b1 + float(scg @ scg))))
            lam_h = float(gen.gamma(hyp.a2 + n / 2.0,
                                    1.0 / (hyp.b2 + float(sch @ sch))))

        if _is_kept(i, config.burn_in, config.thin):
            out_g[k] = g
            out_h[k] = h
            out_lam_g[k] = lam_g
            out_lam_h[k] = lam_h
            k += 1
        if not np.all(np.isfinite(g)) or not np.all(np.isfinite(h)):
            raise FloatingPointError(f"non-finite state at iteration {i}")
    wall = time.perf_counter() - t_start
    meta = {
        "sampler": "gibbs_two_besov",
        "config": _yaml_safe(asdict(config)),
        "init": {"g": 0.0, "h": 0.0, "lambda_g": 1.0, "lambda_h": 1.0},
        "recentered": False,
        "cgls_nonconverged": int(nonconverged),
        "wall_time_s": wall,
    }
    return ChainStore(
        samples={"g": out_g, "h": out_h, "lambda_g": out_lam_g,
                 "lambda_h": out_lam_h},
        meta=meta,
    )

"""Posterior summaries and MCMC quality metrics: ACF, ESS, credible intervals,
cumulative means, relative error."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Signal


def autocorrelation(chain: np.ndarray, max_lag: int) -> np.ndarray:
    """ACF rho(0..max_lag) with the biased covariance estimator
    c(k) = (1/N) sum_t (x_t - xbar)(x_{t+k} - xbar)."""
    x = np.asarray(chain, dtype=np.float64)
    n = x.size
    if not (1 <= max_lag < n):
        raise ValueError("need chain length > max_lag >= 1")
    xc = x - x.mean()
    c0 = float(xc @ xc) / n
    if c0 == 0.0:
        raise ValueError("constant chain has no autocorrelation (zero variance)")
    # biased estimator via FFT-free direct sums; max_lag is small in practice
    rho = np.empty(max_lag + 1)
    rho[0] = 1.0
    for k in range(1, max_lag + 1):
        rho[k] = float(xc[:-k] @ xc[k:]) / n / c0
    return rho


def effective_sample_size(chain: np.ndarray) -> float:
    """ESS = N / (1 + 2 sum_k rho(k)), truncated by Geyer's initial positive
    sequence (adjacent ACF pairs summed until a pair goes non-positive).

    A constant (zero-variance) chain reports ESS = N; callers that need the
    degeneracy distinction should check the variance (see chain_stats).
    """
    x = np.asarray(chain, dtype=np.float64)
    n = x.size
    if n < 100:
        raise ValueError("need chain length >= 100")
    xc = x - x.mean()
    c0 = float(xc @ xc) / n
    if c0 == 0.0:
        return float(n)
    tau = 0.0
    k = 0
    # pair (rho(2m), rho(2m+1)); rho(0) = 1
    max_lag = n - 1
    rho_prev = None
    while 2 * k + 1 <= max_lag:
        lag0, lag1 = 2 * k, 2 * k + 1
        r0 = 1.0 if lag0 == 0 else float(xc[:-lag0] @ xc[lag0:]) / n / c0
        r1 = float(xc[:-lag1] @ xc[lag1:]) / n / c0
        pair = r0 + r1
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        k += 1
    tau -= 1.0  # rho(0) was counted twice inside the pairs
    if tau < 1e-12:
        return float(n)
    return float(min(n, n / tau))


def credible_interval(
    samples: np.ndarray, level: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-coordinate empirical quantile interval at the given level.

    Quantiles use linear interpolation between order statistics.  Returns
    (lower, upper, width) arrays of length dim for samples of shape (N, dim).
    """
    if not (0.0 < level < 1.0):
        raise ValueError("level must be in (0, 1)")
    s = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if s.shape[0] < 100:
        raise ValueError("need at least 100 samples")
    lo_q = (1.0 - level) / 2.0
    hi_q = (1.0 + level) / 2.0
    lower = np.quantile(s, lo_q, axis=0)
    upper = np.quantile(s, hi_q, axis=0)
    return lower, upper, upper - lower


def relative_error(estimate: Signal, truth: Signal) -> float:
    """||estimate - truth||_2 / ||truth||_2."""
    if estimate.grid != truth.grid:
        raise ValueError("signals live on different grids")
    denom = np.linalg.norm(truth.values)
    if denom == 0.0:
        raise ValueError("truth has zero norm")
    return float(np.linalg.norm(estimate.values - truth.values) / denom)


def cumulative_mean(chain: np.ndarray) -> np.ndarray:
    """Running means m_t = (1/t) sum_{i<=t} x_i."""
    x = np.asarray(chain, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty chain")
    return np.cumsum(x) / np.arange(1, x.size + 1)


@dataclass
class ChainStats:
    """Per-coordinate posterior summaries of a sample matrix (N, dim)."""

    mean: np.ndarray
    std: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    ci_width: np.ndarray
    ess: np.ndarray
    level: float
    degenerate: np.ndarray  # True where the chain had zero variance

    def ess_summary(self) -> dict[str, float]:
        return {
            "min": float(np.min(self.ess)),
            "median": float(np.median(self.ess)),
            "max": float(np.max(self.ess)),
        }


def chain_stats(samples: np.ndarray, level: float = 0.95) -> ChainStats:
    """Summaries + per-coordinate ESS for a (N, dim) sample matrix."""
    s = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if s.ndim != 2:
        raise ValueError("samples must be a (N, dim) matrix")
    lower, upper, width = credible_interval(s, level)
    n, dim = s.shape
    ess = np.empty(dim)
    degenerate = np.zeros(dim, dtype=bool)
    for j in range(dim):
        col = s[:, j]
        if np.all(col == col[0]):
            ess[j] = float(n)
            degenerate[j] = True
        else:
            ess[j] = effective_sample_size(col)
    return ChainStats(
        mean=s.mean(axis=0), std=s.std(axis=0, ddof=1),
        ci_lower=lower, ci_upper=upper, ci_width=width,
        ess=ess, level=level, degenerate=degenerate,
    )


_FMT = "%.17g"


def save_chain_stats(path: str | Path, stats: ChainStats) -> None:
    """Comma-separated per-coordinate stats table."""
    path = Path(path)
    lines = ["index,mean,std,ci_lower,ci_upper,ci_width,ess"]
    for i in range(stats.mean.size):
        row = [str(i)] + [
            _FMT % v for v in (
                stats.mean[i], stats.std[i], stats.ci_lower[i],
                stats.ci_upper[i], stats.ci_width[i], stats.ess[i],
            )
        ]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def save_acf(path: str | Path, chain: np.ndarray, max_lag: int) -> None:
    """Comma-separated (lag, rho) table for one coordinate's chain."""
    rho = autocorrelation(chain, max_lag)
    lines = ["lag,acf"] + [f"{k},{_FMT % rho[k]}" for k in range(rho.size)]
    Path(path).write_text("\n".join(lines) + "\n")

"""Conjugate-gradient least squares on stacked matrix-free operator blocks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass
class LinearBlock:
    """One block row of a stacked least-squares operator.

    ``apply``/``adjoint`` must be a consistent pair; ``scale`` multiplies the
    whole block row (e.g. 1/sigma on a likelihood block).
    """

    apply: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    out_dim: int
    scale: float = 1.0


@dataclass
class StackedLsqProblem:
    """min_x || M x - rhs ||_2 with M the vertical stack of scaled blocks."""

    blocks: list[LinearBlock]
    rhs: np.ndarray
    n: int

    def __post_init__(self):
        total = sum(b.out_dim for b in self.blocks)
        if self.rhs.shape != (total,):
            raise ValueError(
                f"rhs length {self.rhs.shape} does not match stacked output {total}"
            )

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.concatenate([b.scale * b.apply(x) for b in self.blocks])

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n)
        pos = 0
        for b in self.blocks:
            out += b.scale * b.adjoint(y[pos:pos + b.out_dim])
            pos += b.out_dim
        return out


@dataclass
class CglsResult:
    x: np.ndarray
    iters: int
    relres: float
    converged: bool
    resnorm_history: list[float] = field(default_factory=list)


def check_adjoint_consistency(prob: StackedLsqProblem, rng: np.random.Generator,
                              tol: float = 1e-10, probes: int = 3) -> None:
    """Raise if |<Mx, y> - <x, M^T y>| > tol * ||x|| ||y|| on random probes."""
    m = sum(b.out_dim for b in prob.blocks)
    for _ in range(probes):
        x = rng.standard_normal(prob.n)
        y = rng.standard_normal(m)
        lhs = float(prob.apply(x) @ y)
        rhs = float(x @ prob.adjoint(y))
        bound = tol * np.linalg.norm(x) * np.linalg.norm(y)
        if abs(lhs - rhs) > bound:
            raise ValueError(
                f"adjoint-inconsistent blocks: |{lhs} - {rhs}| > {bound}"
            )


def cgls_solve(
    prob: StackedLsqProblem,
    tol: float = 1e-8,
    max_iter: int = 200,
    x0: Optional[np.ndarray] = None,
    check_adjoint: Optional[np.random.Generator] = None,
) -> CglsResult:
    """CGLS for the stacked least-squares problem.

    Stops when ||M^T (rhs - M x)|| / ||M^T rhs|| <= tol or after max_iter
    iterations (the best iterate is then returned flagged as not converged).
    Passing a generator as ``check_adjoint`` runs a randomized adjoint
    consistency check before solving.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if check_adjoint is not None:
        check_adjoint_consistency(prob, check_adjoint)

    b = prob.rhs
    denom = np.linalg.norm(prob.adjoint(b))
    if denom == 0.0:
        x = np.zeros(prob.n) if x0 is None else np.asarray(x0, dtype=np.float64)
        return CglsResult(x=x, iters=0, relres=0.0, converged=True,
                          resnorm_history=[float(np.linalg.norm(b))])

    x = np.zeros(prob.n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    r = b - prob.apply(x) if x0 is not None else b.copy()
    s = prob.adjoint(r)
    p = s.copy()
    gamma = float(s @ s)
    history = [float(np.linalg.norm(r))]
    relres = np.sqrt(gamma) / denom
    iters = 0
    while relres > tol and iters < max_iter:
        q = prob.apply(p)
        qq = float(q @ q)
        if qq == 0.0:
            break
        alpha = gamma / qq
        x += alpha * p
        r -= alpha * q
        s = prob.adjoint(r)
        gamma_new = float(s @ s)
        beta = gamma_new / gamma
        gamma = gamma_new
        p *= beta
        p += s
        iters += 1
        relres = np.sqrt(gamma) / denom
        history.append(float(np.linalg.norm(r)))
    return CglsResult(
        x=x, iters=iters, relres=float(relres),
        converged=bool(relres <= tol), resnorm_history=history,
    )

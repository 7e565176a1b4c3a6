"""Forward blur operator (periodic Gaussian, 1D and separable 2D) and
periodic forward-difference gradients with adjoints.

Axis conventions for d=2 (row-major storage): the first dn/2 gradient entries
are horizontal differences (along columns, axis 1), the rest vertical (axis 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Grid, Signal


@dataclass
class ConvOperator:
    """Circulant convolution by a truncated, renormalized periodic Gaussian.

    The kernel is sampled at grid points within +-3*sigma_ker of the center,
    wrapped onto the torus and normalized to sum exactly 1, so constants map
    to constants.  In 2D the same 1D kernel is applied along both axes.
    A kernel whose truncated support covers fewer than 3 grid points is
    degenerate; the operator falls back to the identity and flags it.
    """

    grid: Grid
    sigma_ker: float
    weights: np.ndarray = field(init=False)
    offsets: np.ndarray = field(init=False)
    degenerate: bool = field(init=False)

    def __post_init__(self):
        if self.sigma_ker <= 0:
            raise ValueError("sigma_ker must be > 0")
        ns = self.grid.n_side
        spacing = self.grid.spacing
        radius = int(np.floor(3.0 * self.sigma_ker / spacing))
        if 2 * radius + 1 < 3:
            self.degenerate = True
            self.offsets = np.array([0])
            self.weights = np.array([1.0])
        else:
            self.degenerate = False
            offs = np.arange(-radius, radius + 1)
            w = np.exp(-((offs * spacing) ** 2) / (2.0 * self.sigma_ker ** 2))
            # wrap taps that overlap themselves around the torus
            col = np.zeros(ns)
            np.add.at(col, offs % ns, w)
            nz = np.nonzero(col)[0]
            self.offsets = nz
            self.weights = col[nz] / col[nz].sum()
        self._gather = (np.arange(ns)[:, None] - self.offsets[None, :]) % ns

    @property
    def taps(self) -> int:
        return self.weights.size

    def apply_axis(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        """Circular 1D convolution along one axis (batched)."""
        x = np.moveaxis(values, axis, -1)
        y = x[..., self._gather] @ self.weights
        return np.moveaxis(y, -1, axis)

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        """Apply to flat values of length grid.n (leading axes are batch)."""
        if self.grid.d == 1:
            return self.apply_axis(values, -1)
        ns = self.grid.n_side
        img = values.reshape(values.shape[:-1] + (ns, ns))
        img = self.apply_axis(img, -1)
        img = self.apply_axis(img, -2)
        return img.reshape(values.shape)

    # the kernel is even, so the circulant is symmetric: adjoint == apply
    def adjoint_values(self, values: np.ndarray) -> np.ndarray:
        return self.apply_values(values)

    def dense(self) -> np.ndarray:
        """Dense matrix (tests and small-n oracles only)."""
        return self.apply_values(np.eye(self.grid.n)).T


def make_gaussian_kernel(grid: Grid, sigma_ker: float) -> ConvOperator:
    """Periodic Gaussian blur with standard deviation sigma_ker (domain units)."""
    return ConvOperator(grid=grid, sigma_ker=sigma_ker)


def conv_apply(op: ConvOperator, f: Signal) -> np.ndarray:
    if f.grid != op.grid:
        raise ValueError("signal grid does not match operator grid")
    return op.apply_values(f.values)


# --- gradient operators ------------------------------------------------------


def forward_diff(values: np.ndarray, d: int) -> np.ndarray:
    """Stacked periodic forward differences of flat values; output length d*n.

    Works on raw arrays (any length in 1D); 2D assumes a square row-major
    layout with n_side = sqrt(len).
    """
    v = np.asarray(values, dtype=np.float64)
    if d == 1:
        return np.roll(v, -1) - v
    ns = int(round(np.sqrt(v.size)))
    if ns * ns != v.size:
        raise ValueError("2D gradient needs a square layout")
    img = v.reshape(ns, ns)
    horiz = np.roll(img, -1, axis=1) - img
    vert = np.roll(img, -1, axis=0) - img
    return np.concatenate([horiz.reshape(-1), vert.reshape(-1)])


def forward_diff_adjoint(w: np.ndarray, d: int) -> np.ndarray:
    """Adjoint D^T of :func:`forward_diff`; input length d*n, output length n."""
    w = np.asarray(w, dtype=np.float64)
    if d == 1:
        return np.roll(w, 1) - w
    n = w.size // 2
    if 2 * n != w.size:
        raise ValueError("2D adjoint needs an input of length 2*n")
    ns = int(round(np.sqrt(n)))
    if ns * ns != n:
        raise ValueError("2D adjoint needs a square layout")
    wh = w[:n].reshape(ns, ns)
    wv = w[n:].reshape(ns, ns)
    out = (np.roll(wh, 1, axis=1) - wh) + (np.roll(wv, 1, axis=0) - wv)
    return out.reshape(-1)


@dataclass(frozen=True)
class GradOperator:
    """Periodic forward-difference gradient D_d on a grid (output length d*n)."""

    grid: Grid

    @property
    def output_dim(self) -> int:
        return self.grid.d * self.grid.n

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        return forward_diff(values, self.grid.d)

    def adjoint_values(self, w: np.ndarray) -> np.ndarray:
        return forward_diff_adjoint(w, self.grid.d)


def grad_apply(g: Signal) -> np.ndarray:
    """D_d g for a signal on its own grid."""
    return forward_diff(g.values, g.grid.d)


def grad_adjoint(v: np.ndarray, grid: Grid) -> Signal:
    """D_d^T v as a signal; v must have length d*n."""
    v = np.asarray(v, dtype=np.float64)
    if v.size != grid.d * grid.n:
        raise ValueError(f"expected length {grid.d * grid.n}, got {v.size}")
    return Signal(grid=grid, values=forward_diff_adjoint(v, grid.d))

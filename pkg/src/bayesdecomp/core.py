"""Shared domain types: dyadic grids on the torus, signals, problems, RNG streams."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml


class BayesdecompError(Exception):
    """Base class for all package errors."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid of 2^J points per axis on the unit torus [0, 1)^d.

    2D signals are stored flattened row-major: index = row * n_side + col.
    """

    d: int
    J: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if not (1 <= self.J <= 16):
            raise ValueError(f"J must be in 1..16, got {self.J}")

    @property
    def n_side(self) -> int:
        return 2 ** self.J

    @property
    def n(self) -> int:
        return self.n_side ** self.d

    @property
    def spacing(self) -> float:
        return 1.0 / self.n_side


def make_grid(d: int, J: int) -> Grid:
    """Grid with n_side = 2^J points per axis, n = 2^(J d) total."""
    return Grid(d=d, J=J)


@dataclass(frozen=True)
class Signal:
    """Real-valued signal on a Grid; values are immutable float64, length grid.n."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.grid.n,):
            raise ValueError(
                f"values must have shape ({self.grid.n},), got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("signal values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def as_image(self) -> np.ndarray:
        """2D view (n_side, n_side); only valid for d=2."""
        if self.grid.d != 2:
            raise ValueError("as_image requires a 2D grid")
        return self.values.reshape(self.grid.n_side, self.grid.n_side)


@dataclass(frozen=True)
class DecompProblem:
    """Deconvolution problem: data = blur(g + h) + noise on a periodic grid."""

    grid: Grid
    kernel_sigma: float
    noise_sigma: float
    data: np.ndarray
    truth: Optional[Signal] = None

    def __post_init__(self):
        if self.kernel_sigma <= 0:
            raise ValueError("kernel_sigma must be > 0")
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be > 0")
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != (self.grid.n,):
            raise ValueError(
                f"data must have shape ({self.grid.n},), got {data.shape}"
            )
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)


@dataclass(frozen=True)
class RngHandle:
    """Counter-based RNG stream: (seed, stream_id) fully determines the draws.

    Backed by Philox, so distinct stream_ids give statistically independent
    streams and results are bit-reproducible across platforms.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed < 2 ** 64):
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not (0 <= self.stream_id < 2 ** 64):
            raise ValueError("stream_id must be an unsigned 64-bit integer")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def stream(self, stream_id: int) -> "RngHandle":
        return RngHandle(seed=self.seed, stream_id=stream_id)


def add_noise(
    clean_data: np.ndarray, noise_level: float, rng: RngHandle
) -> tuple[np.ndarray, float]:
    """Add white Gaussian noise calibrated to a relative level.

    sigma = noise_level * ||clean||_2 / sqrt(m), so that
    E||eps||_2 / ||clean||_2 ~= noise_level.  Returns (noisy, sigma).
    """
    clean = np.asarray(clean_data, dtype=np.float64)
    if noise_level <= 0:
        raise ValueError("noise_level must be > 0")
    norm = np.linalg.norm(clean)
    if norm == 0.0:
        raise ValueError("clean data must be nonzero (sigma undefined)")
    m = clean.size
    sigma = noise_level * norm / np.sqrt(m)
    eps = sigma * rng.generator().standard_normal(m)
    return clean + eps, float(sigma)


# --- plain-text signal serialization -------------------------------------

_FMT = "%.17g"


def save_signal(path: str | Path, signal: Signal, meta: Optional[dict] = None) -> None:
    """Write a signal as text (one value per line for 1D, comma-separated rows
    for 2D) plus a ``<path>.manifest.yaml`` sidecar recording the grid and any
    extra metadata (seed, noise level, sigma, ...)."""
    path = Path(path)
    if signal.grid.d == 1:
        body = "\n".join(_FMT % v for v in signal.values)
    else:
        img = signal.as_image()
        body = "\n".join(",".join(_FMT % v for v in row) for row in img)
    path.write_text(body + "\n")
    manifest = {"grid": {"d": signal.grid.d, "J": signal.grid.J}}
    if meta:
        manifest.update(meta)
    sidecar = path.with_name(path.name + ".manifest.yaml")
    sidecar.write_text(yaml.safe_dump(manifest, sort_keys=True))


def load_signal(path: str | Path) -> Signal:
    """Read a signal written by :func:`save_signal` (manifest supplies the grid)."""
    path = Path(path)
    sidecar = path.with_name(path.name + ".manifest.yaml")
    manifest = yaml.safe_load(sidecar.read_text())
    grid = Grid(d=int(manifest["grid"]["d"]), J=int(manifest["grid"]["J"]))
    rows = [line for line in path.read_text().splitlines() if line.strip()]
    if grid.d == 1:
        values = np.array([float(r) for r in rows])
    else:
        values = np.array(
            [[float(x) for x in r.split(",")] for r in rows]
        ).reshape(-1)
    return Signal(grid=grid, values=values)

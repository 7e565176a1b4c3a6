"""Seeded ground-truth generators: a rough (piecewise-constant) plus a smooth
component on the periodic grid, for the three experiment families."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Grid, RngHandle, Signal
from .wavelet import daubechies_filters, inverse_values


@dataclass(frozen=True)
class PhantomSpec:
    """What to generate.  Explicit component definitions override the seeded
    defaults; whatever is realized ends up in the run manifest."""

    kind: str  # haar_db8_combo | piecewise_plus_gaussian_bumps | blocks_2d
    grid: Grid
    seed: int
    jumps: Optional[list[tuple[float, float]]] = None   # (location in [0,1), height)
    bumps: Optional[list[tuple[float, ...]]] = None     # (center..., width, amplitude)
    rects: Optional[list[tuple[float, float, float, float, float]]] = None
    # rects: (row0, col0, row1, col1, height) in unit coordinates

    def __post_init__(self):
        kinds = ("haar_db8_combo", "piecewise_plus_gaussian_bumps", "blocks_2d")
        if self.kind not in kinds:
            raise ValueError(f"unknown phantom kind {self.kind!r}")
        want_d = 2 if self.kind == "blocks_2d" else 1
        if self.grid.d != want_d:
            raise ValueError(f"phantom {self.kind} needs a {want_d}D grid")


def generate_phantom(spec: PhantomSpec) -> tuple[Signal, Signal, Signal]:
    """Build (g_true, h_true, f_true) with f = g + h; g has zero mean."""
    if spec.kind == "haar_db8_combo":
        g, h = _haar_db8_combo(spec)
    elif spec.kind == "piecewise_plus_gaussian_bumps":
        g, h = _piecewise_plus_bumps(spec)
    else:
        g, h = _blocks_2d(spec)
    f = Signal(grid=spec.grid, values=g.values + h.values)
    return g, h, f


def _haar_db8_combo(spec: PhantomSpec) -> tuple[Signal, Signal]:
    """Rough part from a handful of coarse Haar coefficients, smooth part from
    coarse high-order coefficients; both built in coefficient space."""
    grid = spec.grid
    gen = RngHandle(seed=spec.seed, stream_id=0).generator()
    haar = daubechies_filters(1)
    db8 = daubechies_filters(8)
    n = grid.n

    cg = np.zeros(n)
    n_terms = 8
    levels = gen.integers(1, 5, size=n_terms)
    for j in levels:
        k = int(gen.integers(0, 2 ** j))
        amp = gen.uniform(0.6, 1.6) * (1.0 if gen.random() < 0.5 else -1.0)
        cg[2 ** j + k] += amp * 2.0 ** (-0.25 * j)
    g_vals = inverse_values(cg, haar, grid)
    g_vals = g_vals - g_vals.mean()

    ch = np.zeros(n)
    ch[0] = 0.6 * np.sqrt(n)  # baseline mean
    for j in range(0, 4):
        for k in range(2 ** j):
            if gen.random() < 0.7:
                ch[2 ** j + k] += gen.uniform(-1.0, 1.0) * 2.0 ** (-0.35 * j) * 6.0
    h_vals = inverse_values(ch, db8, grid)
    return Signal(grid=grid, values=g_vals), Signal(grid=grid, values=h_vals)


def _piecewise_plus_bumps(spec: PhantomSpec) -> tuple[Signal, Signal]:
    grid = spec.grid
    n = grid.n
    x = np.arange(n) / n
    gen = RngHandle(seed=spec.seed, stream_id=0).generator()

    jumps = spec.jumps
    if jumps is None:
        n_jumps = 10
        # jump positions jittered around an even spacing so plateaus stay
        # wider than the blur kernel
        base = (np.arange(n_jumps) + gen.uniform(0.15, 0.85, n_jumps)) / n_jumps
        locs = np.floor(base * n) / n
        heights = gen.uniform(0.5, 1.5, n_jumps) * gen.choice([-1.0, 1.0], n_jumps)
        heights -= heights.mean()  # wrap-consistent on the torus
        jumps = list(zip(locs.tolist(), heights.tolist()))
    g_vals = np.zeros(n)
    for loc, height in jumps:
        g_vals[x >= loc] += height
    g_vals -= g_vals.mean()

    bumps = spec.bumps
    if bumps is None:
        n_bumps = 3
        centers = gen.uniform(0.0, 1.0, n_bumps)
        widths = gen.uniform(0.05, 0.15, n_bumps)
        amps = gen.uniform(0.5, 1.5, n_bumps) * gen.choice([-1.0, 1.0], n_bumps)
        bumps = list(zip(centers.tolist(), widths.tolist(), amps.tolist()))
    h_vals = np.full(n, 0.5)
    for center, width, amp in bumps:
        dist = np.minimum(np.abs(x - center), 1.0 - np.abs(x - center))
        h_vals += amp * np.exp(-(dist ** 2) / (2.0 * width ** 2))
    return Signal(grid=grid, values=g_vals), Signal(grid=grid, values=h_vals)


def _blocks_2d(spec: PhantomSpec) -> tuple[Signal, Signal]:
    """Rectangles (rough) plus broad periodic bumps (smooth), affinely scaled
    so f spans exactly [0, 2]."""
    grid = spec.grid
    ns = grid.n_side
    gen = RngHandle(seed=spec.seed, stream_id=0).generator()
    rr, cc = np.meshgrid(np.arange(ns) / ns, np.arange(ns) / ns, indexing="ij")

    rects = spec.rects
    if rects is None:
        rects = []
        for _ in range(3):
            r0, c0 = gen.uniform(0.1, 0.55, 2)
            dr, dc = gen.uniform(0.15, 0.3, 2)
            height = gen.uniform(0.5, 1.0) * (1.0 if gen.random() < 0.7 else -1.0)
            rects.append((float(r0), float(c0), float(r0 + dr), float(c0 + dc),
                          float(height)))
    g_img = np.zeros((ns, ns))
    for r0, c0, r1, c1, height in rects:
        mask = (rr >= r0) & (rr < r1) & (cc >= c0) & (cc < c1)
        g_img[mask] += height
    g_vals = g_img.reshape(-1)
    g_vals -= g_vals.mean()

    bumps = spec.bumps
    if bumps is None:
        bumps = []
        for _ in range(2):
            cr, ccen = gen.uniform(0.2, 0.8, 2)
            width = gen.uniform(0.15, 0.3)
            amp = gen.uniform(0.4, 0.8)
            bumps.append((float(cr), float(ccen), float(width), float(amp)))
    h_img = np.zeros((ns, ns))
    for cr, ccen, width, amp in bumps:
        dr = np.minimum(np.abs(rr - cr), 1.0 - np.abs(rr - cr))
        dc = np.minimum(np.abs(cc - ccen), 1.0 - np.abs(cc - ccen))
        h_img += amp * np.exp(-(dr ** 2 + dc ** 2) / (2.0 * width ** 2))
    h_vals = h_img.reshape(-1)

    f = g_vals + h_vals
    span = f.max() - f.min()
    scale = 2.0 / span
    g_vals = g_vals * scale                    # stays zero-mean
    h_vals = h_vals * scale - f.min() * scale  # shifts f to [0, 2]
    return Signal(grid=grid, values=g_vals), Signal(grid=grid, values=h_vals)

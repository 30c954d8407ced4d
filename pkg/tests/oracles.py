"""Shared test oracles."""

import math

import numpy as np

from nsaudit.fields import VectorField


def band_limited(grid, seed=0, kmax=3):
    """Random smooth periodic 3-component field built from low Fourier modes."""
    rng = np.random.default_rng(seed)
    x, y = grid.coords()
    comps = []
    for _ in range(3):
        c = np.zeros(grid.dims)
        for kx in range(kmax + 1):
            for ky in range(kmax + 1):
                a, b = rng.normal(size=2)
                ph = rng.uniform(0, 2 * math.pi)
                c += a * np.cos(kx * x + ky * y + ph) + b * np.sin(kx * x - ky * y + ph)
        comps.append(c)
    return VectorField(grid, np.stack(comps))

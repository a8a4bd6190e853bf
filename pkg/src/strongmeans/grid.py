"""Sampled functions on uniform dyadic grids of the torus.

A GridFunction holds samples at the points t * 2**-J (per axis).  For
integration the function is read as piecewise constant on the grid
cells; for transforms the samples are used as point values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GridFunction:
    dim: int
    J: int
    samples: np.ndarray
    # set for separable 2-d constructions; enables fast rectangular sums
    factors: tuple["GridFunction", "GridFunction"] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        n = 1 << self.J
        want = (n,) if self.dim == 1 else (n, n)
        if self.samples.shape != want:
            raise ValueError(f"samples shape {self.samples.shape}, expected {want}")

    @property
    def n(self) -> int:
        return 1 << self.J

    def l1(self) -> float:
        return float(np.mean(np.abs(self.samples)))

    def l2sq(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))

    def linf(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def is_real(self) -> bool:
        return not np.iscomplexobj(self.samples)

    def refine_piecewise(self, extra: int) -> "GridFunction":
        """Repeat samples onto a 2**extra times finer grid (step function view)."""
        if extra == 0:
            return self
        r = 1 << extra
        s = np.repeat(self.samples, r, axis=0)
        if self.dim == 2:
            s = np.repeat(s, r, axis=1)
        return GridFunction(self.dim, self.J + extra, s)


def constant(value, J: int, dim: int = 1) -> GridFunction:
    n = 1 << J
    shape = (n,) if dim == 1 else (n, n)
    return GridFunction(dim, J, np.full(shape, value, dtype=np.result_type(value, np.float64)))


def exponential(m, J: int, dim: int = 1) -> GridFunction:
    """e(m . x) sampled on the grid."""
    n = 1 << J
    t = np.arange(n)
    if dim == 1:
        s = np.exp(2j * np.pi * (int(m) * t % n) / n)
        return GridFunction(1, J, s)
    m1, m2 = m
    s1 = np.exp(2j * np.pi * (int(m1) * t % n) / n)
    s2 = np.exp(2j * np.pi * (int(m2) * t % n) / n)
    return GridFunction(2, J, np.outer(s1, s2))


def tensor(g: GridFunction, h: GridFunction) -> GridFunction:
    if g.dim != 1 or h.dim != 1 or g.J != h.J:
        raise ValueError("tensor needs two 1-d functions on the same grid")
    return GridFunction(2, g.J, np.outer(g.samples, h.samples), factors=(g, h))

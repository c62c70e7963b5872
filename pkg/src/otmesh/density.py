"""Scalar densities on the physical domain and their normalization."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import DensityError


def gauss_legendre_2d(f, domain, cells: int = 64, order: int = 8) -> float:
    """Composite tensor Gauss-Legendre integral of ``f(x, y)`` over a rectangle."""
    x0, x1, y0, y1 = domain
    g, w = np.polynomial.legendre.leggauss(order)
    ex = np.linspace(x0, x1, cells + 1)
    ey = np.linspace(y0, y1, cells + 1)
    hx = np.diff(ex)[0] / 2
    hy = np.diff(ey)[0] / 2
    xs = ((ex[:-1] + ex[1:]) / 2)[:, None] + hx * g[None, :]
    ys = ((ey[:-1] + ey[1:]) / 2)[:, None] + hy * g[None, :]
    wx = np.tile(w * hx, cells)
    wy = np.tile(w * hy, cells)
    X, Y = np.meshgrid(xs.ravel(), ys.ravel(), indexing="ij")
    return float(np.einsum("i,ij,j->", wx, np.asarray(f(X, Y), dtype=float), wy))


@dataclass(frozen=True)
class DensityField:
    """Positive density ``rho(x, y)`` with optional normalization ``theta``.

    ``func`` is vectorized over arrays of physical coordinates. ``nodal``
    optionally holds values already attached to mesh nodes (used when the
    density is defined in computational coordinates, as in the moving-mesh
    coupling); consumers prefer it over ``func`` when present.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    theta: float | None = None
    nodal: np.ndarray | None = None
    name: str = "density"

    def __call__(self, x, y):
        return self.func(x, y)

    @classmethod
    def uniform(cls, value: float = 1.0) -> "DensityField":
        if value <= 0:
            raise DensityError(f"density must be positive, got {value}")
        return cls(lambda x, y: np.full(np.broadcast(x, y).shape, float(value)), None, None, "uniform")

    @classmethod
    def from_samples(cls, xs, ys, values, theta=None, name="sampled") -> "DensityField":
        """Bilinear interpolant of samples on a tensor grid (1D axes ``xs``, ``ys``)."""
        from scipy.interpolate import RegularGridInterpolator

        values = np.asarray(values, dtype=float)
        if np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise DensityError("sampled density must be finite and positive")
        interp = RegularGridInterpolator(
            (np.asarray(xs, float), np.asarray(ys, float)), values,
            method="linear", bounds_error=False, fill_value=None,
        )

        def f(x, y):
            x = np.asarray(x, float)
            y = np.asarray(y, float)
            shape = np.broadcast(x, y).shape
            pts = np.column_stack([np.broadcast_to(x, shape).ravel(), np.broadcast_to(y, shape).ravel()])
            return interp(pts).reshape(shape)

        return cls(f, theta, None, name)

    def with_theta(self, theta: float) -> "DensityField":
        return replace(self, theta=float(theta))

    def mean_over(self, domain, cells: int = 64, order: int = 8) -> float:
        """Average of the density over a rectangle (the normalization on a square)."""
        x0, x1, y0, y1 = domain
        return gauss_legendre_2d(self.func, domain, cells, order) / ((x1 - x0) * (y1 - y0))

    def check_positive(self, x, y) -> np.ndarray:
        vals = np.asarray(self.func(x, y), dtype=float)
        if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
            raise DensityError(f"{self.name}: density must be finite and positive")
        return vals


def sech2(z):
    """``sech(z)**2`` without overflow for large ``|z|``."""
    z = np.abs(np.asarray(z, dtype=float))
    e = np.exp(-2.0 * z)
    return 4.0 * e / (1.0 + e) ** 2

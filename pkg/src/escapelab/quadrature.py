"""Composite Gauss-Legendre rules and tensor grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class QuadratureSpec:
    scheme: str = "adaptive"  # "tensor-gauss" (single grid) or "adaptive"
    points_per_dim: int = 48
    tolerance: float = 1e-8

    def __post_init__(self):
        if self.tolerance <= 0:
            raise DomainError("quadrature tolerance must be positive")
        if self.scheme not in ("tensor-gauss", "adaptive"):
            raise DomainError(f"unknown quadrature scheme {self.scheme!r}")


def gauss_rule(n, a, b):
    """n-point Gauss-Legendre rule on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(int(n))
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def composite_gauss(a, b, n_points, order=12):
    """~n_points nodes on [a, b] split into panels of the given Gauss order."""
    n_panels = max(1, int(np.ceil(n_points / order)))
    edges = np.linspace(a, b, n_panels + 1)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gauss_rule(order, lo, hi)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def tensor_grid(box, points_per_dim, order=12):
    """Tensor composite-Gauss grid over a 2D box ((x0,x1),(y0,y1)).

    Returns nodes (N, 2) and weights (N,).
    """
    (x0, x1), (y0, y1) = box
    gx, wx = composite_gauss(x0, x1, points_per_dim, order)
    gy, wy = composite_gauss(y0, y1, points_per_dim, order)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    W = np.outer(wx, wy)
    return np.stack([X.ravel(), Y.ravel()], axis=-1), W.ravel()

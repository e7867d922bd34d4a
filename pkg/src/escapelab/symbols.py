"""Compactly supported phase-space observables (classical symbols).

Symbols evaluate on full phase points (m, nu) with |nu| free; the covector
dependence is declared through the metric shell |nu|_g and a direction
window so quadrature domains can be bounded.  The factory functions below
build polynomial bumps (exactly integrable by Gauss rules) and truncated
Gaussians (for the oscillatory quadratures), all in separable
base x covector form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .geometry import ModelGeometry


@dataclass(frozen=True)
class SymbolFunction:
    """Observable a(m, nu) with support metadata.

    separable holds (f, g) pairs with a(m, nu) = sum_r f_r(m) g_r(nu); the
    oscillatory matrix-element quadrature requires it.
    """

    evaluate: callable
    support_center: np.ndarray
    support_radius: float
    nu_shell: tuple = (0.5, 1.5)  # |nu|_g range where the symbol can be nonzero
    nu_angle: tuple = None        # (center, halfwidth) direction window or None
    sup_norm: float = 1.0
    smoothness: int = 2
    separable: tuple = None
    geometry: ModelGeometry = None
    min_feature: float = None     # smallest variation scale; quadrature density key
    nu_box: tuple = None          # chart covector bounding box ((lo,hi),(lo,hi))
    nu_feature: float = None      # covector variation scale (Gaussian sigma_nu)

    def __post_init__(self):
        object.__setattr__(
            self, "support_center", np.asarray(self.support_center, dtype=float)
        )
        if self.min_feature is None:
            object.__setattr__(self, "min_feature", float(self.support_radius))
        if self.nu_feature is None:
            if self.nu_box is not None:
                span = min(b[1] - b[0] for b in self.nu_box)
            else:
                span = self.nu_shell[1] - self.nu_shell[0]
            object.__setattr__(self, "nu_feature", span / 8.0)

    def __call__(self, m, nu):
        return self.evaluate(np.asarray(m, dtype=float), np.asarray(nu, dtype=float))

    def base_box(self, pad=0.0):
        """Euclidean-coordinate bounding box of the base support."""
        c, r = self.support_center, self.support_radius + pad
        return (c[0] - r, c[0] + r), (c[1] - r, c[1] + r)


def poly_bump(u):
    """C^2 bump (1 - u^2)^3 on |u| <= 1, zero outside; exactly polynomial."""
    u = np.asarray(u, dtype=float)
    v = np.maximum(1.0 - u * u, 0.0)
    return v * v * v


def poly_bump_base_integral(radius):
    """Integral of poly_bump(|m - c|/r) over the plane: pi r^2 / 4."""
    return np.pi * radius**2 / 4.0


def angle_window(theta, theta0, power):
    """Trig-polynomial window ((1 + cos(theta - theta0))/2)^power."""
    return ((1.0 + np.cos(theta - theta0)) / 2.0) ** power


def angle_window_integral(power):
    """Integral of angle_window over the circle: 2 pi C(2k, k)/4^k."""
    return 2.0 * np.pi * comb(2 * power, power) / 4.0**power


def product_symbol(geom, center, radius, f_base, g_cov, nu_shell, nu_angle=None,
                   sup_norm=1.0, smoothness=2, separable=None, nu_box=None):
    """Assemble a symbol a(m, nu) = f_base(m) g_cov(m, nu).

    g_cov receives (m, nu) so metric-shell factors can use |nu|_g(m); when
    the covector factor is a pure function of nu, pass separable=((f, g),)
    with g taking nu alone (required by the oscillatory quadratures).
    """

    def ev(m, nu):
        return f_base(m) * g_cov(m, nu)

    return SymbolFunction(
        evaluate=ev,
        support_center=center,
        support_radius=radius,
        nu_shell=nu_shell,
        nu_angle=nu_angle,
        sup_norm=sup_norm,
        smoothness=smoothness,
        separable=separable,
        geometry=geom,
        nu_box=nu_box,
    )


def bump_symbol(geom, center, radius, nu_center_angle=None, angle_power=6,
                shell=(0.7, 1.3)):
    """Polynomial base bump x metric-shell bump x optional direction window.

    The shell factor peaks at |nu|_g = 1 so the symbol is O(1) on the unit
    cotangent bundle; evaluated at exact unit covectors the shell factor is
    its peak value.
    """
    center = np.asarray(center, dtype=float)
    lo, hi = shell
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)

    def f_base(m):
        d = np.sqrt(np.sum((m - center) ** 2, axis=-1))
        return poly_bump(d / radius)

    def g_cov(m, nu):
        s = geom.cov_norm(m, nu)
        out = poly_bump((s - mid) / half)
        if nu_center_angle is not None:
            th = np.arctan2(nu[..., 1], nu[..., 0])
            out = out * angle_window(th, nu_center_angle, angle_power)
        return out

    return product_symbol(
        geom, center, radius, f_base, g_cov, nu_shell=shell,
        nu_angle=(nu_center_angle, np.pi) if nu_center_angle is not None else None,
    )


def gaussian_symbol(geom, center, sigma, nu_center_angle, nu_sigma_angle=0.3,
                    shell_center=1.0, shell_sigma=0.12, cutoff=6.0):
    """Truncated-Gaussian symbol with a metric-shell covector factor (smooth
    to ~1e-8 at the support edge); not separable in chart coordinates."""
    center = np.asarray(center, dtype=float)
    radius = cutoff * sigma

    def f_base(m):
        d2 = np.sum((m - center) ** 2, axis=-1)
        return np.where(d2 <= radius**2, np.exp(-d2 / (2.0 * sigma**2)), 0.0)

    def g_cov(m, nu):
        s = geom.cov_norm(m, nu)
        th = np.arctan2(nu[..., 1], nu[..., 0])
        dth = (th - nu_center_angle + np.pi) % (2.0 * np.pi) - np.pi
        rad = np.exp(-((s - shell_center) ** 2) / (2.0 * shell_sigma**2))
        ang = np.exp(-(dth**2) / (2.0 * nu_sigma_angle**2))
        out = rad * ang
        return np.where(
            (np.abs(s - shell_center) <= cutoff * shell_sigma)
            & (np.abs(dth) <= cutoff * nu_sigma_angle),
            out,
            0.0,
        )

    lo = max(shell_center - cutoff * shell_sigma, 1e-3)
    hi = shell_center + cutoff * shell_sigma
    return product_symbol(
        geom, center, radius, f_base, g_cov, nu_shell=(lo, hi),
        nu_angle=(nu_center_angle, cutoff * nu_sigma_angle), smoothness=8,
    )


def chart_symbol(geom, center, sigma, nu_center, nu_sigma=0.15, cutoff=6.0):
    """Separable chart symbol a(m, nu) = f(m) g(nu) for oscillatory quadrature.

    f is a truncated Gaussian bump in the base chart; g is a truncated
    Gaussian in the chart covector components around nu_center.  The metric
    shell metadata is derived from the conformal factor range over the base
    support.
    """
    center = np.asarray(center, dtype=float)
    nu_center = np.asarray(nu_center, dtype=float)
    radius = cutoff * sigma

    def f_base(m):
        d2 = np.sum((np.asarray(m, dtype=float) - center) ** 2, axis=-1)
        return np.where(d2 <= radius**2, np.exp(-d2 / (2.0 * sigma**2)), 0.0)

    def g_pure(nu):
        d2 = np.sum((np.asarray(nu, dtype=float) - nu_center) ** 2, axis=-1)
        return np.where(
            d2 <= (cutoff * nu_sigma) ** 2, np.exp(-d2 / (2.0 * nu_sigma**2)), 0.0
        )

    def g_cov(m, nu):
        return g_pure(nu)

    nu_box = tuple(
        (nu_center[i] - cutoff * nu_sigma, nu_center[i] + cutoff * nu_sigma)
        for i in range(2)
    )
    # conformal factor range over the support bounds the metric shell
    r0 = float(np.linalg.norm(center))
    rads = np.clip([r0 - radius, r0 + radius], 0.0, 0.999)
    lam = [geom.conformal_factor(np.array([r, 0.0])) for r in rads]
    nu_lo = max(np.linalg.norm(nu_center) - cutoff * nu_sigma * np.sqrt(2.0), 1e-3)
    nu_hi = np.linalg.norm(nu_center) + cutoff * nu_sigma * np.sqrt(2.0)
    shell = (nu_lo / max(lam), nu_hi / min(lam))
    out = product_symbol(
        geom, center, radius, f_base, g_cov, nu_shell=shell,
        nu_angle=(float(np.arctan2(nu_center[1], nu_center[0])), np.pi),
        smoothness=8, separable=((f_base, g_pure),), nu_box=nu_box,
    )
    object.__setattr__(out, "nu_feature", float(nu_sigma))
    return out


def combine(alpha, a: SymbolFunction, beta, b: SymbolFunction):
    """alpha a + beta b, with the union support metadata."""
    ca, cb = a.support_center, b.support_center
    # smallest disk containing both supports (crude but safe)
    mid = 0.5 * (ca + cb)
    radius = 0.5 * np.linalg.norm(ca - cb) + max(a.support_radius, b.support_radius)

    def ev(m, nu):
        return alpha * a.evaluate(m, nu) + beta * b.evaluate(m, nu)

    sep = None
    if a.separable is not None and b.separable is not None:
        def scale(f, c):
            return lambda m, f=f, c=c: c * f(m)

        sep = tuple((scale(f, alpha), g) for f, g in a.separable) + tuple(
            (scale(f, beta), g) for f, g in b.separable
        )
    nu_box = None
    if a.nu_box is not None and b.nu_box is not None:
        nu_box = tuple(
            (min(a.nu_box[i][0], b.nu_box[i][0]), max(a.nu_box[i][1], b.nu_box[i][1]))
            for i in range(2)
        )
    return SymbolFunction(
        evaluate=ev,
        support_center=mid,
        support_radius=float(radius),
        nu_shell=(min(a.nu_shell[0], b.nu_shell[0]), max(a.nu_shell[1], b.nu_shell[1])),
        nu_angle=None,
        sup_norm=abs(alpha) * a.sup_norm + abs(beta) * b.sup_norm,
        smoothness=min(a.smoothness, b.smoothness),
        separable=sep,
        geometry=a.geometry,
        min_feature=min(a.min_feature, b.min_feature),
        nu_box=nu_box,
    )

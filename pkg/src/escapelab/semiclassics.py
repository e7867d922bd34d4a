"""Plane waves, Eisenstein functions and semiclassical matrix elements.

Wave families (energy square root lambda, semiclassical parameter h):

* plane:      E_h(lambda, xi; m) = e^{i lambda m.xi / h} on the plane,
* horospherical: E_h(lambda, p; q) = ((1-|q|^2)/|q-p|^2)^{n/2 + i lambda/h}
  on the ball, solving (h^2(Delta - n^2/4) - lambda^2) E = 0.

Matrix elements <Op_h(a) E_h, E_h>_{L^2(M)} are computed as nested
oscillatory integrals with chart (left) quantization

    (2 pi h)^{-d} Int e^{i(m-m').nu/h} a(m,nu) chi(m') E(m')
                     conj(E(m)) Vol_g(m) dm' dnu dm,

by row-column dense Fourier transforms (the kernel is separable per
dimension even when the integrand is not).  chi is a smooth window equal
to 1 on a padded neighborhood of the symbol support; because every
nu-derivative of the integrand's window corrections vanishes on the
plateau, the window changes the value by O(h^infinity).  On the plane with
left quantization the exact value is Int a(m, lambda xi) dm (Fourier
inversion against the plane wave), which serves as the oracle.

The Weyl convention evaluates a at the midpoint (m+m')/2; on the plane it
reduces to a fully factorized (w, nu) transform, on the ball it falls back
to a per-base-point nested quadrature (coarse h only).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import DomainError, ResolutionError
from .geometry import ModelGeometry
from .measures import mu_xi_value
from .quadrature import QuadratureSpec, composite_gauss
from .schottky import SchottkyGroup
from .symbols import SymbolFunction

MAX_POINTS_PER_DIM = 2600
MIN_POINTS_PER_WAVELENGTH = 6


@dataclass(frozen=True)
class PlaneWaveSpec:
    geometry: ModelGeometry
    xi: np.ndarray
    lam: float = 1.0
    h: float = 0.1

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if abs(np.linalg.norm(xi) - 1.0) > 1e-12:
            raise DomainError("xi must be a unit boundary vector")
        if not 0.5 <= self.lam <= 2.0:
            raise DomainError("lambda must lie in [1/2, 2]")
        if not 0.0 < self.h <= 0.5:
            raise DomainError("h must lie in (0, 1/2]")
        object.__setattr__(self, "xi", xi)


@dataclass(frozen=True)
class QuantizationConvention:
    kind: str = "left"

    def __post_init__(self):
        if self.kind not in ("left", "weyl"):
            raise DomainError("quantization must be 'left' or 'weyl'")


def evaluate_wave(spec: PlaneWaveSpec, m):
    """Exact wave value at base points; |E| = 1 plane, e^{(n/2) phi} ball."""
    m = np.asarray(m, dtype=float)
    geom = spec.geometry
    if geom.is_hyperbolic:
        if np.any(np.sum(m * m, axis=-1) >= 1.0):
            raise DomainError("hyperbolic wave evaluation requires |q| < 1")
        phi = geo.busemann(spec.xi, m)
        return np.exp((geom.n / 2.0 + 1j * spec.lam / spec.h) * phi)
    return np.exp(1j * spec.lam / spec.h * geo.euclid_phase(spec.xi, m))


def wave_pde_residual(spec: PlaneWaveSpec, m, step=2e-3):
    """|(h^2(Delta_g - (n/2)^2 1_hyp) - lambda^2) E| by 4th-order differences."""
    m = np.asarray(m, dtype=float)
    geom = spec.geometry
    c = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    offs = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * step
    lap = np.zeros(m.shape[:-1], dtype=complex)
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = 1.0
        for co, of in zip(c, offs):
            lap = lap + co * evaluate_wave(spec, m + of * e)
    lap = lap / step**2
    E = evaluate_wave(spec, m)
    if geom.is_hyperbolic:
        lam_c = geom.conformal_factor(m)
        # Delta_g = -lambda_c^{-2} Delta_eucl (positive Laplacian), n = 1
        op = spec.h**2 * (-lap / lam_c**2 - E * geom.n**2 / 4.0) - spec.lam**2 * E
    else:
        op = spec.h**2 * (-lap) - spec.lam**2 * E
    return np.abs(op)


# --------------------------------------------------------------------------
# Oscillatory grid machinery.
# --------------------------------------------------------------------------


def _smoothstep(u):
    """C^inf transition: 1 at u <= 0, 0 at u >= 1."""
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        fa = np.where(u > 0.0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
        fb = np.where(u < 1.0, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
    return fb / (fa + fb)


def _window_1d(x, lo, hi, roll):
    """Smooth plateau window: 1 on [lo, hi], rolls to 0 over width roll."""
    up = _smoothstep((lo - x) / roll)
    dn = _smoothstep((x - hi) / roll)
    return up * dn


def _osc_rule(lo, hi, freq, h, min_feature, ppw):
    """Composite Gauss rule resolving e^{i freq x / h} at >= ppw pts/wavelength."""
    length = hi - lo
    cycles = freq * length / (2.0 * np.pi * h)
    n = int(np.ceil(max(ppw * cycles, 8.0 * length / min_feature, 24)))
    if n > MAX_POINTS_PER_DIM:
        raise ResolutionError(
            f"oscillatory rule needs {n} points per dim (> {MAX_POINTS_PER_DIM}); "
            "increase h or shrink the symbol",
            required_points=n,
        )
    return composite_gauss(lo, hi, n, order=12)


def _nu_box(a: SymbolFunction, geom: ModelGeometry):
    if a.nu_box is not None:
        return a.nu_box
    raise ResolutionError(
        "matrix_element needs a chart covector box; build symbols with "
        "chart_symbol (separable, nu_box set)"
    )


def _grad_bound(geom: ModelGeometry, box):
    """max |d phi_xi| chart components over the base box."""
    if not geom.is_hyperbolic:
        return 1.0
    r = max(
        np.hypot(x, y)
        for x in box[0]
        for y in box[1]
    )
    r = min(r, 0.999)
    return float(geom.conformal_factor(np.array([r, 0.0])))


def matrix_element(
    a: SymbolFunction,
    spec: PlaneWaveSpec,
    conv: QuantizationConvention = None,
    quad: QuadratureSpec = None,
    ppw=8,
    window_pad=1.0,
    window_roll=0.8,
    r_window=0.85,
):
    """<Op_h(a) E_h, E_h>_{L^2(M)} by windowed oscillatory quadrature.

    window_pad/window_roll size the smooth cutoff around the symbol support;
    on the ball the window is additionally rolled off radially at r_window,
    where the conformal factor (and hence the wave frequency) is still
    moderate.
    """
    conv = conv or QuantizationConvention("left")
    if ppw < MIN_POINTS_PER_WAVELENGTH:
        raise DomainError(f"points per wavelength must be >= {MIN_POINTS_PER_WAVELENGTH}")
    if a.separable is None:
        raise ResolutionError(
            "matrix_element requires a separable symbol (sum of base x "
            "covector products); use chart_symbol or combine"
        )
    if conv.kind == "left":
        return _matrix_element_left(a, spec, ppw, window_pad, window_roll, r_window)
    if not spec.geometry.is_hyperbolic:
        return _matrix_element_weyl_plane(a, spec, ppw)
    return _matrix_element_weyl_ball(a, spec, ppw, window_pad, window_roll)


def _matrix_element_left(a, spec, ppw, pad, roll, r_window):
    geom, h, lam = spec.geometry, spec.h, spec.lam
    (bx, by) = a.base_box()
    (nx, ny) = _nu_box(a, geom)
    if not geom.is_hyperbolic:
        # window truncation error ~ exp(-(pad nu_feature / h)^2 / 2): keep the
        # exponent >= 6 regardless of h (the plane has room to spare)
        pad = max(pad, 6.0 * h / a.nu_feature)
        roll = max(roll, 0.6 * pad)
    mpx = (bx[0] - pad - roll, bx[1] + pad + roll)
    mpy = (by[0] - pad - roll, by[1] + pad + roll)
    radial_roll = 0.0
    if geom.is_hyperbolic:
        mpx = (max(mpx[0], -r_window), min(mpx[1], r_window))
        mpy = (max(mpy[0], -r_window), min(mpy[1], r_window))
        radial_roll = 0.25 * r_window
    grad_p = _grad_bound(geom, (mpx, mpy)) if not geom.is_hyperbolic else float(
        geom.conformal_factor(np.array([min(r_window, 0.999), 0.0]))
    )
    grad_a = _grad_bound(geom, (bx, by))
    numax = max(abs(nx[0]), abs(nx[1]), abs(ny[0]), abs(ny[1]))
    freq_m = numax + lam * grad_a
    freq_mp = numax + lam * grad_p
    fm = a.min_feature
    gx, wx = _osc_rule(*bx, freq_m, h, fm, ppw)
    gy, wy = _osc_rule(*by, freq_m, h, fm, ppw)
    gxp, wxp = _osc_rule(*mpx, freq_mp, h, fm, ppw)
    gyp, wyp = _osc_rule(*mpy, freq_mp, h, fm, ppw)
    mmax = max(abs(mpx[0]), abs(mpx[1]), abs(mpy[0]), abs(mpy[1]))
    nu_feature = min(nx[1] - nx[0], ny[1] - ny[0]) / 6.0
    gnx, wnx = _osc_rule(*nx, 2.0 * mmax, h, nu_feature, ppw)
    gny, wny = _osc_rule(*ny, 2.0 * mmax, h, nu_feature, ppw)

    # windowed outgoing transform F(nu) = Int e^{-i m'.nu/h} chi E
    MXp, MYp = np.meshgrid(gxp, gyp, indexing="ij")
    chi = _window_1d(MXp, bx[0] - pad, bx[1] + pad, roll) * _window_1d(
        MYp, by[0] - pad, by[1] + pad, roll
    )
    if geom.is_hyperbolic:
        rad = np.hypot(MXp, MYp)
        chi = chi * _window_1d(rad, 0.0, r_window - radial_roll, radial_roll)
        safe = rad < 0.9995
        mp = np.stack([np.where(safe, MXp, 0.0), np.where(safe, MYp, 0.0)], axis=-1)
        Ep = np.where(safe, evaluate_wave(spec, mp), 0.0)
    else:
        mp = np.stack([MXp, MYp], axis=-1)
        Ep = evaluate_wave(spec, mp)
    Ep = Ep * chi * np.outer(wxp, wyp)
    K1 = np.exp(-1j * np.outer(gnx, gxp) / h)
    K2 = np.exp(-1j * np.outer(gny, gyp) / h)
    F = K1 @ Ep @ K2.T

    # base-side transforms per separable term
    MX, MY = np.meshgrid(gx, gy, indexing="ij")
    m = np.stack([MX, MY], axis=-1)
    Em = np.conj(evaluate_wave(spec, m)) * geom.vol_density(m) * np.outer(wx, wy)
    J1 = np.exp(1j * np.outer(gnx, gx) / h)
    J2 = np.exp(1j * np.outer(gny, gy) / h)
    NX, NY = np.meshgrid(gnx, gny, indexing="ij")
    nu_grid = np.stack([NX, NY], axis=-1)
    wn = np.outer(wnx, wny)
    total = 0.0 + 0.0j
    for f_r, g_r in a.separable:
        M = J1 @ (f_r(m) * Em) @ J2.T
        total += np.sum(wn * g_r(nu_grid) * F * M)
    return total / (2.0 * np.pi * h) ** 2


def _matrix_element_weyl_plane(a, spec, ppw, w_extent=5.0, w_plateau=2.8):
    """Weyl on the plane: the (w, nu) transform factorizes completely."""
    geom, h, lam = spec.geometry, spec.h, spec.lam
    w_plateau = max(w_plateau, 6.0 * h / a.nu_feature)
    w_extent = max(w_extent, 1.8 * w_plateau)
    (nx, ny) = _nu_box(a, geom)
    numax = max(abs(v - lam * x) for v, x in
                [(nx[0], spec.xi[0]), (nx[1], spec.xi[0]), (ny[0], spec.xi[1]), (ny[1], spec.xi[1])])
    gwx, wwx = _osc_rule(-w_extent, w_extent, numax, h, w_plateau, ppw)
    gwy, wwy = _osc_rule(-w_extent, w_extent, numax, h, w_plateau, ppw)
    # the w-transform concentrates on an O(h/w_extent) neighborhood of
    # lam xi; the nu rule must resolve that spike
    nu_feature = min(
        min(nx[1] - nx[0], ny[1] - ny[0]) / 6.0, 2.0 * h / w_extent
    )
    gnx, wnx = _osc_rule(*nx, w_extent, h, nu_feature, ppw)
    gny, wny = _osc_rule(*ny, w_extent, h, nu_feature, ppw)
    roll = w_extent - w_plateau
    cw_x = _window_1d(gwx, -w_plateau, w_plateau, roll) * wwx
    cw_y = _window_1d(gwy, -w_plateau, w_plateau, roll) * wwy
    # B(nu) = Int e^{i w.(nu - lam xi)/h} chi_w(w) dw, tensor product
    Bx = np.exp(1j * np.outer(gnx - lam * spec.xi[0], gwx) / h) @ cw_x
    By = np.exp(1j * np.outer(gny - lam * spec.xi[1], gwy) / h) @ cw_y
    NX, NY = np.meshgrid(gnx, gny, indexing="ij")
    nu_grid = np.stack([NX, NY], axis=-1)
    B = np.outer(Bx, By)
    wn = np.outer(wnx, wny)
    (bx, by) = a.base_box()
    gx, wx = composite_gauss(*bx, max(int(16 * (bx[1] - bx[0]) / a.min_feature), 24))
    gy, wy = composite_gauss(*by, max(int(16 * (by[1] - by[0]) / a.min_feature), 24))
    MX, MY = np.meshgrid(gx, gy, indexing="ij")
    u = np.stack([MX, MY], axis=-1)
    wu = np.outer(wx, wy)
    total = 0.0 + 0.0j
    for f_r, g_r in a.separable:
        base = np.sum(wu * f_r(u))
        total += base * np.sum(wn * g_r(nu_grid) * B)
    return total / (2.0 * np.pi * h) ** 2


def _matrix_element_weyl_ball(a, spec, ppw, pad, roll, r_cap=0.8, batch=48):
    """Generic Weyl via (u, w, nu) nested row-column transforms (coarse h)."""
    geom, h, lam = spec.geometry, spec.h, spec.lam
    (bx, by) = a.base_box()
    (nx, ny) = _nu_box(a, geom)
    r_box = max(np.hypot(x, y) for x in bx for y in by)
    if r_box >= r_cap - 0.1:
        raise ResolutionError("symbol support too close to the ball rim for weyl")
    # keep u +- w/2 inside radius r_cap (corners included)
    wex = (r_cap - r_box) * np.sqrt(2.0)
    lam_cap = float(geom.conformal_factor(np.array([r_cap, 0.0])))
    numax = max(abs(v) for v in (*nx, *ny)) + lam * lam_cap
    gwx, wwx = _osc_rule(-wex, wex, numax, h, wex / 2.5, ppw)
    gwy, wwy = _osc_rule(-wex, wex, numax, h, wex / 2.5, ppw)
    nu_feature = min(
        min(nx[1] - nx[0], ny[1] - ny[0]) / 6.0, 2.0 * h / wex
    )
    gnx, wnx = _osc_rule(*nx, wex, h, nu_feature, ppw)
    gny, wny = _osc_rule(*ny, wex, h, nu_feature, ppw)
    # the u-oscillation of the w-transform is the gradient difference over
    # the w extent, bounded by 2 lam lam_cap
    freq_u = 2.0 * lam * lam_cap
    gx, wx = _osc_rule(*bx, freq_u, h, a.min_feature, ppw)
    gy, wy = _osc_rule(*by, freq_u, h, a.min_feature, ppw)
    cost = len(gx) * len(gy) * len(gwx) * len(gwy)
    if cost > 1e10:
        raise ResolutionError(
            f"weyl quadrature on the ball needs ~{cost:.1e} kernel evaluations; "
            "use a larger h",
            required_points=int(cost),
        )
    wplat = 0.55 * wex
    cw = (
        _window_1d(gwx, -wplat, wplat, wex - wplat)[:, None]
        * _window_1d(gwy, -wplat, wplat, wex - wplat)[None, :]
        * np.outer(wwx, wwy)
    )
    K1 = np.exp(1j * np.outer(gnx, gwx) / h)
    K2 = np.exp(1j * np.outer(gny, gwy) / h)
    NX, NY = np.meshgrid(gnx, gny, indexing="ij")
    nu_grid = np.stack([NX, NY], axis=-1)
    wn = np.outer(wnx, wny)
    WX, WY = np.meshgrid(gwx, gwy, indexing="ij")
    upts = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    wu = np.outer(wx, wy).ravel()
    gw = {g_r: wn * g_r(nu_grid) for _, g_r in a.separable}
    total = 0.0 + 0.0j
    for start in range(0, len(upts), batch):
        ub = upts[start : start + batch]
        mplus = np.stack(
            [ub[:, None, None, 0] + WX / 2.0, ub[:, None, None, 1] + WY / 2.0], axis=-1
        )
        mminus = np.stack(
            [ub[:, None, None, 0] - WX / 2.0, ub[:, None, None, 1] - WY / 2.0], axis=-1
        )
        G = (
            evaluate_wave(spec, mminus)
            * np.conj(evaluate_wave(spec, mplus))
            * geom.vol_density(mplus)
            * cw[None]
        )
        K = np.einsum("ab,nbc,dc->nad", K1, G, K2, optimize=True)
        for f_r, g_r in a.separable:
            fu = f_r(ub)
            total += np.sum(wu[start : start + len(ub)] * fu * np.sum(gw[g_r][None] * K, axis=(1, 2)))
    return total / (2.0 * np.pi * h) ** 2


def exact_matrix_element_plane_left(a: SymbolFunction, spec: PlaneWaveSpec, points=96):
    """Oracle: Op_h(a) e^{i lam xi.m/h} = a(m, lam xi) e^{...}, so the matrix
    element is Int a(m, lam xi) dm exactly (left quantization, flat plane)."""
    (bx, by) = a.base_box()
    gx, wx = composite_gauss(*bx, points)
    gy, wy = composite_gauss(*by, points)
    MX, MY = np.meshgrid(gx, gy, indexing="ij")
    m = np.stack([MX, MY], axis=-1)
    nu = np.broadcast_to(spec.lam * spec.xi, m.shape).copy()
    return complex(np.sum(np.outer(wx, wy) * a(m, nu)))


# --------------------------------------------------------------------------
# Weyl-law leading term.
# --------------------------------------------------------------------------


def weyl_leading_term(a: SymbolFunction, s, h, n=1, points=64):
    """(2 pi h)^{-n-1} Int_{|nu|^2 <= s} a dm dnu by polar-in-nu quadrature."""
    if s <= 0:
        raise DomainError("energy threshold s must be positive")
    (bx, by) = a.base_box()
    gx, wx = composite_gauss(*bx, points)
    gy, wy = composite_gauss(*by, points)
    rr, wr = composite_gauss(0.0, np.sqrt(s), points)
    th = np.linspace(0.0, 2.0 * np.pi, 2 * points, endpoint=False)
    wth = 2.0 * np.pi / len(th)
    MX, MY = np.meshgrid(gx, gy, indexing="ij")
    m = np.stack([MX, MY], axis=-1)
    wm = np.outer(wx, wy)
    total = 0.0
    for r, wri in zip(rr, wr):
        for t in th:
            nu = np.broadcast_to(np.array([r * np.cos(t), r * np.sin(t)]), m.shape).copy()
            total += wri * wth * r * float(np.sum(wm * a(m, nu).real))
    return total / (2.0 * np.pi * h) ** (n + 1)


def free_trace_oracle(a: SymbolFunction, s, h, n=1, points=48):
    """Exact free-space trace (2 pi h)^{-n-1} Int_{|nu|^2 <= s} a dm dnu, via
    the energy substitution u = |nu|^2 and swapped integration order."""
    if s <= 0:
        raise DomainError("energy threshold s must be positive")
    (bx, by) = a.base_box()
    gu, wu = composite_gauss(0.0, s, points + 17, order=10)
    th, wth = composite_gauss(0.0, 2.0 * np.pi, 2 * points + 11, order=10)
    gx, wx = composite_gauss(*bx, points + 9, order=10)
    gy, wy = composite_gauss(*by, points + 9, order=10)
    MX, MY = np.meshgrid(gx, gy, indexing="ij")
    m = np.stack([MX, MY], axis=-1)
    wm = np.outer(wx, wy)
    total = 0.0
    for u, wui in zip(gu, wu):
        r = np.sqrt(u)
        for t, wt in zip(th, wth):
            nu = np.broadcast_to(np.array([r * np.cos(t), r * np.sin(t)]), m.shape).copy()
            total += 0.5 * wui * wt * float(np.sum(wm * a(m, nu).real))
    return total / (2.0 * np.pi * h) ** (n + 1)


# --------------------------------------------------------------------------
# h-convergence study.
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    matrix_element: complex
    mu_xi_value: float
    abs_error: float


@dataclass(frozen=True)
class ConvergenceStudy:
    rows: tuple
    fitted_order: float
    saturated: bool
    reference: float


def convergence_study(
    a: SymbolFunction,
    geom: ModelGeometry,
    xi,
    h_list,
    conv: QuantizationConvention = None,
    quad: QuadratureSpec = None,
    lam=1.0,
    grp: SchottkyGroup = None,
    saturation_floor=1e-9,
):
    """Matrix elements against mu_xi(a) over decreasing h with a fitted order.

    When every error sits at the quadrature floor the fit is meaningless;
    the study is then flagged saturated (exact-identity regimes).
    """
    h_list = list(h_list)
    if len(h_list) < 4 or any(b >= a_ for a_, b in zip(h_list, h_list[1:])):
        raise DomainError("need >= 4 strictly decreasing h values")
    conv = conv or QuantizationConvention("left")
    grp = grp or SchottkyGroup.trivial()
    ref = mu_xi_value(geom, grp, xi, a, quad=quad)
    rows = []
    for h in h_list:
        spec = PlaneWaveSpec(geom, np.asarray(xi, dtype=float), lam=lam, h=h)
        me = matrix_element(a, spec, conv=conv)
        rows.append(
            ConvergenceRow(
                h=h,
                matrix_element=me,
                mu_xi_value=ref.value,
                abs_error=abs(me - ref.value),
            )
        )
    errs = np.array([r.abs_error for r in rows])
    scale = max(abs(ref.value), 1e-30)
    saturated = bool(np.all(errs <= saturation_floor * scale + 10.0 * ref.error_bound))
    if saturated:
        order = float("nan")
    else:
        A = np.vstack([np.log(h_list), np.ones(len(h_list))]).T
        coef, _, _, _ = np.linalg.lstsq(A, np.log(np.maximum(errs, 1e-300)), rcond=None)
        order = float(coef[0])
    return ConvergenceStudy(
        rows=tuple(rows), fitted_order=order, saturated=saturated, reference=ref.value
    )

"""The limiting measures mu~_xi and mu_xi and their identities.

The pre-limit measure integrates the outgoing density over the chart:

    integral a d(mu~_xi) = integral_{U+} |b0|^2 a(tau(m, xi)) Vol(m),

with |b0|^2 = 1 on the plane and e^{n phi_xi(m)} on the ball.  The limit
measure is the monotone backward-flow limit

    integral a d(mu_xi) = lim_t integral (a o g^{-t}) d(mu~_xi),

computed two independent ways on hyperbolic quotients:

* pushforward route: the change of variables m -> flow(m) turns the
  integral into a group sum with flow-saturation indicators; on a horoball
  chart {phi_xi >= c} the indicator is 1[phi_xi(gamma^{-1} m) >= c - t]
  exactly (phi_xi grows at unit speed along its own gradient flow), so the
  t-sequence is exactly monotone for a >= 0.
* group-sum route: the converging series
  integral_F sum_gamma a(m, dphi_{gamma xi}(m))
      e^{n(phi_{gamma xi}(m) + log |dgamma(xi)|)} Vol(m)
  truncated by word length with a geometric shell tail bound.

The routes share quadrature nodes but compute the weights independently
(direct Busemann evaluation at gamma^{-1} m versus the cocycle-factored
product), so their agreement exercises the cocycle identity
e^{n phi_xi(gamma^{-1} m)} = e^{n phi_{gamma xi}(m)} |dgamma(xi)|^n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import DomainError, PrecisionError
from .geometry import ModelGeometry
from .quadrature import QuadratureSpec, tensor_grid
from .schottky import (
    SchottkyGroup,
    boundary_gap_to_limit_set,
    reduce_boundary,
    reduce_frames,
)
from .symbols import SymbolFunction

WORD_LEN_CAP = 40


@dataclass(frozen=True)
class MeasureValue:
    value: float
    error_bound: float
    t_used: float = None
    word_len_used: int = None
    converged: bool = True
    t_curve: tuple = None

    def __post_init__(self):
        if self.error_bound < 0:
            raise DomainError("error bound must be nonnegative")


@dataclass(frozen=True)
class DisintegrationResult:
    lhs: float
    rhs: float
    gap: float
    sigma: float
    quad_bound: float
    dropped_fraction: float


def _nodes(a: SymbolFunction, quad: QuadratureSpec, pad=0.0, points=None, geom=None):
    box = a.base_box(pad)
    n = points or quad.points_per_dim
    # keep the node density tied to the symbol's feature scale, so enlarged
    # boxes (flowed observables) stay resolved
    extent = max(box[0][1] - box[0][0], box[1][1] - box[1][0])
    n = int(min(max(n, np.ceil(n * extent / (2.0 * a.min_feature))), 1200))
    m, w = tensor_grid(box, n)
    if geom is not None and geom.is_hyperbolic:
        # quadrature boxes may poke outside the ball; the symbol support is
        # compactly inside, so those nodes carry no mass
        keep = np.sum(m * m, axis=-1) < 0.999**2
        m, w = m[keep], w[keep]
    return m, w


def _chart_indicator(geom: ModelGeometry, m, nu):
    """Directly-escaping chart: x <= epsilon0 and xdot <= 0."""
    return (geom.bdf(m) <= geom.epsilon0) & (geom.bdf_dot(m, nu) <= 0.0)


# --------------------------------------------------------------------------
# mu~_xi
# --------------------------------------------------------------------------


def mu_tilde_integral(geom: ModelGeometry, xi, a: SymbolFunction, quad=None):
    """Chart integral of |b0|^2 a(tau(m, xi)) over the directly escaping region."""
    quad = quad or QuadratureSpec()
    xi = np.asarray(xi, dtype=float)

    def run(points):
        m, w = _nodes(a, quad, points=points, geom=geom)
        nu = geom.phase_gradient(xi, m)
        ind = _chart_indicator(geom, m, nu)
        if not np.any(ind):
            return 0.0, True
        dens = np.exp(geom.n * geom.phase(xi, m)) if geom.is_hyperbolic else 1.0
        vals = a(m, nu) * dens * geom.vol_density(m) * w * ind
        return float(np.sum(vals)), False

    v_hi, empty = run(quad.points_per_dim)
    if empty:
        return MeasureValue(0.0, 0.0)
    if quad.scheme == "adaptive":
        v_lo, _ = run(max(quad.points_per_dim * 2 // 3, 8))
        err = abs(v_hi - v_lo)
    else:
        err = quad.tolerance
    return MeasureValue(v_hi, err)


# --------------------------------------------------------------------------
# mu_xi: pushforward route
# --------------------------------------------------------------------------


def _horoball_level(grp: SchottkyGroup, xi):
    """Horoball chart level c at xi, with the horoball kept inside the
    fundamental domain (disjoint from every Schottky disk)."""
    xi_c = complex(xi[0], xi[1])
    diam = 0.3
    for _ in range(40):
        center = (1.0 - diam / 2.0) * xi_c
        ok = all(
            abs(center - d.center) - diam / 2.0 - d.radius > 0.0 for d in grp.disks
        )
        if ok:
            return float(np.log(2.0 / diam - 1.0))
        diam /= 2.0
    raise PrecisionError("xi too close to the limit set for a horoball chart")


def mu_xi_pushforward(
    geom: ModelGeometry,
    grp: SchottkyGroup,
    xi,
    a: SymbolFunction,
    quad=None,
    t_max=40.0,
    t_step=1.0,
    tol=1e-6,
):
    """Backward-pushforward limit of mu~_xi evaluated on an increasing t grid.

    Stops once three consecutive increments fall below tol (1 + |value|);
    a non-converged result is returned flagged rather than raised.
    """
    quad = quad or QuadratureSpec()
    xi = np.asarray(xi, dtype=float)
    t_grid = np.arange(0.0, t_max + 1e-9, t_step)

    def run(points):
        m, w = _nodes(a, quad, geom=geom, points=points)
        vold = geom.vol_density(m)
        if grp.rank == 0:
            nu = geom.phase_gradient(xi, m)
            dens = np.exp(geom.n * geom.phase(xi, m)) if geom.is_hyperbolic else 1.0
            base = a(m, nu).real * dens * vold * w
            vals = []
            for t in t_grid:
                mt, nut = geo.geodesic(geom, m, nu, np.asarray(t))
                ind = _chart_indicator(geom, mt, nut)
                vals.append(float(np.sum(base * ind)))
                if _stabilized(vals, tol):
                    break
            return vals
        if not geom.is_hyperbolic:
            raise DomainError("quotient measures require the hyperbolic model")
        # the series integrates over the fundamental domain only
        w = w * grp.in_fundamental_domain(m)
        c = _horoball_level(grp, xi)
        vals = np.zeros(len(t_grid))
        letters, mats, _ = grp.shells(WORD_LEN_CAP, budget=200_000)
        dead_shells = 0
        for shell_mats in mats:
            shell_contrib = np.zeros(len(t_grid))
            for mat in shell_mats:
                iso = geo.Isometry.from_matrix(mat)
                gxi = iso.boundary_action(xi)
                nu = geom.phase_gradient(gxi, m)
                minv = iso.inverse().apply(m)
                phi_inv = geo.busemann(xi, minv)
                term = a(m, nu).real * np.exp(geom.n * phi_inv) * vold * w
                for i, t in enumerate(t_grid):
                    shell_contrib[i] += float(np.sum(term * (phi_inv >= c - t)))
            vals += shell_contrib
            if np.all(np.abs(shell_contrib) < 0.25 * tol):
                dead_shells += 1
                if dead_shells >= 2:
                    break
            else:
                dead_shells = 0
        out = []
        for v in vals:  # truncate the reported curve at stabilization
            out.append(float(v))
            if _stabilized(out, tol):
                break
        return out

    vals = run(quad.points_per_dim)
    if quad.scheme == "adaptive":
        lo = run(max(quad.points_per_dim * 2 // 3, 8))
        quad_err = abs(vals[-1] - lo[-1])
    else:
        quad_err = quad.tolerance
    increments = np.abs(np.diff(vals)) if len(vals) > 1 else np.array([np.inf])
    converged = _stabilized(vals, tol)
    last_inc = float(increments[-1]) if len(vals) > 1 else float("inf")
    return MeasureValue(
        value=float(vals[-1]),
        error_bound=(last_inc if converged else max(last_inc, tol)) + quad_err,
        t_used=float(t_grid[len(vals) - 1]),
        converged=converged,
        t_curve=tuple(vals),
    )


def _stabilized(vals, tol):
    if len(vals) < 4:
        return False
    scale = 1.0 + abs(vals[-1])
    return all(
        abs(vals[-k] - vals[-k - 1]) < tol * scale for k in (1, 2, 3)
    )


# --------------------------------------------------------------------------
# mu_xi: group-sum route
# --------------------------------------------------------------------------


def mu_xi_group_sum(
    grp: SchottkyGroup,
    xi,
    a: SymbolFunction,
    max_word_len=12,
    quad=None,
    validate_xi=True,
    geom=None,
):
    """Truncated Appendix-series value of mu_xi(a) with a geometric tail bound."""
    quad = quad or QuadratureSpec()
    geom = geom or ModelGeometry.hyperbolic_ball()
    xi = np.asarray(xi, dtype=float)
    if validate_xi and grp.rank > 0:
        gap = boundary_gap_to_limit_set(grp, xi, depth=min(6, max(2, max_word_len // 2)))
        if gap <= 0:
            raise PrecisionError("xi lies in the refined limit-set cover")

    def run(points):
        m, w = _nodes(a, quad, points=points, geom=geom)
        if grp.rank > 0:
            w = w * grp.in_fundamental_domain(m)
        vold = geom.vol_density(m)
        letters, mats, _ = grp.shells(max_word_len)
        total = 0.0
        shell_mags = []
        for shell_mats in mats:
            mag = 0.0
            for mat in shell_mats:
                iso = geo.Isometry.from_matrix(mat)
                gxi = iso.boundary_action(xi)
                dnorm = float(iso.boundary_derivative_norm(xi))
                nu = geom.phase_gradient(gxi, m)
                weight = np.exp(geom.n * (geo.busemann(gxi, m) + np.log(dnorm)))
                term = float(np.sum(a(m, nu).real * weight * vold * w))
                total += term
                mag += abs(term)
            shell_mags.append(mag)
        return total, np.array(shell_mags)

    total, mags = run(quad.points_per_dim)
    tail = _shell_tail_bound(mags)
    if quad.scheme == "adaptive":
        lo, _ = run(max(quad.points_per_dim * 2 // 3, 8))
        quad_err = abs(total - lo)
    else:
        quad_err = quad.tolerance
    return MeasureValue(
        value=total,
        error_bound=tail + quad_err,
        word_len_used=len(mags) - 1,
    )


def _shell_tail_bound(mags):
    if len(mags) == 1:
        return 0.0  # trivial group: the series is the single term
    nz = np.nonzero(mags)[0]
    if len(nz) == 0 or nz[-1] < len(mags) - 2:
        return 0.0  # series terminated (supports died out)
    if len(mags) < 3:
        raise PrecisionError("need at least 2 shells for a tail bound")
    tail_ratios = mags[-2:] / np.maximum(mags[-3:-1], 1e-300)
    rho = float(np.max(tail_ratios))
    if rho >= 0.95:
        raise PrecisionError(
            f"shell {len(mags) - 1} decays too slowly (ratio {rho:.3f}); "
            "xi is too close to the limit set or max_word_len too small"
        )
    return float(mags[-1] * rho / (1.0 - rho))


def mu_xi_value(geom: ModelGeometry, grp: SchottkyGroup, xi, a, quad=None, **kw):
    """Default route to mu_xi(a): direct integral on the plane, group sum on
    hyperbolic quotients (single term for the trivial group)."""
    quad = quad or QuadratureSpec()
    if not geom.is_hyperbolic:
        xi = np.asarray(xi, dtype=float)

        def run(points):
            m, w = _nodes(a, quad, points=points, geom=geom)
            return float(np.sum(a(m, np.broadcast_to(xi, m.shape).copy()).real * w))

        hi = run(quad.points_per_dim)
        lo = run(max(quad.points_per_dim * 2 // 3, 8))
        return MeasureValue(hi, abs(hi - lo))
    return mu_xi_group_sum(grp, xi, a, quad=quad, geom=geom, **kw)


# --------------------------------------------------------------------------
# Identities: flow invariance and disintegration.
# --------------------------------------------------------------------------


def flowed_symbol(geom: ModelGeometry, grp: SchottkyGroup, a: SymbolFunction, t):
    """The observable a o g^t (flow, reduce, evaluate), with enlarged support."""

    def ev(m, nu):
        if geom.is_hyperbolic:
            frames = geo.phase_to_frame(m, nu, geom)
            flowed = geo.flow_frame(frames, np.asarray(float(t)))
            red, _ = reduce_frames(grp, flowed)
            mt, nut = geo.frame_to_phase(red, geom)
        else:
            mt, nut = geo.geodesic(geom, m, nu, np.asarray(float(t)))
        return a(mt, nut)

    if geom.is_hyperbolic:
        c = a.support_center
        d0 = float(geo.hyp_distance(np.zeros(2), c)) if np.linalg.norm(c) > 0 else 0.0
        r_hyp = float(
            geo.hyp_distance(c, c + np.array([a.support_radius * 0.999, 0.0]))
        )
        # re-canonicalization after crossing a disk can move the
        # representative by up to one generator translation length
        pad = grp.max_translation_length()
        reach = np.tanh((d0 + r_hyp + abs(float(t)) + pad) / 2.0)
        center, radius = np.zeros(2), reach
    else:
        center, radius = a.support_center, a.support_radius + abs(float(t))
    squeeze = np.exp(-abs(float(t))) if geom.is_hyperbolic else 1.0
    return SymbolFunction(
        evaluate=ev,
        support_center=center,
        support_radius=float(radius),
        nu_shell=a.nu_shell,
        nu_angle=None,
        sup_norm=a.sup_norm,
        smoothness=a.smoothness,
        separable=None,
        geometry=a.geometry,
        min_feature=a.min_feature * squeeze,  # stable-direction compression
    )


def check_invariance(geom, grp, xi, a, t, quad=None, **kw):
    """Both sides of the flow invariance of mu_xi; returns (lhs, rhs, gap)."""
    quad = quad or QuadratureSpec()
    rhs = mu_xi_pushforward(geom, grp, xi, a, quad=quad, **kw)
    if float(t) == 0.0:
        return rhs.value, rhs.value, 0.0, rhs.error_bound + rhs.error_bound
    lhs = mu_xi_pushforward(geom, grp, xi, flowed_symbol(geom, grp, a, t), quad=quad, **kw)
    gap = lhs.value - rhs.value
    return lhs.value, rhs.value, gap, lhs.error_bound + rhs.error_bound


def check_disintegration(
    geom: ModelGeometry,
    grp: SchottkyGroup,
    a: SymbolFunction,
    f,
    f_support,
    quad=None,
    mc_samples=100_000,
    seed=0,
    t_escape=30.0,
    xi_points=24,
):
    """Check integral f(xi) mu_xi(a) dxi = integral f(xi_+inf) a dmu_L.

    f is a function of the boundary angle, supported in f_support =
    (angle_lo, angle_hi) inside one fundamental boundary arc.  The left side
    uses boundary quadrature over mu_xi values; the right side is Liouville
    Monte Carlo with endpoints computed by flowing to t_escape, reducing,
    and reading off the closed-form endpoint (never-escaped samples are
    dropped and reported).
    """
    quad = quad or QuadratureSpec()
    from .quadrature import composite_gauss

    th, wth = composite_gauss(f_support[0], f_support[1], xi_points, order=12)
    if grp.rank > 0:
        # validate the whole xi arc against the limit-set cover once
        worst = min(
            boundary_gap_to_limit_set(grp, np.array([np.cos(t0), np.sin(t0)]), depth=4)
            for t0 in (f_support[0], f_support[1], 0.5 * (f_support[0] + f_support[1]))
        )
        if worst <= 0:
            raise PrecisionError("f support arc meets the refined limit-set cover")
    lhs = 0.0
    quad_bound = 0.0
    for angle, wt in zip(th, wth):
        xi = np.array([np.cos(angle), np.sin(angle)])
        mv = mu_xi_value(geom, grp, xi, a, quad=quad, validate_xi=False)
        lhs += wt * f(angle) * mv.value
        quad_bound += abs(wt * f(angle)) * mv.error_bound

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 17]))
    (x0b, x1b), (y0b, y1b) = a.base_box()
    if geom.is_hyperbolic and (max(abs(x0b), abs(x1b)) ** 2 + max(abs(y0b), abs(y1b)) ** 2) >= 1.0:
        raise DomainError("symbol base box must lie inside the unit ball")
    m = np.stack(
        [rng.uniform(x0b, x1b, mc_samples), rng.uniform(y0b, y1b, mc_samples)], axis=-1
    )
    ang = rng.uniform(0.0, 2.0 * np.pi, mc_samples)
    nu = geom.unit_covector(m, ang)
    area_box = (x1b - x0b) * (y1b - y0b)
    dropped = 0.0
    if geom.is_hyperbolic:
        frames = geo.phase_to_frame(m, nu, geom)
        flowed = geo.flow_frame(frames, np.asarray(float(t_escape)))
        red, _ = reduce_frames(grp, flowed)
        mt, _ = geo.frame_to_phase(red, geom)
        escaped = geom.bdf(mt) < 0.5 * geom.epsilon0
        ends = geo.frame_endpoint(red)
        ends_red, ok = reduce_boundary(grp, ends)
        good = escaped & ok
        dropped = 1.0 - float(np.mean(good))
        theta_end = np.angle(ends_red)
        vals = np.where(good, f(theta_end) * a(m, nu).real * geom.vol_density(m), 0.0)
    else:
        theta_end = np.arctan2(nu[..., 1], nu[..., 0])
        vals = f(theta_end) * a(m, nu).real
    # sampling density: uniform box (1/area_box) x uniform fiber angle (1/2pi)
    scale = area_box * 2.0 * np.pi
    rhs = float(np.mean(vals)) * scale
    sigma = float(np.std(vals) / np.sqrt(mc_samples)) * scale
    return DisintegrationResult(
        lhs=lhs,
        rhs=rhs,
        gap=lhs - rhs,
        sigma=sigma,
        quad_bound=quad_bound,
        dropped_fraction=dropped,
    )

"""Geodesic flow on quotients: trapped-set measures, escape rates, maximal
expansion rate, and the interpolated remainder r(h, Lambda).

The trapped set at time t is
    T(t) = {(m, nu) in S*M | m in K0, pi(g^t(m, nu)) in K0},
with K0 a compact geodesically convex core.  Hyperbolic cores are metric
tubes {dist(., convex core) <= rho}: the distance to a convex set is convex
along geodesics, so trajectories that leave never return.  The convex core
is approximated by the intersection of half-plane neighborhoods over the
gap geodesics of a depth-limited limit-set sample; for a cyclic group this
is exactly the tube around the translation axis.

Escape-rate identities in constant curvature: Q = P(J^u) = h_top - n and
h_top = delta, so Q = delta - n; the maximal expansion rate is 1.  The flow
differential is exact in the matrix-frame trivialization (adjoint action),
with operator norm e^{|t|} hyperbolic and (|t| + sqrt(t^2+4))/2 Euclidean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import (
    ConfigurationError,
    DomainError,
    ExtrapolationError,
    InsufficientSignalError,
)
from .geometry import EUCLIDEAN_PLANE, HYPERBOLIC_BALL, ModelGeometry
from .schottky import SchottkyGroup, limit_set_sample, reduce_frames

SAMPLE_CHUNK = 200_000


@dataclass(frozen=True)
class TrappedMeasureCurve:
    """Seeded Monte Carlo estimates of mu_L(T(t)) on a time grid."""

    times: np.ndarray
    estimates: np.ndarray
    stderrs: np.ndarray
    n_surviving: np.ndarray
    n_samples: int
    seed: int
    mu_core: float  # mu_L(S*K0) used as the t=0 normalization

    def __post_init__(self):
        for name in ("times", "estimates", "stderrs", "n_surviving"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


@dataclass(frozen=True)
class EscapeFit:
    """Weighted least-squares slope of log mu_L(T(t)) over a fit window."""

    Q: float
    stderr: float
    fit_window: tuple
    n_points: int = 0


class CompactCore:
    """Geodesically convex compact core K0 with a Liouville sampler on S*K0."""

    def __init__(self, geometry: ModelGeometry, group: SchottkyGroup = None,
                 tube_radius=1.0, radius=1.0, hull_depth=4):
        self.geometry = geometry
        self.group = group if group is not None else SchottkyGroup.trivial()
        self.tube_radius = float(tube_radius)
        self.radius = float(radius)
        self.hull_depth = int(hull_depth)
        if geometry.is_hyperbolic:
            if self.group.rank == 0:
                raise ConfigurationError(
                    "hyperbolic cores need a nonelementary or cyclic group; "
                    "the free plane has an empty trapped set"
                )
            self._build_gap_geodesics()
            self._calibrate_proposal()

    @classmethod
    def euclidean(cls, radius=1.0, n=1):
        return cls(ModelGeometry.euclidean_plane(n=n, radius=radius), radius=radius)

    @classmethod
    def hyperbolic(cls, group, tube_radius=1.0, hull_depth=4, epsilon0=1.0):
        return cls(
            ModelGeometry.hyperbolic_ball(epsilon0=epsilon0),
            group=group,
            tube_radius=tube_radius,
            hull_depth=hull_depth,
        )

    # -- hyperbolic core construction ---------------------------------------

    def _build_gap_geodesics(self):
        pts = limit_set_sample(self.group, self.hull_depth)
        ang = np.unique(np.round(np.angle(geo.as_complex(pts)), 10))
        # drop zero-width gaps from near-duplicate sample points
        keep = np.append(np.diff(ang) > 1e-8, True)
        ang = ang[keep]
        pairs = np.stack([ang, np.roll(ang, -1)], axis=1)
        centers, radii, dirs = [], [], []
        for a1, a2 in pairs:
            p1 = geo.as_vec(np.exp(1j * a1))
            p2 = geo.as_vec(np.exp(1j * a2))
            c, r = geo.geodesic_between(p1, p2)
            if c is None:
                centers.append(0.0 + 0.0j)
                radii.append(-1.0)  # marker: diameter
                dirs.append(r)
            else:
                centers.append(complex(c))
                radii.append(float(r))
                dirs.append(0.0 + 0.0j)
        self._gap_centers = np.array(centers)
        self._gap_radii = np.array(radii)
        self._gap_dirs = np.array(dirs)
        self._sinh_rho = np.sinh(self.tube_radius)

    def _membership_reduced(self, w):
        """Tube membership for reduced complex base points, vectorized."""
        den = 1.0 - np.abs(w) ** 2
        ok = np.ones(w.shape, dtype=bool)
        for c, r, u in zip(self._gap_centers, self._gap_radii, self._gap_dirs):
            if r < 0:
                sd = 2.0 * (np.conj(u) * w).imag / den
            else:
                sd = (r * r - np.abs(w - c) ** 2) / (r * den)
            ok &= sd <= self._sinh_rho
        return ok

    def _calibrate_proposal(self):
        """Circumradius of the reduced core region, for the rejection sampler."""
        rr = np.linspace(0.0, 0.999, 160)
        th = np.linspace(0.0, 2.0 * np.pi, 256, endpoint=False)
        w = (rr[:, None] * np.exp(1j * th)[None, :]).ravel()
        frames = geo.phase_to_frame(geo.as_vec(w), self.geometry.unit_covector(geo.as_vec(w), 0.0))
        red, _ = reduce_frames(self.group, frames)
        wred, _ = geo.frame_base_tangent(red)
        member = self._membership_reduced(wred)
        if not np.any(member):
            raise ConfigurationError("empty compact core; increase tube_radius")
        dmax = np.max(geo.hyp_distance(np.zeros(2), geo.as_vec(wred[member])))
        self.proposal_radius = float(dmax + 0.3)

    # -- membership on quotient phase points ---------------------------------

    def contains_frames(self, frames):
        """Quotient membership of the base points of a frame array."""
        red, _ = reduce_frames(self.group, frames)
        w, _ = geo.frame_base_tangent(red)
        return self._membership_reduced(w)

    def contains(self, m, nu=None):
        if self.geometry.is_hyperbolic:
            ang = np.zeros(np.asarray(m, dtype=float).shape[:-1])
            cov = self.geometry.unit_covector(m, ang) if nu is None else nu
            frames = geo.phase_to_frame(m, cov)
            return self.contains_frames(frames)
        m = np.asarray(m, dtype=float)
        return np.sqrt(np.sum(m * m, axis=-1)) <= self.radius

    # -- Liouville sampling ---------------------------------------------------

    def sample_phase(self, n, rng):
        """Liouville-uniform samples on S*K0.

        Returns (samples, area): samples are frames (hyperbolic) or an
        (m, nu) array pair (Euclidean); area is the base area of K0 (exact
        for Euclidean disks, the acceptance-calibrated estimate for tubes).
        """
        if self.geometry.is_hyperbolic:
            return self._sample_hyperbolic(n, rng)
        r = self.radius * np.sqrt(rng.random(n))
        th = rng.uniform(0.0, 2.0 * np.pi, n)
        m = np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
        ang = rng.uniform(0.0, 2.0 * np.pi, n)
        nu = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        return (m, nu), np.pi * self.radius**2

    def _sample_hyperbolic(self, n, rng):
        """Rejection from a hyperbolic disk of radius proposal_radius.

        Only canonical representatives (empty reduction word) are accepted,
        so every quotient point is counted exactly once and the acceptance
        fraction estimates the quotient area of K0.
        """
        R = self.proposal_radius
        area_prop = 2.0 * np.pi * (np.cosh(R) - 1.0)
        out = []
        n_prop = 0
        n_acc = 0
        floor_checked = False
        while n_acc < n:
            k = max(4 * (n - n_acc), 10_000)
            u = rng.random(k)
            rh = np.arccosh(1.0 + u * (np.cosh(R) - 1.0))
            th = rng.uniform(0.0, 2.0 * np.pi, k)
            w = np.tanh(rh / 2.0) * np.exp(1j * th)
            ang = rng.uniform(0.0, 2.0 * np.pi, k)
            m = geo.as_vec(w)
            frames = geo.phase_to_frame(m, self.geometry.unit_covector(m, ang))
            red, nletters = reduce_frames(self.group, frames)
            wred, _ = geo.frame_base_tangent(red)
            member = (nletters == 0) & self._membership_reduced(wred)
            n_prop += k
            n_acc += int(np.sum(member))
            out.append(frames[member])
            if not floor_checked and n_prop >= 50_000:
                floor_checked = True
                if n_acc / n_prop < 1e-3:
                    raise ConfigurationError(
                        f"rejection efficiency {n_acc / n_prop:.2e} below floor for "
                        f"core (tube_radius={self.tube_radius})"
                    )
        area = area_prop * n_acc / n_prop
        frames = np.concatenate(out, axis=0)[:n]
        return frames, area


def quotient_flow(grp: SchottkyGroup, geom: ModelGeometry, m, nu, t):
    """Exact flow followed by reduction to the fundamental domain."""
    if not geom.is_hyperbolic:
        return geo.geodesic(geom, m, nu, np.asarray(t, dtype=float))
    frames = geo.phase_to_frame(m, nu, geom)
    flowed = geo.flow_frame(frames, np.asarray(t, dtype=float))
    red, _ = reduce_frames(grp, flowed)
    return geo.frame_to_phase(red, geom)


def _curve_chunk(core, t_grid, k, seed, chunk_id):
    """Survival counts for one deterministic worker chunk."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), chunk_id]))
    counts = np.zeros(len(t_grid), dtype=np.int64)
    samples, area = core.sample_phase(k, rng)
    if core.geometry.is_hyperbolic:
        for i, t in enumerate(t_grid):
            flowed = geo.flow_frame(samples, np.asarray(t))
            counts[i] += int(np.sum(core.contains_frames(flowed)))
    else:
        m, nu = samples
        for i, t in enumerate(t_grid):
            counts[i] += int(np.sum(core.contains(m + t * nu)))
    return counts, area, k


def trapped_measure_curve(core: CompactCore, t_grid, n_samples, seed, threads=1):
    """Monte Carlo curve of mu_L(T(t)) over t_grid, deterministic per seed.

    The sample index space is split into fixed chunks, each with an RNG
    stream derived from (seed, chunk index); results are merged in chunk
    order, so the output is independent of the thread count.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0):
        raise DomainError("trapped-set times must be >= 0")
    if n_samples < 1_000:
        raise DomainError("need at least 1e3 samples")
    sizes = []
    done = 0
    while done < n_samples:
        k = min(SAMPLE_CHUNK, n_samples - done)
        sizes.append(k)
        done += k
    if threads and threads > 1 and len(sizes) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            results = list(
                pool.map(
                    lambda ck: _curve_chunk(core, t_grid, ck[1], seed, ck[0]),
                    enumerate(sizes),
                )
            )
    else:
        results = [_curve_chunk(core, t_grid, k, seed, i) for i, k in enumerate(sizes)]
    counts = np.sum([r[0] for r in results], axis=0)
    area = float(np.sum([r[1] * r[2] for r in results]) / n_samples)
    mu_core = 2.0 * np.pi * area
    p = counts / n_samples
    est = mu_core * p
    stderr = mu_core * np.sqrt(np.maximum(p * (1.0 - p), 0.0) / n_samples)
    return TrappedMeasureCurve(
        times=t_grid,
        estimates=est,
        stderrs=stderr,
        n_surviving=counts.astype(float),
        n_samples=n_samples,
        seed=int(seed),
        mu_core=mu_core,
    )


def estimate_trapped_measure(core: CompactCore, t, n_samples, seed):
    """mu_L(T(t)) with binomial stderr; T(0) = S*K0 exactly."""
    curve = trapped_measure_curve(core, [float(t)], n_samples, seed)
    return float(curve.estimates[0]), float(curve.stderrs[0])


def estimate_escape_rate(curve: TrappedMeasureCurve, window=None, min_surviving=50):
    """Fit Q = slope of log mu_L(T(t)) by weighted least squares.

    Points with zero counts, fewer than min_surviving survivors, or relative
    error above 0.5 are discarded; at least 4 usable points are required.
    """
    t = curve.times
    y = curve.estimates
    s = curve.stderrs
    keep = (y > 0) & (curve.n_surviving >= min_surviving)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(y > 0, s / np.maximum(y, 1e-300), np.inf)
    keep &= rel <= 0.5
    if window is not None:
        keep &= (t >= window[0]) & (t <= window[1])
    if np.sum(keep) < 4:
        raise InsufficientSignalError(
            "fewer than 4 usable points in the fit window; increase samples "
            "or shrink the time range"
        )
    tt, yy, ss = t[keep], np.log(y[keep]), rel[keep]
    wts = 1.0 / ss**2
    A = np.vstack([tt, np.ones_like(tt)]).T
    W = np.diag(wts)
    cov = np.linalg.inv(A.T @ W @ A)
    coef = cov @ (A.T @ W @ yy)
    resid = yy - A @ coef
    dof = max(len(tt) - 2, 1)
    scale = float(resid @ W @ resid) / dof
    stderr = float(np.sqrt(cov[0, 0] * max(scale, 1.0)))
    Q = float(coef[0])
    if Q > 3.0 * stderr:
        raise InsufficientSignalError(f"fitted slope {Q:.3g} is not a decay rate")
    window_used = (float(tt.min()), float(tt.max()))
    return EscapeFit(Q=Q, stderr=stderr, fit_window=window_used, n_points=int(np.sum(keep)))


def pressure_constant_curvature(delta, n):
    """P(J^u) = h_top - n with h_top = delta: returns delta - n."""
    if not 0.0 <= delta < n:
        raise DomainError(f"delta must lie in [0, n); got {delta}")
    return float(delta) - float(n)


def estimate_lambda_max(core: CompactCore, t_grid, n_samples, seed):
    """Maximal expansion rate from samples conditioned to stay trapped.

    ||dg^t|| is exact in the matrix-frame trivialization and the estimate is
    log sup ||dg^t|| / t at the largest grid time with surviving samples.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
        raise DomainError("t_grid must be positive and increasing (t=0 excluded)")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    kind = core.geometry.kind
    if core.geometry.is_hyperbolic:
        frames, _ = core.sample_phase(n_samples, rng)
        survive = lambda t: core.contains_frames(geo.flow_frame(frames, np.asarray(t)))
    else:
        (m, nu), _ = core.sample_phase(n_samples, rng)
        survive = lambda t: core.contains(m + t * nu)
    best = None
    for t in t_grid:
        alive = int(np.sum(survive(t)))
        if alive == 0:
            raise InsufficientSignalError(
                f"no sample trapped to t = {t}; shrink the grid or add samples"
            )
        # constant curvature: the frame differential norm is sample-independent
        best = (float(t), float(np.log(geo.flow_differential_norm(kind, t)) / t), alive)
    return best[1]


def interpolated_remainder(h, Lambda, curve: TrappedMeasureCurve, theta_points=101):
    """r(h, Lambda) = sup_theta h^{1-theta} mu_L(T(theta Lambda^{-1} |log h|)).

    The curve is interpolated log-linearly between grid points.
    """
    if not 0.0 < h < 1.0:
        raise DomainError("h must lie in (0, 1)")
    if Lambda <= 0:
        raise DomainError("Lambda must be positive")
    t_need = abs(np.log(h)) / Lambda
    t = curve.times
    y = curve.estimates
    pos = y > 0
    if not pos[0] or t[0] > 0.0 + 1e-12:
        raise ExtrapolationError("curve must start at t = 0 with a positive value")
    t_ok = t[pos]
    if t_need > t_ok.max() + 1e-12:
        raise ExtrapolationError(
            f"curve covers t <= {t_ok.max():.3g} but needs {t_need:.3g}; "
            "extend the time grid or increase samples"
        )
    theta = np.linspace(0.0, 1.0, theta_points)
    tt = theta * t_need
    logy = np.interp(tt, t[pos], np.log(y[pos]))
    return float(np.max(h ** (1.0 - theta) * np.exp(logy)))


def ehrenfest_time(h, Lambda0):
    """t_e = log(1/h) / (2 Lambda0)."""
    if not 0.0 < h < 1.0 or Lambda0 <= 0:
        raise DomainError("need 0 < h < 1 and Lambda0 > 0")
    return float(np.log(1.0 / h) / (2.0 * Lambda0))


def remainder_exponents(delta, n, Lambda0=1.0):
    """Predicted remainder exponents ((n-delta)/(2 Lambda0), (n-delta)/Lambda0).

    At the constant-curvature expansion rate Lambda0 = 1 these are the
    (n-delta)/2 and n-delta rates of the two remainder estimates.
    """
    if not 0.0 <= delta < n:
        raise DomainError(f"delta must lie in [0, n); got {delta}")
    if Lambda0 <= 0:
        raise DomainError("Lambda0 must be positive")
    return ((n - delta) / (2.0 * Lambda0), (n - delta) / Lambda0)


def synthetic_curve(C, P, t_grid, noise=0.0, seed=0, n_samples=10**6):
    """Exact (optionally noisy) exponential curve C e^{P t} for oracle tests."""
    t_grid = np.asarray(t_grid, dtype=float)
    y = C * np.exp(P * t_grid)
    rng = np.random.default_rng(seed)
    if noise > 0:
        y = y * np.exp(noise * rng.standard_normal(len(t_grid)))
    s = np.maximum(noise, 1e-12) * y
    return TrappedMeasureCurve(
        times=t_grid,
        estimates=y,
        stderrs=s,
        n_surviving=np.full(len(t_grid), float(n_samples)),
        n_samples=n_samples,
        seed=seed,
        mu_core=float(C),
    )


def check_core_convexity(core: CompactCore, n_traj=200, horizon=12.0, step=0.25, seed=7):
    """Empirical leave-never-return check; returns the violation count."""
    rng = np.random.default_rng(seed)
    ts = np.arange(0.0, horizon + step, step)
    if core.geometry.is_hyperbolic:
        frames, _ = core.sample_phase(n_traj, rng)
        inside = np.stack(
            [core.contains_frames(geo.flow_frame(frames, np.asarray(t))) for t in ts]
        )
    else:
        (m, nu), _ = core.sample_phase(n_traj, rng)
        inside = np.stack([core.contains(m + t * nu) for t in ts])
    left = np.logical_and.accumulate(~inside, axis=0)  # has been outside so far
    reentry = inside[1:] & left[:-1]
    return int(np.sum(np.any(reentry, axis=0)))


def check_core_contains_hull(core: CompactCore, depth=2, margin=0.5, n_pts=40):
    """Verify depth-`depth` limit-set geodesic segments lie in the shrunk core."""
    pts = limit_set_sample(core.group, depth)
    ang = np.sort(np.angle(geo.as_complex(pts)))
    probe = []
    for i in range(len(ang)):
        for j in range(i + 1, len(ang)):
            p1 = geo.as_vec(np.exp(1j * ang[i]))
            p2 = geo.as_vec(np.exp(1j * ang[j]))
            c, r = geo.geodesic_between(p1, p2)
            if c is None:
                u = r
                s = np.linspace(-0.95, 0.95, n_pts)
                probe.append(s[:, None] * geo.as_vec(u))
            else:
                a1 = np.angle(geo.as_complex(p1) - c)
                a2 = np.angle(geo.as_complex(p2) - c)
                d = (a2 - a1 + np.pi) % (2 * np.pi) - np.pi
                phis = a1 + np.linspace(0.05, 0.95, n_pts) * d
                probe.append(geo.as_vec(c + r * np.exp(1j * phis)))
    probe = np.concatenate(probe, axis=0)
    keep = np.sum(probe * probe, axis=-1) < 0.999**2
    probe = probe[keep]
    shrunk = CompactCore.hyperbolic(
        core.group, tube_radius=max(core.tube_radius - margin, 1e-3),
        hull_depth=core.hull_depth,
    )
    return bool(np.all(shrunk.contains(probe)))

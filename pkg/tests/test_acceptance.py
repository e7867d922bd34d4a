"""Acceptance criteria A1-A13.

Every criterion runs at its stated tolerance and prints one pass/fail line
(visible with `pytest tests/test_acceptance.py -s`).  All tolerances are
pinned here; nothing is deferred to later calibration.
"""

import time

import numpy as np
import pytest

from escapelab import dynamics as D
from escapelab import geometry as G
from escapelab import measures as M
from escapelab import schottky as S
from escapelab import semiclassics as SC
from escapelab import symbols as SY
from escapelab.quadrature import QuadratureSpec

HYP = G.ModelGeometry.hyperbolic_ball()
EUC = G.ModelGeometry.euclidean_plane()
TRIV = S.SchottkyGroup.trivial()
CYC = S.SchottkyGroup.cyclic(length=2.0)
PAIR = S.SchottkyGroup.symmetric_pair(length=3.0)
QUAD = QuadratureSpec(points_per_dim=48)


def _report(name, ok, detail):
    print(f"{name}: {'PASS' if ok else 'FAIL'}  ({detail})")
    assert ok, f"{name} failed: {detail}"


@pytest.fixture(scope="module")
def cyl_core():
    return D.CompactCore.hyperbolic(CYC, tube_radius=1.0, hull_depth=2)


def test_a1_elementary_delta():
    t0 = time.time()
    e1 = S.estimate_delta(CYC, "series-bisection")
    e2 = S.estimate_delta(CYC, "orbit-count-slope")
    elapsed = time.time() - t0
    ok = e1.delta <= 0.02 and e2.delta <= 0.02 and elapsed < 10.0
    _report(
        "A1 elementary delta",
        ok,
        f"series={e1.delta:.4f}, orbit={e2.delta:.4f}, {elapsed:.1f}s < 10s",
    )


def test_a2_cylinder_escape_rate(cyl_core):
    t0 = time.time()
    curve = D.trapped_measure_curve(cyl_core, np.arange(0.0, 9.0), 10**6, seed=42)
    fit = D.estimate_escape_rate(curve, window=(3.0, 8.0))
    elapsed = time.time() - t0
    ok = abs(fit.Q + 1.0) <= 0.1 and elapsed < 120.0
    _report(
        "A2 cylinder escape rate Q = delta - n",
        ok,
        f"Q={fit.Q:.4f}+-{fit.stderr:.4f} vs -1, {elapsed:.0f}s < 120s",
    )


def test_a3_schottky_escape_rate():
    t0 = time.time()
    est = S.estimate_delta(PAIR, "series-bisection")
    core = D.CompactCore.hyperbolic(PAIR, tube_radius=1.0, hull_depth=4)
    curve = D.trapped_measure_curve(core, np.arange(0.0, 11.0), 400_000, seed=7)
    fit = D.estimate_escape_rate(curve, window=(3.0, 10.0))
    elapsed = time.time() - t0
    target = est.delta - 1.0
    tol = fit.stderr + est.stderr + 0.1
    ok = abs(fit.Q - target) <= tol and elapsed < 600.0
    _report(
        "A3 Schottky escape rate Q = delta - 1",
        ok,
        f"Q={fit.Q:.4f}, delta-1={target:.4f}, |diff|={abs(fit.Q - target):.4f} "
        f"<= {tol:.4f}, {elapsed:.0f}s < 600s",
    )


def test_a4_lambda_max(cyl_core):
    hyp_est = D.estimate_lambda_max(cyl_core, [1.0, 2.0, 3.0, 4.0, 5.0], 20_000, seed=1)
    euc_core = D.CompactCore.euclidean(radius=100.0)
    euc_est = D.estimate_lambda_max(euc_core, [25.0, 50.0, 100.0, 150.0], 40_000, seed=1)
    ok = 0.95 <= hyp_est <= 1.05 and euc_est <= 0.05
    _report(
        "A4 maximal expansion rate",
        ok,
        f"hyperbolic={hyp_est:.4f} in [0.95, 1.05], euclidean={euc_est:.4f} <= 0.05",
    )


def test_a5_measure_dual_oracle_and_a8_monotone():
    rng = np.random.default_rng(2026)
    worst = 0.0
    monotone = True
    for grp in (TRIV, CYC):
        for _ in range(5):
            ang = np.pi / 2 + rng.uniform(-0.35, 0.35)
            xi = np.array([np.cos(ang), np.sin(ang)])
            a = SY.bump_symbol(
                HYP,
                center=np.array([0.05, 0.30]) + rng.uniform(-0.05, 0.05, 2),
                radius=rng.uniform(0.15, 0.24),
                nu_center_angle=rng.uniform(0, 2 * np.pi),
            )
            gs = M.mu_xi_group_sum(grp, xi, a, max_word_len=14, quad=QUAD)
            pf = M.mu_xi_pushforward(HYP, grp, xi, a, quad=QUAD)
            if abs(gs.value) > 1e-12:
                worst = max(worst, abs(gs.value - pf.value) / abs(gs.value))
            monotone &= bool(np.all(np.diff(pf.t_curve) >= -1e-15))
    _report("A5 measure dual oracle", worst <= 1e-3, f"worst rel gap {worst:.2e} <= 1e-3")
    _report("A8 monotone pushforward limit", monotone, "t-sequences nondecreasing in every run")


def test_a6_cocycle_identity():
    rng = np.random.default_rng(6)
    words = [iso for _, iso in list(S.enumerate_words(PAIR, 3))[1:]]
    worst = 0.0
    count = 0
    while count < 1000:
        if rng.random() < 0.5:
            iso = words[rng.integers(len(words))]
        else:
            iso = G.Isometry.axis_translation(rng.uniform(0.3, 2.5)).compose(
                G.Isometry.rotation(rng.uniform(0, 2 * np.pi))
            )
        ang = rng.uniform(0, 2 * np.pi)
        xi = np.array([np.cos(ang), np.sin(ang)])
        r = 0.8 * np.sqrt(rng.random())
        th = rng.uniform(0, 2 * np.pi)
        m = np.array([r * np.cos(th), r * np.sin(th)])
        lhs = G.busemann(xi, iso.inverse().apply(m))
        rhs = G.busemann(iso.boundary_action(xi), m) + np.log(
            iso.boundary_derivative_norm(xi)
        )
        worst = max(worst, abs(lhs - rhs))
        count += 1
    _report("A6 cocycle identity", worst <= 1e-10, f"worst log-residual {worst:.2e} <= 1e-10")


def test_a7_disintegration():
    ok = True
    details = []
    specs = [(np.pi / 2, 0.55), (np.pi / 2 + 0.15, 0.45), (np.pi / 2 - 0.2, 0.5)]
    for grp, label in ((TRIV, "trivial"), (CYC, "cyclic")):
        for k, (ang0, width) in enumerate(specs):
            a = SY.bump_symbol(
                HYP,
                center=(0.05 + 0.02 * k, 0.30 - 0.02 * k),
                radius=0.2,
                nu_center_angle=None if k == 0 else 1.0 + k,
            )

            def f(th, ang0=ang0, width=width):
                return SY.poly_bump((np.asarray(th) - ang0) / width)

            res = M.check_disintegration(
                HYP, grp, a, f, f_support=(ang0 - width, ang0 + width),
                quad=QuadratureSpec(points_per_dim=32), mc_samples=150_000,
                seed=100 + k,
            )
            this = abs(res.gap) <= 3.0 * res.sigma + res.quad_bound
            ok &= this
            details.append(f"{label}#{k}: |gap|={abs(res.gap):.2e} vs {3 * res.sigma + res.quad_bound:.2e}")
    _report("A7 disintegration", ok, "; ".join(details))


def test_a9_exact_matrix_element_oracle():
    a = SY.chart_symbol(
        EUC, center=(0.3, -0.2), sigma=0.25, nu_center=(0.9, 0.25), nu_sigma=0.12
    )
    spec = SC.PlaneWaveSpec(EUC, np.array([1.0, 0.0]), lam=1.0, h=0.05)
    me = SC.matrix_element(a, spec)
    oracle = SC.exact_matrix_element_plane_left(a, spec)
    rel = abs(me - oracle) / abs(oracle)
    _report("A9 exact matrix-element oracle", rel <= 1e-6, f"rel err {rel:.2e} <= 1e-6 at h=0.05")


def test_a10_nontrapping_h_rate():
    t0 = time.time()
    xi = np.array([1.0, 0.0])
    m0 = np.array([0.10, 0.03])
    grad = HYP.phase_gradient(xi, m0)
    a = SY.chart_symbol(HYP, center=m0, sigma=0.1, nu_center=grad, nu_sigma=0.6, cutoff=4.0)
    study = SC.convergence_study(
        a, HYP, xi, [0.1, 0.05, 0.025, 0.0125],
        quad=QuadratureSpec(points_per_dim=72),
    )
    elapsed = time.time() - t0
    ok = (not study.saturated) and 0.5 <= study.fitted_order <= 1.5 and elapsed < 600.0
    _report(
        "A10 nontrapping h-rate",
        ok,
        f"fitted order {study.fitted_order:.3f} in [0.5, 1.5], {elapsed:.0f}s < 600s",
    )


def test_a11_weyl_leading_term():
    a = SY.chart_symbol(EUC, center=(0.2, 0.1), sigma=0.3, nu_center=(0.4, 0.2), nu_sigma=0.25)
    lead1 = SC.weyl_leading_term(a, s=1.0, h=0.1)
    oracle = SC.free_trace_oracle(a, s=1.0, h=0.1)
    lead2 = SC.weyl_leading_term(a, s=1.0, h=0.05)
    rel = abs(lead1 - oracle) / abs(oracle)
    drift = abs(lead1 * 0.1**2 - lead2 * 0.05**2) / abs(lead1 * 0.1**2)
    ok = rel <= 1e-8 and drift <= 1e-10
    _report(
        "A11 Weyl leading term",
        ok,
        f"free-trace rel gap {rel:.2e} <= 1e-8, h-scaling drift {drift:.2e} <= 1e-10",
    )


def test_a12_interpolated_remainder():
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(20):
        C = rng.uniform(0.5, 3.0)
        P = rng.uniform(-0.9, -0.1)
        lam = rng.uniform(max(-P + 0.05, 0.3), 2.0)
        h = rng.uniform(0.01, 0.5)
        curve = D.synthetic_curve(C, P, np.linspace(0, abs(np.log(h)) / lam + 1.0, 50))
        r = D.interpolated_remainder(h, lam, curve)
        worst = max(worst, abs(r - C * h ** (-P / lam)) / C)
    _report("A12 interpolated remainder", worst <= 1e-6, f"worst |r - C h^(-P/L)|/C = {worst:.2e}")


def test_a13_trapped_lower_bound(cyl_core):
    lam0 = 1.05
    curve = D.trapped_measure_curve(cyl_core, np.arange(0.0, 3.25, 0.25), 400_000, seed=13)
    hs = [0.1, 0.05, 0.02, 0.01, 0.005, 0.003]
    ratios, sigmas = [], []
    for h in hs:
        t_h = abs(np.log(h)) / (2.0 * lam0)
        mu = float(np.interp(t_h, curve.times, curve.estimates))
        sig = float(np.interp(t_h, curve.times, curve.stderrs))
        ratios.append(mu / np.sqrt(h))
        sigmas.append(sig / np.sqrt(h))
    c = min(r - 3.0 * s for r, s in zip(ratios, sigmas))
    holds = c > 0 and all(
        mu_r * np.sqrt(h) >= c * np.sqrt(h) - 1e-12 for mu_r, h in zip(ratios, hs)
    )
    _report(
        "A13 trapped lower bound",
        holds,
        f"fitted c={c:.3f} > 0; ratios mu(T(log-time))/sqrt(h) in "
        f"[{min(ratios):.3f}, {max(ratios):.3f}]",
    )

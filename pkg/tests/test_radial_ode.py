import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from wbiharm.exponents import ProblemParams, similarity_exponents
from wbiharm.radial_ode import (
    OdeState,
    OutcomeKind,
    ShootingError,
    StiffnessError,
    classify_trajectory,
    integrate,
    integrate_trajectory,
    liouville_scan,
    rhs,
    seed_transformed,
    series_start,
    shoot_navier_ball,
    start_state,
    start_state,
)
from wbiharm.transform import ChartKind, RadialProfile, to_transformed

import oracles

P3 = ProblemParams(5, 0, 0, 3)
P9 = ProblemParams(5, 0, 0, 9)
C = 105 ** (1 / 8)


def test_critical_constant_symbolic():
    # c^{p-1} = N(N-4)(N^2-4) for u = c (1 + r^2)^{-1/2}, N = 5, p = 9
    r, c = sp.symbols("r c", positive=True)
    u = c / sp.sqrt(1 + r**2)
    lap = lambda f: sp.diff(f, r, 2) + 4 / r * sp.diff(f, r)
    expr = sp.simplify(lap(lap(u)) - u**9)
    sol = sp.solve(sp.Eq(sp.simplify(expr * (1 + r**2) ** sp.Rational(9, 2) / c), 0), c)
    assert any(sp.simplify(s**8 - 105) == 0 for s in sol)
    assert 5 * 1 * (25 - 4) == 105


def test_rhs_examples():
    assert np.allclose(rhs(P3, OdeState(1.0, (1, 0, 1, 0))), [0, -1, 0, -1])
    assert np.allclose(rhs(P3, OdeState(0.5, (0, 0, 0, 0))), 0)
    with pytest.raises(ValueError):
        rhs(P3, OdeState(0.0, (1, 0, 1, 0)))


def test_rhs_vanishes_along_critical_solution():
    r = np.geomspace(1e-2, 1e2, 200)
    u, du, v, dv = oracles.critical_solution(r)
    # -(r^4 u')' = r^4 v  <=>  u'' = -4u'/r - v; check via exact second derivatives
    d2u = -4 / r * du - v
    s = 1 + r * r
    d2u_exact = C * (-(s**-1.5) + 3 * r * r * s**-2.5)
    assert np.max(np.abs(d2u - d2u_exact) / np.abs(d2u_exact).max()) < 1e-10
    for k in (0, 50, 199):
        d = rhs(P9, OdeState(r[k], (u[k], du[k], v[k], dv[k])))
        assert d[0] == pytest.approx(du[k], rel=1e-14)


def test_transformed_rhs_along_critical_solution():
    r = np.geomspace(1e-2, 1e2, 20001)
    tp = to_transformed(RadialProfile(r, *oracles.critical_solution(r), params=P9))
    t = tp.t_nodes
    d2w = np.gradient(tp.dw, t, edge_order=2)
    d2z = np.gradient(tp.dz, t, edge_order=2)
    for k in range(100, t.size - 100, 997):
        g = rhs(P9, OdeState(t[k], (tp.w[k], tp.dw[k], tp.z[k], tp.dz[k]), ChartKind.INTERIOR))
        assert g[0] == pytest.approx(tp.dw[k], rel=1e-14)
        assert g[1] == pytest.approx(d2w[k], rel=1e-6, abs=1e-9)
        assert g[3] == pytest.approx(d2z[k], rel=1e-6, abs=1e-9)


def test_series_start_examples():
    s = series_start(P3, 0, 0, 0.01).state
    assert np.allclose(s.y, 0)
    s = series_start(P3, 1, 1, 0.01).state
    assert s.y[0] == pytest.approx(1 - 1e-5, rel=1e-12)
    assert s.y[2] == pytest.approx(1 - 1e-5, rel=1e-12)
    with pytest.raises(ValueError):
        series_start(ProblemParams(5, 2, 0, 2), 1, 1, 0.01)
    assert series_start(P3, 1, 1e6, 0.5).warning


def test_series_start_refinement():
    a, b, r0 = 1.0, 1.0, 0.01
    out = []
    for start in (r0, r0 / 2):
        prof = integrate(P3, series_start(P3, a, b, start).state, (start, 0.1), tol=1e-13)
        out.append(prof.u[-1])
    # truncation O(r0^4) at the start
    assert abs(out[0] - out[1]) < 10 * r0**4


def test_decoupled_branch_small_radius():
    # a = 0: u = -b r^2/(2N), v = b up to the feedback of |u|^{p-1}u, below 1e-12 on r <= 0.05
    b, r0 = 1.0, 1e-4
    prof = integrate(P3, series_start(P3, 0.0, b, r0).state, (r0, 0.05), tol=1e-12, watch=())
    r = prof.r_nodes
    assert np.allclose(prof.u, -b * r**2 / 10, rtol=1e-10, atol=1e-14)
    assert np.allclose(prof.v, b, rtol=1e-10)


def test_reintegration_of_critical_solution():
    r0 = 0.01
    y0 = [float(x[0]) for x in oracles.critical_solution(np.array([r0]))]
    traj = integrate_trajectory(P9, OdeState(r0, y0), 10.0, tol=1e-12, watch=())
    u10 = traj.physical([10.0])[0, 0]
    assert u10 == pytest.approx(C / math.sqrt(101), rel=1e-6)


def test_tolerance_self_convergence():
    r0 = 0.01
    y0 = [float(x[0]) for x in oracles.critical_solution(np.array([r0]))]
    exact = C / math.sqrt(101)
    errs = []
    for tol in (1e-6, 1e-8, 1e-10):
        traj = integrate_trajectory(P9, OdeState(r0, y0), 10.0, tol=tol, watch=())
        errs.append(abs(traj.physical([10.0])[0, 0] - exact))
    assert errs[2] < errs[0]
    assert errs[2] < 1e-7


def test_integrate_rejects_bad_tol():
    with pytest.raises(ValueError):
        integrate_trajectory(P3, OdeState(0.01, (1, 0, 1, 0)), 1.0, tol=1e-2)
    with pytest.raises(ValueError):
        integrate_trajectory(P3, OdeState(0.01, (1, 0, 1, 0)), 0.01)


def test_classify_examples():
    assert classify_trajectory(P3, 1, -1, 10).kind is OutcomeKind.V_CROSSED_ZERO
    out = classify_trajectory(P9, C, 5 * C, 1e3)
    assert out.kind is OutcomeKind.POSITIVE_ON_WINDOW
    assert out.location is None


def test_crossing_changes_sign():
    out = classify_trajectory(P3, 1.0, 0.01, 1e4)
    assert out.kind in (OutcomeKind.U_CROSSED_ZERO, OutcomeKind.V_CROSSED_ZERO)
    prof = out.profile
    comp = prof.u if out.kind is OutcomeKind.U_CROSSED_ZERO else prof.v
    assert prof.r_nodes[-1] == pytest.approx(out.location, rel=1e-10)
    assert abs(comp[-1]) < 1e-10 * np.abs(comp).max()
    assert np.all(comp[:-1] > 0)


@pytest.mark.parametrize("b", [1e-3, 0.1, 10.0, 1e3])
def test_similarity_invariance_of_outcome(b):
    lam = 3.0
    k_u, k_v = similarity_exponents(P3)
    o1 = classify_trajectory(P3, 1.0, b, 1e4)
    o2 = classify_trajectory(P3, lam**k_u, lam**k_v * b, 1e4 / lam)
    assert o1.kind is o2.kind
    assert o2.location == pytest.approx(o1.location / lam, rel=1e-6)


def test_transformed_and_physical_agree():
    a, b = 1.0, 0.5
    phys = integrate_trajectory(P3, start_state(P3, a, b, 1e-6), 1.0, tol=1e-12, watch=())
    seed = seed_transformed(P3, a, b, -math.log(1e-6))
    tr = integrate_trajectory(P3, seed, 0.0, tol=1e-12, watch=())
    rr = np.geomspace(1e-3, 1.0, 20)
    A, B = phys.physical(rr), tr.physical(rr)
    assert np.allclose(A, B, rtol=1e-8, atol=1e-10)


def test_alpha_two_seed_gives_log_growth():
    P = ProblemParams(5, 2, 0, 2)
    T = 20.0
    y = seed_transformed(P, 0.0, 1.0, T).y
    r = math.exp(-T)
    # u = w r^{-3/2} ~ -b ln r / (N - 2) = b T / 3
    assert y[0] * r**-1.5 == pytest.approx(T / 3, rel=1e-12)
    assert y[2] * r**-1.5 == pytest.approx(1.0, rel=1e-12)


def test_monotone_fluxes_and_integral_identity(shot_p3):
    prof = shot_p3.profile
    r = prof.r_nodes
    fu, fv = r**4 * prof.du, r**4 * prof.dv
    assert np.all(np.diff(fu) <= 1e-12 * np.abs(fu).max())
    assert np.all(np.diff(fv) <= 1e-12 * np.abs(fv).max())
    fine = shot_p3.resample(np.linspace(1e-4, 1, 20001))
    rr = fine.r_nodes
    cum = np.concatenate([[0], np.cumsum(0.5 * (rr[1:] ** 4 * fine.v[1:] + rr[:-1] ** 4 * fine.v[:-1]) * np.diff(rr))])
    assert np.allclose(-rr**4 * fine.du, cum + fine.v[0] * rr[0] ** 5 / 5, rtol=1e-6, atol=1e-9)


def test_entire_positive_trajectory_diagnostic():
    r = np.geomspace(1e-2, 1e3, 500)
    u, du, v, dv = oracles.critical_solution(r)
    assert np.all(r * du + 3 * u >= 0)
    assert np.all(r * dv + 3 * v >= 0)


def test_shoot_navier_ball_basic(shot_p3):
    s = shot_p3
    assert s.residuals[0] < 1e-8 and s.residuals[1] < 1e-6 * s.center_values[1]
    prof = s.profile
    assert prof.r_nodes[-1] == 1.0
    assert np.all(prof.u[:-1] > 0) and np.all(prof.v[:-1] > 0)
    assert s.center_values[0] == pytest.approx(prof.u[0], rel=1e-4)


def test_shoot_matches_collocation(shot_p3):
    r, u, v = oracles.collocation_navier_ball(5, 0, 0, 3, n=8192)
    prof = shot_p3.resample(r[1:])
    assert np.max(np.abs(prof.u - u[1:])) < 1e-4
    assert np.max(np.abs(prof.v - v[1:])) < 1e-4
    assert shot_p3.center_values[0] == pytest.approx(u[0], abs=1e-4)


def test_shoot_rescaling(shot_p3):
    s2 = shoot_navier_ball(P3, 2.0)
    k_u, k_v = similarity_exponents(P3)
    r = np.linspace(0.01, 2.0, 200)
    a = s2.resample(r)
    b = shot_p3.resample(r / 2)
    assert np.allclose(a.u, 2.0**-k_u * b.u, rtol=1e-7, atol=1e-9)
    assert np.allclose(a.v, 2.0**-k_v * b.v, rtol=1e-7, atol=1e-9)
    # independent of the similarity map: integrate directly from the R = 2 center data
    a2, b2 = s2.center_values
    direct = integrate_trajectory(P3, start_state(P3, a2, b2), 2.0, tol=1e-12, watch=())
    Y = direct.physical(r)
    assert np.max(np.abs(Y[0] - a.u)) < 1e-8 * a2
    assert np.max(np.abs(Y[2] - a.v)) < 1e-8 * b2
    end = direct.physical([2.0])[:, 0]
    assert abs(end[0]) < 1e-8 * a2 and abs(end[2]) < 1e-8 * b2


def test_shoot_preconditions():
    with pytest.raises(ValueError):
        shoot_navier_ball(P9, 1.0)
    with pytest.raises(ValueError):
        shoot_navier_ball(ProblemParams(5, 2, 0, 2), 1.0)
    with pytest.raises(ShootingError) as info:
        shoot_navier_ball(P3, 1.0, b_range=(10.0, 20.0), n_sweep=3)
    assert len(info.value.table) == 3


def test_scan_empty_and_ordering():
    rep = liouville_scan(P3, [2, 3], [])
    assert rep.rows == [] and rep.positive_fraction == 0.0
    b = np.geomspace(1e-2, 1e2, 5)
    serial = liouville_scan(P3, [2, 3], b)
    par = liouville_scan(P3, [2, 3], b, jobs=2)
    assert serial.to_csv() == par.to_csv()
    assert serial.to_csv().splitlines()[0] == "p,b,outcome,event_location"


def test_scan_flags_positive_rows_as_violations():
    rep = liouville_scan(P9, [9.0], [5 * C / C**9 * C**9 / C])
    assert rep.violations == []  # p = p_s is not below the threshold


@pytest.mark.slow
def test_liouville_sweeps_all_cross():
    b = np.geomspace(1e-3, 1e3, 40)
    rep = liouville_scan(P3.with_p(2), list(range(2, 9)), b)
    assert rep.positive_fraction == 0.0 and not rep.violations
    rep2 = liouville_scan(ProblemParams(5, 2, 0, 2), [1.5, 2.0], b)
    assert rep2.positive_fraction == 0.0

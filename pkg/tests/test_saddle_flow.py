import numpy as np
import pytest

from critpersist.errors import (BoundExceedsSigma, LevelGapViolated, StepTooLarge, TubularRadiusExceeded)
from critpersist.functional import SplitFunctional
from critpersist.manifold_bundle import fiber_splitting
from critpersist.saddle_flow import (DESCENT_SLACK, LEVEL_SLACK, build_neighborhood, decompose_deformation,
                                     deform_set, deformation_clauses, fiber_grid, integrate_flow, juxtapose,
                                     pseudogradient, verify_saddle_conditions, write_deformation_csv,
                                     write_trajectory_csv)
from critpersist.scenarios import build_scenario
from critpersist.spectral_core import SymOperator

EZ = np.array([0.0, 0.0, 1.0])


def ring_phi(b, a=0.0):
    # closed form of the circle functional at radius 1 + b and height a
    return 0.25 * ((1.0 + b) ** 2 - 1.0) ** 2 - 0.5 * a * a


def zero_field(x):
    return np.zeros_like(x)


# --------------------------------------------------------------- neighborhood

def test_membership_and_projections(circle3_bundle):
    nb = build_neighborhood(circle3_bundle, 0.6, 0.1)
    m = nb.manifold.samples[5].point
    x = m + 0.5 * 0.6 * EZ
    assert nb.classify(x) == "interior"
    assert np.allclose(nb.p_M(x), m, atol=1e-14)
    assert np.allclose(nb.p_minus(x), 0.3 * EZ, atol=1e-14)
    assert np.allclose(nb.p_plus(x), 0.0, atol=1e-14)
    assert nb.classify(m + 0.6 * EZ) == "minus"
    assert nb.classify(m + 0.1 * m) == "plus"
    assert nb.classify(m + 0.6 * EZ + 0.1 * m) == "corner"
    assert nb.classify(m + 0.7 * EZ) == "outside"
    assert nb.contains(m + 0.6 * EZ, closed=True) and not nb.contains(m + 0.6 * EZ)


def test_radii_beyond_reach_rejected(circle3_bundle):
    # the unit circle has reach 1: a radial fiber of length 2 crosses the axis
    with pytest.raises(TubularRadiusExceeded):
        build_neighborhood(circle3_bundle, 2.0, 2.0)


# --------------------------------------------------------------- saddle conditions

def test_verified_circle_matches_closed_form(circle3_verified):
    nb, rep = circle3_verified
    assert rep["passed"] and rep["cone_ok"]
    # sup over the r- face is attained at |z| = 0.6 and the outer radius 1.1
    assert abs(rep["sup_minus"] - ring_phi(0.1, 0.6)) <= 1e-14
    # on B0 the ring energy is >= 0 with equality on M
    assert abs(rep["inf_B0"]) <= 1e-15
    assert abs(rep["c0"] - 0.5 * ring_phi(0.1, 0.6)) <= 1e-14
    assert rep["min_grad_on_sublevel"] > 1e-8
    # sigma = half the minimal |grad| on the r+ face; the face has radii 0.9 and 1.1,
    # |grad| = |r^2 - 1| r in the plane, smallest at r = 0.9 and z = 0
    assert abs(rep["sigma"] - 0.5 * (1 - 0.9 ** 2) * 0.9) <= 1e-14
    assert nb.c0 == rep["c0"] and nb.sigma == rep["sigma"]


def test_equal_small_radii_fail_the_level_gap(circle3_bundle):
    # with r- = r+ = 0.2 the r- face reaches radius 1.2, where the ring energy
    # 0.0484 beats the -0.02 from the z-term: sup_minus = 0.0284 > 0 = inf_B0
    nb = build_neighborhood(circle3_bundle, 0.2, 0.2)
    rep = verify_saddle_conditions(nb, sigma=0.05, raise_on_fail=False)
    assert not rep["passed"]
    assert abs(rep["sup_minus"] - ring_phi(0.2, 0.2)) <= 1e-14
    assert abs(rep["sup_minus"] - 0.0284) <= 1e-12
    assert rep["violations"][0]["error"] == "LevelGapViolated"
    with pytest.raises(LevelGapViolated):
        verify_saddle_conditions(nb, sigma=0.05)


def test_sign_flip_violates_level_gap(circle3_verified, circle3):
    nb, _ = circle3_verified
    with pytest.raises(LevelGapViolated):
        verify_saddle_conditions(nb, circle3.functional.negated())


def test_fixed_c0_outside_gap_rejected(circle3_verified):
    nb, rep = circle3_verified
    with pytest.raises(LevelGapViolated):
        verify_saddle_conditions(nb, c0=0.5)


def test_cone_entry_of_flow_direction(circle3_verified, circle3):
    nb, _ = circle3_verified
    f = circle3.functional
    eps = 1e-4 * nb.radius
    for x, *_ in fiber_grid(nb, (0.0, 0.25, 0.5, 0.75), (1.0,)):
        assert nb.contains(x - eps * f.grad(x))


def test_point_saddle_passes():
    s = build_scenario("point_saddle")
    b = fiber_splitting(s.functional, s.manifold)
    nb = build_neighborhood(b, s.r_minus, s.r_plus)
    rep = verify_saddle_conditions(nb)
    # phi = x^2 - y^2 on the disc product: sup over |y| = r- is r+^2 - r-^2
    assert abs(rep["sup_minus"] - (0.3 ** 2 - 0.6 ** 2)) <= 1e-14
    assert rep["inf_B0"] == 0.0


# --------------------------------------------------------------- pseudogradient

def test_pseudogradient_modes(circle3, circle3_verified, rng):
    nb, _ = circle3_verified
    f = circle3.functional
    Z = pseudogradient(f)
    assert Z.bound == 0.0 and Z.mode == "exact"
    full = pseudogradient(f, "finite_rank", 3, nb)
    assert full.bound == 0.0
    for _ in range(5):
        x = rng.standard_normal(3)
        assert np.array_equal(full(x), Z(x)) or np.abs(full(x) - Z(x)).max() <= 1e-15


def test_finite_rank_bound_hilbert():
    s = build_scenario("hilbert_toy", {"ambient_dim": 32})
    b = fiber_splitting(s.functional, s.manifold)
    nb = build_neighborhood(b, s.r_minus, s.r_plus)
    Z = pseudogradient(s.functional, "finite_rank", 8, nb)
    # L is diagonal with kernel on coordinates 0, 1 and alternating signs after,
    # so the first 8 L-eigenvectors are the first 8 coordinates
    direct = max(np.linalg.norm(s.functional.psi_grad(p[0])[8:]) for p in fiber_grid(nb, (0, .25, .5, .75), (1.0,)))
    assert abs(Z.bound - direct) <= 1e-14
    assert Z.bound > 0
    with pytest.raises(BoundExceedsSigma):
        pseudogradient(s.functional, "finite_rank", 8, nb, sigma=0.5 * direct)


# --------------------------------------------------------------- flow

def linear_functional(diag):
    L = SymOperator(np.diag(diag))
    return SplitFunctional(L, lambda x: 0.0, zero_field, psi_hess=lambda x: np.zeros((len(diag),) * 2))


def test_rk4_fourth_order_on_linear_flow():
    d = np.array([-1.0, 0.0, 1.0])
    f = linear_functional(d)
    x0 = np.array([0.3, -0.7, 1.1])
    exact = np.exp(-d) * x0
    errs = []
    for h in (1e-2, 5e-3):
        tr = integrate_flow(x0, f, zero_field, None, step_h=h, c0=-1e9, check_membership=False)
        assert tr.exit_kind == "time_out" and tr.tau == 1.0
        errs.append(np.linalg.norm(tr.final - exact))
    assert 14 <= errs[0] / errs[1] <= 18


def test_start_in_sublevel_exits_immediately(circle3_verified, circle3):
    nb, _ = circle3_verified
    m = nb.manifold.samples[0].point
    x0 = m + 0.6 * EZ
    assert circle3.functional(x0) < nb.c0
    tr = integrate_flow(x0, circle3.functional, pseudogradient(circle3.functional), nb)
    assert tr.tau == 0.0 and tr.exit_kind == "hit_sublevel" and len(tr.times) == 1


@pytest.fixture(scope="module")
def circle_traj(circle3_verified, circle3):
    nb, _ = circle3_verified
    f = circle3.functional
    Z = pseudogradient(f)
    x0 = nb.manifold.samples[7].point + 0.5 * nb.r_minus * EZ
    return nb, f, Z, integrate_flow(x0, f, Z, nb)


def test_flow_hits_sublevel_with_strict_descent(circle_traj):
    nb, f, Z, tr = circle_traj
    assert tr.exit_kind == "hit_sublevel" and 0 < tr.tau < 1
    assert np.all(np.diff(tr.phi) < 0)
    assert abs(tr.phi[-1] - nb.c0) <= 1e-8
    # on M x z-axis the flow is z' = z, so z(t) = 0.3 e^t and the exit is at
    # -z^2/2 = c0, i.e. tau = log(sqrt(-2 c0) / 0.3)
    assert abs(tr.tau - np.log(np.sqrt(-2 * nb.c0) / 0.3)) <= 1e-9
    for x in tr.states:
        assert nb.contains(x, closed=True)


def test_energy_descent_slack_on_grid(circle3_verified, circle3):
    nb, _ = circle3_verified
    f = circle3.functional
    Z = pseudogradient(f)
    for x, *_ in fiber_grid(nb, (0.0, 0.5, 1.0), (0.0, 0.5, 1.0), stride=8):
        tr = integrate_flow(x, f, Z, nb)
        span = max(1.0, abs(tr.phi[0] - nb.c0))
        assert np.all(np.diff(tr.phi) <= DESCENT_SLACK * span)


def test_step_too_large_guard():
    # x' = -Lx with L = diag(1) is stable; a step of 3 makes RK4 expand the energy
    f = linear_functional(np.array([1.0]))
    with pytest.raises(StepTooLarge):
        integrate_flow(np.array([1.0]), f, zero_field, None, step_h=3.0, c0=-1.0, t_max=6.0,
                       check_membership=False)


# --------------------------------------------------------------- deformation

def test_zero_field_deformation_is_linear():
    d = np.array([-1.0, 0.0, 1.0])
    f = linear_functional(d)
    tr = integrate_flow(np.array([0.2, 0.5, -0.4]), f, zero_field, None, step_h=1e-2, c0=-1e9,
                        check_membership=False)
    rec = decompose_deformation(tr, zero_field, f.L)
    assert not rec.C.any()
    assert np.allclose(rec.theta, -tr.tau * rec.t, atol=1e-15)
    assert rec.theta[0] == 0.0
    # with C = 0 the reconstruction is the closed form exp(-tL) x0, so the only
    # residual is the RK4 truncation error of the stored states
    exact = np.array([np.exp(-t * d) * tr.x0 for t in tr.times])
    assert np.allclose(rec.errors, np.linalg.norm(tr.states - exact, axis=1), rtol=0, atol=1e-15)
    assert rec.reconstruction_error <= 1e-9


def test_circle_deformation_reconstructs(circle_traj):
    nb, f, Z, tr = circle_traj
    rec = decompose_deformation(tr, Z, f.L)
    assert rec.t[0] == 0.0 and rec.theta[0] == 0.0 and not rec.C[0].any()
    assert rec.reconstruction_error <= 1e-6
    assert rec.theta_bound <= 1.0
    fine = integrate_flow(tr.x0, f, Z, nb, step_h=tr.tau / 200)
    assert len(fine.times) >= 200
    assert decompose_deformation(fine, Z, f.L).reconstruction_error <= 1e-6


def test_deform_set_fixes_sublevel(circle3_verified, circle3):
    nb, _ = circle3_verified
    f = circle3.functional
    Z = pseudogradient(f)
    pts = [m + 0.6 * EZ for m in nb.manifold.points[::8]]
    out = deform_set(pts, f, Z, nb)
    assert np.array_equal(out.images, out.points)
    assert np.all(out.taus == 0.0)


def test_deform_set_lowers_c0_plus_delta(circle3_verified, circle3):
    nb, _ = circle3_verified
    f = circle3.functional
    Z = pseudogradient(f)
    delta = 1e-3
    # height with -z^2/2 = c0 + delta on M, plus a few radial offsets
    a = np.sqrt(-2 * (nb.c0 + delta))
    pts = [m + a * EZ + b * m for m in nb.manifold.points[::8] for b in (0.0, 0.02, -0.02)]
    pts = [x for x in pts if f(x) <= nb.c0 + delta]
    assert pts
    out = deform_set(pts, f, Z, nb)
    assert np.all(out.levels_after <= nb.c0 + LEVEL_SLACK)
    assert out.reconstruction_error <= 1e-6
    env = out.c_envelope()
    assert env["max_norm"] < np.inf and env["affine_dim"] <= 3


def test_juxtaposition_reconstructs(circle3_verified, circle3):
    nb, _ = circle3_verified
    f = circle3.functional
    Z = pseudogradient(f)
    x0 = nb.manifold.samples[3].point + 0.25 * EZ + 0.05 * nb.manifold.samples[3].point
    t1 = integrate_flow(x0, f, Z, nb, c0=0.5 * nb.c0)
    t2 = integrate_flow(t1.final, f, Z, nb)
    r1, r2 = decompose_deformation(t1, Z, f.L), decompose_deformation(t2, Z, f.L)
    j = juxtapose(r1, r2, f.L)
    assert j.reconstruction_error <= 2e-6
    assert j.theta[0] == 0.0 and np.all(np.diff(j.t) > 0) and j.t[-1] == 1.0
    assert np.allclose(j.final, t2.final)


def test_deformation_clauses_at_default_delta(circle3_verified, circle3):
    nb, _ = circle3_verified
    f = circle3.functional
    # clause (c) is stated at the critical level c = 0 of M; the flow stops on
    # phi = c0 < -delta, so outside the tube U it lands below c - delta
    out = deformation_clauses(nb, f, pseudogradient(f), 1e-3, c=0.0)
    assert out["holds"], out
    assert out["clause_a_points"] and out["clause_b_points"] and out["clause_c_points"]


def test_csv_writers(tmp_path, circle_traj):
    nb, f, Z, tr = circle_traj
    write_trajectory_csv(tmp_path / "t.csv", tr)
    write_deformation_csv(tmp_path / "d.csv", decompose_deformation(tr, Z, f.L))
    t = (tmp_path / "t.csv").read_text().splitlines()
    d = (tmp_path / "d.csv").read_text().splitlines()
    assert t[0] == "t,x_1,x_2,x_3,phi,grad_norm" and len(t) == len(tr.times) + 1
    assert d[0] == "t,theta,c_norm,recon_err"
    assert float(t[-1].split(",")[-2]) == tr.phi[-1]

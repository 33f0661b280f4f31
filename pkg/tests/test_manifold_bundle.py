import numpy as np
import pytest

from critpersist.errors import (Degenerate, DimensionTooSmall, KernelCollapse, KernelDimensionUnrecoverable,
                                NotCritical, UnsupportedKind)
from critpersist.functional import SplitFunctional, gradient_consistency
from critpersist.grassmann import Subspace, gap_distance
from critpersist.manifold_bundle import (OperatorField, check_reduction_limits, fiber_splitting, galerkin_basis,
                                         galerkin_reduce, galerkin_sweep, hessian_at, mollify_field,
                                         operator_field, sample_manifold, smooth_field, write_diagnostics_csv)
from critpersist.scenarios import build_scenario, canonical_signs
from critpersist.spectral_core import ContourPath, SymOperator


def quadratic(A):
    A = np.asarray(A, dtype=float)
    L = canonical_signs(np.diag(A))
    return SplitFunctional.from_total(L, lambda x: 0.5 * x @ A @ x, lambda x: A @ x, lambda x: A)


# --------------------------------------------------------------- sampling

def test_sample_circle():
    M = sample_manifold("circle", 3, 64)
    assert M.count == 64 and M.d == 1
    for s in M.samples:
        a = s.params[0]
        assert np.allclose(s.point, [np.cos(a), np.sin(a), 0.0], atol=1e-15)
        t = s.tangent.basis[:, 0] * np.sign(s.tangent.basis[:, 0] @ [-np.sin(a), np.cos(a), 0.0])
        assert np.allclose(t, [-np.sin(a), np.cos(a), 0.0], atol=1e-14)
    steps = [np.linalg.norm(M.samples[j].point - M.samples[i].point) for i, j in M.adjacent_pairs()]
    assert max(steps) <= 2 * np.pi * M.lipschitz / 64 + 1e-15
    assert (63, 0) in M.adjacent_pairs() or (0, 63) in M.adjacent_pairs()


def test_sample_point_and_torus():
    P = sample_manifold("point", 4, 1)
    assert P.count == 1 and P.d == 0 and P.samples[0].tangent.dim == 0
    T = sample_manifold("torus2", 6, 32)
    assert T.count == 32 * 32 and T.d == 2
    for s in T.samples[::37]:
        B = s.tangent.basis
        assert B.shape == (6, 2) and np.abs(B.T @ B - np.eye(2)).max() <= 1e-12
        u, v = s.params
        assert np.allclose(s.point, [np.cos(u), np.sin(u), np.cos(v), np.sin(v), 0, 0], atol=1e-15)


def test_sample_errors():
    with pytest.raises(UnsupportedKind):
        sample_manifold("klein", 4, 32)
    with pytest.raises(DimensionTooSmall):
        sample_manifold("torus2", 5, 32)
    with pytest.raises(DimensionTooSmall):
        sample_manifold("circle", 2, 32)


def test_nearest_closed_form_and_gauss_newton_agree(rng):
    import dataclasses
    for kind, n in (("circle", 3), ("torus2", 6)):
        M = sample_manifold(kind, n, 32)
        assert M.foot_params is not None
        slow = dataclasses.replace(M, foot_params=None)
        for _ in range(20):
            x = M.samples[int(rng.integers(M.count))].point + 0.2 * rng.standard_normal(n)
            p1, m1, _ = M.nearest(x)
            p2, m2, _ = slow.nearest(x)
            assert np.linalg.norm(m1 - m2) <= 1e-10
            # oracle: the foot point on a unit circle factor is the radial projection
            r = np.hypot(x[0], x[1])
            assert np.allclose(m1[:2], x[:2] / r, atol=1e-12)
    R = np.linalg.qr(rng.standard_normal((3, 3)))[0]
    skew = sample_manifold("circle", 3, 64, {"frame": R[:, :2] @ np.array([[1.0, 0.2], [0.0, 1.0]])})
    assert skew.foot_params is None


# --------------------------------------------------------------- hessian

def test_hessian_saddle_analytic_and_fd():
    f = quadratic(np.diag([2.0, -2.0]))
    x = np.zeros(2)
    assert np.array_equal(hessian_at(f, x).entries, np.diag([2.0, -2.0]))
    assert np.abs(hessian_at(f, x, "central_fd", 1e-5).entries - np.diag([2.0, -2.0])).max() <= 1e-6


def test_hessian_quadratic_any_point(rng):
    A = rng.standard_normal((5, 5))
    A = A + A.T
    f = SplitFunctional.from_total(SymOperator(np.eye(5)), lambda x: 0.5 * x @ A @ x, lambda x: A @ x)
    for _ in range(5):
        x = rng.standard_normal(5)
        assert np.abs(hessian_at(f, x, "central_fd").entries - A).max() <= 1e-8


def test_hessian_circle3_at_e1(circle3):
    x = np.array([1.0, 0.0, 0.0])
    H = hessian_at(circle3.functional, x).entries
    # hand computation: d2/dx2 of 1/4 (x^2+y^2-1)^2 at (1,0) is 3x^2+y^2-1 = 2
    assert np.array_equal(H, np.diag([2.0, 0.0, -1.0]))
    fd = hessian_at(circle3.functional, x, "central_fd").entries
    assert np.abs(fd - H).max() <= 1e-6


def test_gradient_consistency_all_scenarios(rng):
    for name in ("circle3", "torus6", "twisted_circle4", "point_saddle"):
        s = build_scenario(name)
        pts = [s.manifold.samples[0].point + 0.1 * rng.standard_normal(s.ambient_dim) for _ in range(5)]
        assert gradient_consistency(s.functional, pts, rng) <= 1e-7, name
    s = build_scenario("hilbert_toy", {"ambient_dim": 8})
    pts = [s.manifold.samples[3].point + 0.1 * rng.standard_normal(8) for _ in range(5)]
    assert gradient_consistency(s.functional, pts, rng) <= 1e-7


# --------------------------------------------------------------- fibers

def test_fiber_splitting_circle3(circle3_bundle):
    b = circle3_bundle
    assert b.nd_residuals.max() <= 1e-8
    for s, sp in zip(b.manifold.samples, b.splittings):
        a = s.params[0]
        radial = Subspace.span(np.array([[np.cos(a)], [np.sin(a)], [0.0]]))
        assert gap_distance(sp.x_plus, radial) <= 1e-12
        assert gap_distance(sp.x_minus, Subspace.coordinate(3, [2])) <= 1e-12
        assert sp.dims == (1, 1, 1)


def test_ring_without_z_term_is_degenerate(circle3):
    L = SymOperator(np.zeros((3, 3)))
    ring = lambda x: 0.25 * (x[0] ** 2 + x[1] ** 2 - 1) ** 2
    g = lambda x: np.array([(x[0] ** 2 + x[1] ** 2 - 1) * x[0], (x[0] ** 2 + x[1] ** 2 - 1) * x[1], 0.0])
    f = SplitFunctional.from_total(L, ring, g)
    with pytest.raises(Degenerate):
        fiber_splitting(f, circle3.manifold, hessian_mode="central_fd")


def test_not_critical_detected(circle3):
    f = circle3.functional.plus(lambda x: 0.01 * x[0], lambda x: np.array([0.01, 0.0, 0.0]), lambda x: np.zeros((3, 3)))
    with pytest.raises(NotCritical):
        fiber_splitting(f, circle3.manifold)


def test_twisted_continuity_scales_like_one_over_count():
    prev = None
    for count in (32, 64, 128):
        s = build_scenario("twisted_circle4", {"count": count})
        b = fiber_splitting(s.functional, s.manifold)
        worst = max(b.continuity["x_minus"], b.continuity["x_plus"])
        # rotating eigenvectors R(a): adjacent distance is sin(spacing) exactly
        assert abs(worst - np.sin(2 * np.pi / count)) <= 1e-10
        if prev is not None:
            assert 0.3 <= worst / prev <= 0.7
        prev = worst


# --------------------------------------------------------------- mollification

def _circle_field(count=64):
    s = build_scenario("circle3", {"count": count})
    return s, operator_field(s.functional, s.manifold)


def test_mollify_constant_field_unchanged():
    L = SymOperator(np.diag([0.0, -1.0, 1.0]))
    K0 = SymOperator(np.diag([0.0, -0.5, 0.5]))
    K = OperatorField(tuple([K0] * 32), 1, L, (32,))
    out = mollify_field(K, 0.5, ContourPath(0.0, 0.5))
    assert out.max_distance(K) <= 1e-10


def test_mollify_removes_grid_noise():
    # the clean field rotates with the angle, so the smoothing bias is O(bandwidth^2);
    # 256 samples and a bandwidth just above the spacing keep it below 1.5e-3
    s, K = _circle_field(256)
    noise = [1e-3 * (-1) ** i * np.ones((3, 3)) for i in range(len(K.samples))]
    noisy = OperatorField(tuple(SymOperator.symmetrized(k.entries + e) for k, e in zip(K.samples, noise)),
                          1, K.L, K.grid_shape)
    out = mollify_field(noisy, 1.1 * 2 * np.pi / 256, ContourPath(0.0, 0.5))
    assert out.max_distance(K) <= 2e-3
    assert out.in_class()


def test_rank_correction_restores_exact_kernel():
    L = SymOperator(np.diag([0.0, -1.0, 1.0]))
    bumped = SymOperator(np.diag([1e-4, 0.0, 0.0]))
    K = OperatorField(tuple([bumped] * 32), 1, L, (32,))
    out = mollify_field(K, 0.5, ContourPath(0.0, 0.5))
    lam = np.linalg.eigvalsh(out.total(0).entries)
    assert np.abs(lam).min() <= 1e-12
    assert out.in_class()
    with pytest.raises(KernelDimensionUnrecoverable):
        mollify_field(K, 0.5, ContourPath(0.0, 1.5))


def test_mollify_converges_as_bandwidth_shrinks():
    s, K = _circle_field(256)
    spacing = 2 * np.pi / 256
    dists = [mollify_field(K, b * spacing, ContourPath(0.0, 0.5)).max_distance(K) for b in (4, 2, 1.5, 1.1)]
    assert all(b < a for a, b in zip(dists, dists[1:]))


# --------------------------------------------------------------- Galerkin

@pytest.fixture(scope="module")
def hilbert8():
    s = build_scenario("hilbert_toy", {"ambient_dim": 8})
    b = fiber_splitting(s.functional, s.manifold)
    return s, b, operator_field(s.functional, s.manifold)


def test_galerkin_basis_is_l_invariant():
    L = SymOperator(np.diag([1.0, 0.0, -1.0, 1.0, 0.0, -1.0]))
    E = galerkin_basis(L)
    assert np.array_equal(np.abs(E[:, 0]) + np.abs(E[:, 1]), np.array([0, 1, 0, 0, 1, 0.0]))
    for n in range(1, 7):
        V = E[:, :n]
        assert np.abs((np.eye(6) - V @ V.T) @ L.entries @ V).max() == 0.0


def test_galerkin_full_level_is_exact(hilbert8):
    s, b, K = hilbert8
    r = galerkin_reduce(s.functional, K, b, 8)
    assert max(r.diagnostics.values()) <= 1e-10
    for i in range(0, K.kernel_dim and len(K.samples), 7):
        assert gap_distance(r.F0[i], b.x_zero[i]) <= 1e-10
        assert gap_distance(r.U_minus[i], b.x_minus[i]) <= 1e-10
        assert gap_distance(r.Y_plus[i], b.x_plus[i]) <= 1e-10


def test_galerkin_below_kernel_dim_collapses(hilbert8):
    s, b, K = hilbert8
    with pytest.raises(KernelCollapse):
        galerkin_reduce(s.functional, K, b, 0)


def test_galerkin_sweep_monotone(hilbert8, tmp_path):
    s, b, K = hilbert8
    sweep = galerkin_sweep(s.functional, K, b, [4, 6, 8])
    rows = [r.diagnostics for r in sweep["reductions"]]
    assert [r.n for r in sweep["reductions"]] == [4, 6, 8]
    for key in ("delta_zero", "op_gap", "fiber_gap", "flow_drift"):
        seq = [row[key] for row in rows]
        assert all(bb <= aa + 1e-10 for aa, bb in zip(seq, seq[1:])), key
        assert seq[-1] <= 1e-8
    assert sweep["n0"] is not None and sweep["n0"] <= 4
    write_diagnostics_csv(tmp_path / "d.csv", sweep["reductions"])
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "n,delta_zero,op_gap,fiber_gap,flow_drift" and len(lines) == 4
    lim = check_reduction_limits(sweep["reductions"])
    assert lim["flow_monotone"] and lim["density_monotone"]
    assert lim["flow_invariance"][-1] <= 1e-8 and lim["density"][-1] <= 1e-8


def test_reduction_limits_trivial_cases(hilbert8):
    s, b, K = hilbert8
    full = galerkin_reduce(s.functional, K, b, 8, s_grid=[0.0])
    lim = check_reduction_limits([full], s_grid=[0.0])
    assert lim["flow_invariance"] == [pytest.approx(0.0, abs=1e-12)]
    assert lim["density"][0] <= 1e-12

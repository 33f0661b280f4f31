"""Fibered saddle neighborhoods, the deformation flow and its exp(theta L) x + C decomposition."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.optimize

from .errors import (BoundExceedsSigma, ConeViolated, CriticalOnSublevel, LeftNeighborhood,
                     LevelGapViolated, QuadratureDivergence, StepTooLarge, TubularRadiusExceeded)
from .functional import SplitFunctional
from .grassmann import Subspace
from .manifold_bundle import BundleSample, galerkin_basis
from .spectral_core import SymOperator

EXIT_TIME_TOL = 1e-10
LEVEL_SLACK = 1e-6
DESCENT_SLACK = 1e-8
RECON_TOL = 1e-6
QUADRATURE_LIMIT = 1e-4
GRID_SEED = 20240611
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(3)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


@dataclass(frozen=True)
class FiberCoords:
    """x = foot + v_minus + v_plus (+ residual kernel component)."""

    params: np.ndarray
    foot: np.ndarray
    v_minus: np.ndarray
    v_plus: np.ndarray
    residual: float
    index: int

    @property
    def norms(self):
        return float(np.linalg.norm(self.v_minus)), float(np.linalg.norm(self.v_plus))


@dataclass(frozen=True, eq=False)
class SaddleNeighborhood:
    bundle: BundleSample
    r_minus: float
    r_plus: float
    fiber_tol: float = 1e-6
    c0: Optional[float] = None
    sigma: Optional[float] = None
    boundary_tol: float = 1e-9

    @property
    def manifold(self):
        return self.bundle.manifold

    @property
    def functional(self) -> SplitFunctional:
        return self.bundle.functional

    @property
    def radius(self) -> float:
        return min(self.r_minus, self.r_plus)

    def with_levels(self, c0: float, sigma: float) -> "SaddleNeighborhood":
        return replace(self, c0=float(c0), sigma=float(sigma))

    def decompose(self, x) -> FiberCoords:
        x = np.asarray(x, dtype=float)
        params, foot, idx = self.manifold.nearest(x)
        Bm, Bp = self.bundle.fiber_bases(params)
        v = x - foot
        vm = Bm @ (Bm.T @ v)
        vp = Bp @ (Bp.T @ v)
        res = float(np.linalg.norm(v - vm - vp))
        return FiberCoords(params, foot, vm, vp, res, idx)

    def classify(self, x) -> str:
        """One of interior, minus (on the r_minus face), plus, corner, outside."""
        c = self.decompose(x)
        nm, np_ = c.norms
        if c.residual > self.fiber_tol * max(1.0, nm + np_):
            return "outside"
        tm, tp = self.boundary_tol * self.r_minus, self.boundary_tol * self.r_plus
        if nm > self.r_minus + tm or np_ > self.r_plus + tp:
            return "outside"
        on_m = nm >= self.r_minus - tm
        on_p = np_ >= self.r_plus - tp
        if on_m and on_p:
            return "corner"
        return "minus" if on_m else ("plus" if on_p else "interior")

    def contains(self, x, closed: bool = False) -> bool:
        k = self.classify(x)
        return k == "interior" or (closed and k != "outside")

    def p_M(self, x) -> np.ndarray:
        return self.decompose(x).foot

    def p_minus(self, x) -> np.ndarray:
        return self.decompose(x).v_minus

    def p_plus(self, x) -> np.ndarray:
        return self.decompose(x).v_plus


def _fiber_dirs(V: Subspace, extra: int, rng: np.random.Generator) -> np.ndarray:
    """Unit vectors of V: +-basis columns plus a few random combinations (rows)."""
    if V.dim == 0:
        return np.zeros((1, V.ambient_dim))
    B = V.basis
    dirs = [B.T, -B.T]
    if extra and V.dim > 1:
        c = rng.standard_normal((V.dim, extra))
        dirs.append((B @ (c / np.linalg.norm(c, axis=0))).T)
    return np.vstack(dirs)


def _pairs(A: np.ndarray, B: np.ndarray, cap: int):
    if len(A) * len(B) <= cap:
        return [(a, b) for a in A for b in B]
    k = max(len(A), len(B))
    return [(A[i % len(A)], B[i % len(B)]) for i in range(k)]


def _sample_ids(nbhd: SaddleNeighborhood, stride: int) -> list:
    return nbhd.manifold.grid_indices(stride)


def fiber_grid(nbhd: SaddleNeighborhood, a_fracs, b_fracs, stride: int = 1, extra: int = 2, cap: int = 64):
    """Points m_i + a r- u- + b r+ u+ over samples, fractions and fiber directions.

    Returns a list of (x, sample index, a, b, u_plus).
    """
    rng = np.random.default_rng(GRID_SEED)
    out = []
    for i in _sample_ids(nbhd, stride):
        m = nbhd.manifold.samples[i].point
        sp = nbhd.bundle.splittings[i]
        for um, up in _pairs(_fiber_dirs(sp.x_minus, extra, rng), _fiber_dirs(sp.x_plus, extra, rng), cap):
            for a in a_fracs:
                for b in b_fracs:
                    if (sp.x_minus.dim == 0 and a) or (sp.x_plus.dim == 0 and b):
                        continue
                    out.append((m + a * nbhd.r_minus * um + b * nbhd.r_plus * up, i, a, b, up))
    return out


def build_neighborhood(bundle: BundleSample, r_minus: float, r_plus: float, fiber_tol: float = 1e-6,
                       probe_stride: Optional[int] = None, coord_tol: float = 1e-6) -> SaddleNeighborhood:
    """Fibered disc bundle of radii (r-, r+) around the sampled manifold.

    Injectivity is checked by decomposing boundary probes: every probe must
    come back to the sample it was built from with the same fiber radii.
    """
    if r_minus <= 0 or r_plus <= 0:
        raise ValueError("radii must be positive")
    nbhd = SaddleNeighborhood(bundle, float(r_minus), float(r_plus), fiber_tol)
    per_axis = int(round(bundle.manifold.count ** (1.0 / max(bundle.manifold.d, 1))))
    stride = probe_stride or max(1, per_axis // (16 if bundle.manifold.d <= 1 else 8))
    scale = coord_tol * max(r_minus, r_plus, 1.0)
    for x, i, a, b, _ in fiber_grid(nbhd, (0.0, 1.0), (0.0, 1.0), stride):
        c = nbhd.decompose(x)
        m = bundle.manifold.samples[i].point
        nm, np_ = c.norms
        if (np.linalg.norm(c.foot - m) > scale or abs(nm - a * r_minus) > scale
                or abs(np_ - b * r_plus) > scale):
            raise TubularRadiusExceeded(
                f"probe built on sample {i} decomposes onto sample {c.index} "
                f"(|v-|={nm:.4g}, |v+|={np_:.4g}); radii exceed the tubular radius",
                sample=i, claimed_by=c.index, r_minus=r_minus, r_plus=r_plus)
    return nbhd


def _fracs(refine: int, closed_top: bool = True):
    k = 4 * max(1, int(refine)) + 1
    t = np.linspace(0.0, 1.0, k)
    return tuple(t if closed_top else t[:-1])


def verify_saddle_conditions(nbhd: SaddleNeighborhood, f: Optional[SplitFunctional] = None,
                             c0: Optional[float] = None, sigma: Optional[float] = None,
                             grad_floor: float = 1e-8, eps_factor: float = 1e-4, refine: int = 1,
                             stride: int = 1, raise_on_fail: bool = True) -> dict:
    """Sampled check of the fibered saddle conditions for f on nbhd.

    With c0 or sigma given (e.g. from an earlier run on the unperturbed
    functional) they are checked instead of chosen.
    """
    f = f or nbhd.functional
    report = {"passed": True, "violations": []}

    def fail(exc):
        report["passed"] = False
        report["violations"].append(exc.as_record())
        if raise_on_fail:
            raise exc

    minus = fiber_grid(nbhd, (1.0,), _fracs(refine), stride)
    zero = fiber_grid(nbhd, (0.0,), _fracs(refine), stride)
    sup_minus = max(f.value(p[0]) for p in minus) if minus else -np.inf
    inf_b0 = min(f.value(p[0]) for p in zero)
    report.update(sup_minus=float(sup_minus), inf_B0=float(inf_b0), level_gap=float(inf_b0 - sup_minus))
    if not sup_minus < inf_b0:
        fail(LevelGapViolated(f"sup over the r- face {sup_minus:.6g} >= inf over B0 {inf_b0:.6g}",
                              sup_minus=sup_minus, inf_B0=inf_b0))
    chosen = 0.5 * (sup_minus + inf_b0) if c0 is None else float(c0)
    report["c0"] = float(chosen)
    if c0 is not None and not sup_minus < chosen < inf_b0:
        fail(LevelGapViolated(f"c0={chosen:.6g} not strictly between {sup_minus:.6g} and {inf_b0:.6g}",
                              c0=chosen, sup_minus=sup_minus, inf_B0=inf_b0))

    interior = fiber_grid(nbhd, _fracs(refine), _fracs(refine), stride)
    sub = [np.linalg.norm(f.grad(p[0])) for p in interior if f.value(p[0]) <= chosen]
    min_sub = float(min(sub)) if sub else np.inf
    report["min_grad_on_sublevel"] = min_sub
    report["sublevel_points"] = len(sub)
    if min_sub <= grad_floor:
        fail(CriticalOnSublevel(f"|grad phi| = {min_sub:.3e} on the c0-sublevel", min_grad=min_sub))

    face = fiber_grid(nbhd, _fracs(refine, closed_top=False), (1.0,), stride)
    grads = [f.grad(p[0]) for p in face]
    min_bd = float(min(np.linalg.norm(g) for g in grads)) if grads else np.inf
    sig = 0.5 * min_bd if sigma is None else float(sigma)
    report.update(min_boundary_grad=min_bd, sigma=sig)
    eps = eps_factor * nbhd.radius
    rng = np.random.default_rng(GRID_SEED + 1)
    failures = 0
    for (x, i, a, b, up), g in zip(face, grads):
        n_hat = up / max(np.linalg.norm(up), 1e-300)
        dirs = [np.zeros_like(x), n_hat, -n_hat]
        r = rng.standard_normal((2, x.size))
        dirs.extend(r / np.linalg.norm(r, axis=1, keepdims=True))
        for u in dirs:
            v = g + 0.99 * sig * u
            if not (nbhd.contains(x - eps * v) and nbhd.classify(x + eps * v) == "outside"):
                failures += 1
    report["cone_failures"] = failures
    report["cone_ok"] = failures == 0
    if failures:
        fail(ConeViolated(f"{failures} cone probes on the r+ face do not enter B", failures=failures))
    report["margin"] = float(min(report["level_gap"], min_sub)) if report["passed"] else 0.0
    report["robust_budget"] = report["margin"] / 4.0
    return report


@dataclass(frozen=True, eq=False)
class PseudoGradient:
    """Vector field Z standing in for grad psi, with its sup-deviation on the r+ face."""

    field: Callable[[np.ndarray], np.ndarray]
    mode: str
    bound: float
    rank: Optional[int] = None

    def __call__(self, x) -> np.ndarray:
        return self.field(np.asarray(x, dtype=float))


def pseudogradient(f: SplitFunctional, mode: str = "exact", k: Optional[int] = None,
                   nbhd: Optional[SaddleNeighborhood] = None, sigma: Optional[float] = None,
                   refine: int = 1) -> PseudoGradient:
    """exact: Z = grad psi. finite_rank: Z = P_k grad psi, P_k onto the first k L-eigenvectors."""
    if mode == "exact":
        return PseudoGradient(f.psi_grad, "exact", 0.0)
    if mode != "finite_rank":
        raise ValueError(f"unknown pseudogradient mode {mode!r}")
    if k is None or not 0 <= k <= f.dim:
        raise ValueError(f"finite_rank needs 0 <= k <= {f.dim}")
    E = galerkin_basis(f.L)[:, :k]
    P = E @ E.T

    def Z(x):
        return P @ f.psi_grad(x)

    bound = 0.0
    if nbhd is not None and k < f.dim:
        face = fiber_grid(nbhd, _fracs(refine, closed_top=False), (1.0,))
        Q = np.eye(f.dim) - P
        bound = max(float(np.linalg.norm(Q @ f.psi_grad(p[0]))) for p in face)
    sig = sigma if sigma is not None else (nbhd.sigma if nbhd is not None else None)
    if sig is not None and bound >= sig:
        raise BoundExceedsSigma(f"finite-rank bound {bound:.4g} >= sigma {sig:.4g}", bound=bound, sigma=sig, k=k)
    return PseudoGradient(Z, "finite_rank", bound, k)


def _rk4(F, x, h):
    k1 = F(x)
    k2 = F(x + 0.5 * h * k1)
    k3 = F(x + 0.5 * h * k2)
    k4 = F(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def flow_field(f: SplitFunctional, Z) -> Callable[[np.ndarray], np.ndarray]:
    A = f.L.entries
    return lambda x: -(A @ x + Z(x))


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    times: np.ndarray
    states: np.ndarray
    phi: np.ndarray
    grad_norm: np.ndarray
    tau: float
    exit_kind: str
    step_h: float
    c0: float
    rhs: Callable = field(repr=False, default=None)

    @property
    def x0(self) -> np.ndarray:
        return self.states[0]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def integrate_flow(x0, f: SplitFunctional, Z, nbhd: SaddleNeighborhood, step_h: Optional[float] = None,
                   c0: Optional[float] = None, t_max: float = 1.0, check_membership: bool = True
                   ) -> FlowTrajectory:
    """Classical RK4 on x' = -(Lx + Z(x)) until the c0-sublevel is hit or t = 1."""
    x = np.array(x0, dtype=float)
    c0 = nbhd.c0 if c0 is None else float(c0)
    if c0 is None:
        raise ValueError("a level c0 is required (verify the neighborhood first)")
    h = 1e-2 * nbhd.r_minus if step_h is None else float(step_h)
    F = flow_field(f, Z)
    if check_membership and not nbhd.contains(x, closed=True):
        raise LeftNeighborhood("initial point is not in the closed neighborhood", where="start")
    times, states = [0.0], [x.copy()]
    phis = [f.value(x)]
    grads = [float(np.linalg.norm(f.grad(x)))]
    slack = DESCENT_SLACK * max(1.0, abs(phis[0] - c0))

    def done(tau, kind):
        return FlowTrajectory(np.array(times), np.array(states), np.array(phis), np.array(grads),
                              float(tau), kind, h, c0, F)

    if phis[0] <= c0:
        return done(0.0, "hit_sublevel")
    t = 0.0
    while t < t_max - 1e-15:
        hk = min(h, t_max - t)
        xn = _rk4(F, x, hk)
        pn = f.value(xn)
        if pn > phis[-1] + slack:
            raise StepTooLarge(f"phi increased by {pn - phis[-1]:.3e} at t={t:.6g}", t=t, step=hk)
        if pn <= c0:
            lo, hi = 0.0, hk
            while hi - lo > EXIT_TIME_TOL:
                mid = 0.5 * (lo + hi)
                if f.value(_rk4(F, x, mid)) <= c0:
                    hi = mid
                else:
                    lo = mid
            xn = _rk4(F, x, hi)
            times.append(t + hi)
            states.append(xn)
            phis.append(f.value(xn))
            grads.append(float(np.linalg.norm(f.grad(xn))))
            return done(t + hi, "hit_sublevel")
        if check_membership and not nbhd.contains(xn, closed=True):
            raise LeftNeighborhood(f"trajectory left the closed neighborhood at t={t + hk:.6g} "
                                   f"above the c0 level", t=t + hk, phi=pn, c0=c0)
        t += hk
        x = xn
        times.append(t)
        states.append(x.copy())
        phis.append(pn)
        grads.append(float(np.linalg.norm(f.grad(x))))
    return done(1.0, "time_out")


class _ExpL:
    """exp(sL) applied through the eigendecomposition of L."""

    def __init__(self, L: SymOperator):
        self.lam, self.V = L.eigh

    def apply(self, s, v):
        return self.V @ (np.exp(s * self.lam) * (self.V.T @ v))


@dataclass(frozen=True, eq=False)
class DeformationRecord:
    """eta(t, x0) = exp(theta L) x0 + C at the stored nodes, t normalized to [0, 1]."""

    t: np.ndarray
    theta: np.ndarray
    C: np.ndarray
    states: np.ndarray
    errors: np.ndarray
    x0: np.ndarray
    tau: float

    @property
    def reconstruction_error(self) -> float:
        return float(self.errors.max()) if self.errors.size else 0.0

    @property
    def theta_bound(self) -> float:
        return float(np.abs(self.theta).max())

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def theta_at(self, t: float) -> float:
        return float(np.interp(t, self.t, self.theta)) if self.t.size > 1 else float(self.theta[0])


def _step_integral(F, Z, expL: _ExpL, x, h):
    """int_0^h exp(-(h-s)L) b(s) ds, b = -Z(x(s)), dense states by RK4 re-stepping."""
    acc = np.zeros_like(x)
    for c, w in zip(_GL_NODES, _GL_WEIGHTS):
        xs = _rk4(F, x, c * h)
        acc += w * h * expL.apply(-(1.0 - c) * h, -Z(xs))
    return acc


def decompose_deformation(traj: FlowTrajectory, Z, L: SymOperator) -> DeformationRecord:
    """Variation of constants for y' = -Ly + b along a stored trajectory."""
    expL = _ExpL(L)
    x0 = traj.x0
    n = x0.size
    tau = traj.tau
    if tau == 0.0 or traj.times.size == 1:
        return DeformationRecord(np.array([0.0]), np.array([0.0]), np.zeros((1, n)), traj.states[:1].copy(),
                                 np.array([0.0]), x0.copy(), 0.0)
    F = traj.rhs
    Cs = [np.zeros(n)]
    for k in range(traj.times.size - 1):
        h = traj.times[k + 1] - traj.times[k]
        Cs.append(expL.apply(-h, Cs[-1]) + _step_integral(F, Z, expL, traj.states[k], h))
    Cs = np.array(Cs)
    theta = -traj.times
    errors = np.array([np.linalg.norm(expL.apply(th, x0) + C - s) for th, C, s in zip(theta, Cs, traj.states)])
    rec = DeformationRecord(traj.times / tau, theta, Cs, traj.states.copy(), errors, x0.copy(), tau)
    if rec.reconstruction_error > QUADRATURE_LIMIT:
        raise QuadratureDivergence(f"reconstruction error {rec.reconstruction_error:.3e}",
                                   error=rec.reconstruction_error)
    return rec


def juxtapose(first: DeformationRecord, second: DeformationRecord, L: SymOperator) -> DeformationRecord:
    """eta1 on [0, 1/2] then eta2 on [1/2, 1]; theta adds, C becomes exp(theta2 L) C1 + C2."""
    if not np.allclose(second.x0, first.final, atol=1e-12, rtol=0.0):
        raise ValueError("second deformation must start where the first one ends")
    expL = _ExpL(L)
    x0 = first.x0
    th1, C1 = first.theta[-1], first.C[-1]
    t = np.concatenate([0.5 * first.t, 0.5 + 0.5 * second.t[1:]])
    theta = np.concatenate([first.theta, th1 + second.theta[1:]])
    C = np.vstack([first.C] + [expL.apply(th2, C1) + C2 for th2, C2 in zip(second.theta[1:], second.C[1:])])
    states = np.vstack([first.states, second.states[1:]])
    errors = np.array([np.linalg.norm(expL.apply(th, x0) + c - s) for th, c, s in zip(theta, C, states)])
    return DeformationRecord(t, theta, C.reshape(len(t), -1), states, errors, x0.copy(),
                             first.tau + second.tau)


@dataclass(frozen=True, eq=False)
class DeformedSet:
    points: np.ndarray
    images: np.ndarray
    taus: np.ndarray
    levels_before: np.ndarray
    levels_after: np.ndarray
    records: tuple
    c0: float

    @property
    def reconstruction_error(self) -> float:
        return max((r.reconstruction_error for r in self.records), default=0.0)

    @property
    def theta_bound(self) -> float:
        return max((r.theta_bound for r in self.records), default=0.0)

    def c_envelope(self, tol: float = 1e-10) -> dict:
        """Bounded-range surrogate: max |C(1, x)| and dimension of their affine hull."""
        finals = np.array([r.C[-1] for r in self.records])
        if finals.size == 0:
            return {"max_norm": 0.0, "affine_dim": 0}
        diffs = finals[1:] - finals[0]
        dim = int(np.linalg.matrix_rank(diffs, tol=tol)) if len(diffs) else 0
        return {"max_norm": float(np.linalg.norm(finals, axis=1).max()), "affine_dim": dim}


def deform_set(A: Sequence, f: SplitFunctional, Z, nbhd: SaddleNeighborhood, c0: Optional[float] = None,
               step_h: Optional[float] = None) -> DeformedSet:
    """Apply eta(1, .) pointwise; points already in the c0-sublevel stay where they are."""
    c0 = nbhd.c0 if c0 is None else float(c0)
    pts, imgs, taus, before, after, recs = [], [], [], [], [], []
    for x in A:
        traj = integrate_flow(x, f, Z, nbhd, step_h, c0)
        rec = decompose_deformation(traj, Z, f.L)
        pts.append(np.asarray(x, dtype=float))
        imgs.append(traj.final)
        taus.append(traj.tau)
        before.append(traj.phi[0])
        after.append(traj.phi[-1])
        recs.append(rec)
    return DeformedSet(np.array(pts), np.array(imgs), np.array(taus), np.array(before), np.array(after),
                       tuple(recs), c0)


def write_trajectory_csv(path, traj: FlowTrajectory) -> None:
    n = traj.states.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x_{j + 1}" for j in range(n)] + ["phi", "grad_norm"])
        for t, x, p, g in zip(traj.times, traj.states, traj.phi, traj.grad_norm):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(p)), repr(float(g))])


def write_deformation_csv(path, rec: DeformationRecord) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "theta", "c_norm", "recon_err"])
        for t, th, C, e in zip(rec.t, rec.theta, rec.C, rec.errors):
            w.writerow([repr(float(t)), repr(float(th)), repr(float(np.linalg.norm(C))), repr(float(e))])


def _band_points(nbhd: SaddleNeighborhood, f: SplitFunctional, grid, level: float) -> list:
    """Points with phi = level on the fibers of the grid.

    For each grid point above the level, walk along its v- ray out to the
    r- face (where phi is below c0 < level on a verified neighborhood) and
    root-find the crossing.
    """
    out = []
    for x, i, a, b, up in grid:
        if f.value(x) <= level:
            continue
        m = nbhd.manifold.samples[i].point
        base = m + b * nbhd.r_plus * up
        vm = x - base
        if np.linalg.norm(vm) > 1e-14:
            um = vm / np.linalg.norm(vm)
        else:
            Bm = nbhd.bundle.splittings[i].x_minus.basis
            if Bm.shape[1] == 0:
                continue
            um = Bm[:, 0]
        g = lambda t: f.value(base + t * nbhd.r_minus * um) - level
        if g(1.0) >= 0:
            continue
        t = scipy.optimize.brentq(g, a, 1.0, xtol=1e-14)
        out.append(base + t * nbhd.r_minus * um)
    return out


def deformation_clauses(nbhd: SaddleNeighborhood, f: SplitFunctional, Z, delta: float, c: float = 0.0,
                        u_radius: Optional[float] = None, refine: int = 1, stride: int = 16,
                        step_h: Optional[float] = None) -> dict:
    """Check the three properties of the flow deformation at a chosen delta on a sampled grid of B.

    (a) eta(t, x) = x on the c0-sublevel; (b) eta(1, .) maps the (c0 + delta)-sublevel
    into the c0-sublevel; (c) points with phi <= c + delta outside the tube U of
    radius u_radius around M end in the (c - delta)-sublevel. Levels carry the
    1e-6 sublevel slack. Besides the grid, points placed on the levels
    c0 + delta/2 and c + delta/2 keep (b) and (c) from being vacuous for small delta.
    """
    c0 = nbhd.c0
    u_radius = 0.5 * nbhd.r_plus if u_radius is None else float(u_radius)
    grid = fiber_grid(nbhd, _fracs(refine), _fracs(refine), stride)
    pts = [p[0] for p in grid]
    pts += _band_points(nbhd, f, grid, c0 + 0.5 * delta)
    if c != c0:
        pts += _band_points(nbhd, f, grid, c + 0.5 * delta)
    counts = {"a": [0, 0], "b": [0, 0], "c": [0, 0]}
    left = 0
    for x in pts:
        phi = f.value(x)
        in_b = phi <= c0 + delta
        in_c = phi <= c + delta and nbhd.manifold.distance(x) >= u_radius
        if not (in_b or in_c):
            continue
        try:
            traj = integrate_flow(x, f, Z, nbhd, step_h, c0)
        except LeftNeighborhood:
            left += 1
            continue
        end = traj.phi[-1]
        if phi <= c0:
            counts["a"][0] += 1
            counts["a"][1] += int(traj.tau == 0.0 and np.array_equal(traj.final, x))
        elif in_b:
            counts["b"][0] += 1
            counts["b"][1] += int(end <= c0 + LEVEL_SLACK)
        if in_c and phi > c0:
            counts["c"][0] += 1
            counts["c"][1] += int(end <= c - delta + LEVEL_SLACK)
    out = {"delta": float(delta), "c": float(c), "u_radius": u_radius, "left_neighborhood": left}
    for k, (tot, ok) in counts.items():
        out[f"clause_{k}_points"] = tot
        out[f"clause_{k}_holds"] = ok == tot
    out["holds"] = all(out[f"clause_{k}_holds"] for k in counts) and left == 0
    return out

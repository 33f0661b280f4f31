"""Sampled critical manifolds, Hessian fiber bundles and Galerkin reductions.

Every "uniformly in m" statement becomes a maximum over the sample grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (Degenerate, DimensionTooSmall, GapLost, InconsistentScenario,
                     KernelCollapse, KernelDimensionUnrecoverable, NoSpectralGap,
                     NotCritical, ProjectionDegenerate, UnsupportedKind)
from .functional import SplitFunctional
from .grassmann import (Subspace, gap_distance, orthogonal_sum, projector,
                        project_subspace, pseudodistance)
from .spectral_core import (ContourPath, SpectralSplitting, SymOperator, riesz_projector,
                            sign_masks, spectral_split)

KINDS = ("circle", "torus2", "twisted_circle", "point")
MIN_DIM = {"circle": 3, "torus2": 6, "twisted_circle": 4, "point": 1}
DEFAULT_ND_TOL = 1e-6
DEFAULT_CRIT_TOL = 1e-8
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ManifoldSample:
    params: np.ndarray
    point: np.ndarray
    tangent: Subspace


@dataclass(frozen=True, eq=False)
class CriticalManifold:
    """A compact manifold given by a periodic chart and sampled on a uniform grid."""

    kind: str
    d: int
    embed: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    samples: tuple
    grid_shape: tuple
    lipschitz: float = 1.0
    foot_params: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    @property
    def ambient_dim(self) -> int:
        return self.samples[0].point.shape[0]

    @property
    def count(self) -> int:
        return len(self.samples)

    @property
    def points(self) -> np.ndarray:
        return np.array([s.point for s in self.samples])

    def adjacent_pairs(self) -> list[tuple[int, int]]:
        """Neighbouring sample indices along every grid axis, wrapping periodically."""
        if self.d == 0:
            return []
        idx = np.arange(self.count).reshape(self.grid_shape)
        pairs = []
        for axis in range(self.d):
            nxt = np.roll(idx, -1, axis=axis)
            pairs.extend(zip(idx.ravel().tolist(), nxt.ravel().tolist()))
        return pairs

    def grid_indices(self, stride: int = 1) -> list[int]:
        """Sample indices keeping every stride-th sample along each grid axis."""
        idx = np.arange(self.count).reshape(self.grid_shape)
        step = max(1, int(stride))
        return idx[tuple(slice(None, None, step) for _ in self.grid_shape)].ravel().tolist()

    def tangent_at(self, params) -> Subspace:
        if self.d == 0:
            return Subspace.zero(self.ambient_dim)
        return Subspace.span(self.jacobian(np.asarray(params, dtype=float)))

    def nearest(self, x, iterations: int = 30):
        """Foot point of x on M: closed form when the chart has one, otherwise the
        nearest sample refined by Newton on the squared chart distance.

        Returns (params, point, sample_index).
        """
        x = np.asarray(x, dtype=float)
        i = int(np.argmin(np.linalg.norm(self.points - x, axis=1)))
        theta = np.array(self.samples[i].params, dtype=float)
        if self.d == 0:
            return theta, self.samples[0].point, 0
        if self.foot_params is not None:
            theta = self.foot_params(x)
            return theta, self.embed(theta), i
        # Gauss-Newton is only linear for points far from M, so use Newton with a
        # differenced Hessian of the gradient J^T r; the fixed point is unaffected by
        # the Hessian error. Gauss-Newton is the fallback when it is not positive.
        def grad(th):
            return self.jacobian(th).T @ (self.embed(th) - x)

        h = 1e-6
        for _ in range(iterations):
            g = grad(theta)
            H = np.empty((self.d, self.d))
            for k in range(self.d):
                e = np.zeros(self.d)
                e[k] = h
                H[:, k] = (grad(theta + e) - grad(theta - e)) / (2 * h)
            H = 0.5 * (H + H.T)
            if np.linalg.eigvalsh(H).min() <= 1e-12:
                J = self.jacobian(theta)
                H = J.T @ J
            step = -np.linalg.solve(H, g)
            theta = theta + step
            if np.abs(step).max() < 1e-14:
                break
        return theta, self.embed(theta), i

    def distance(self, x) -> float:
        _, m, _ = self.nearest(x)
        return float(np.linalg.norm(np.asarray(x, dtype=float) - m))


def _circle_chart(n, center, frame, radius):
    a, b = frame[:, 0], frame[:, 1]

    def embed(p):
        return center + radius * (np.cos(p[0]) * a + np.sin(p[0]) * b)

    def jac(p):
        return (radius * (-np.sin(p[0]) * a + np.cos(p[0]) * b)).reshape(n, 1)

    def foot(x):
        y = x - center
        return np.array([np.arctan2(b @ y, a @ y)])

    return embed, jac, foot


def _torus_chart(n, center, frame, radii):
    a1, b1, a2, b2 = (frame[:, j] for j in range(4))

    def embed(p):
        return (center + radii[0] * (np.cos(p[0]) * a1 + np.sin(p[0]) * b1)
                + radii[1] * (np.cos(p[1]) * a2 + np.sin(p[1]) * b2))

    def jac(p):
        return np.column_stack([radii[0] * (-np.sin(p[0]) * a1 + np.cos(p[0]) * b1),
                                radii[1] * (-np.sin(p[1]) * a2 + np.cos(p[1]) * b2)])

    def foot(x):
        y = x - center
        return np.array([np.arctan2(b1 @ y, a1 @ y), np.arctan2(b2 @ y, a2 @ y)])

    return embed, jac, foot


def sample_manifold(kind: str, ambient_dim: int, count=64, geometry_params: Optional[dict] = None
                    ) -> CriticalManifold:
    """Sample a chart-based manifold on a uniform periodic parameter grid.

    ``count`` is the number of samples per parameter axis (an int, or a pair
    for the torus). ``geometry_params`` may carry ``center``, ``radius`` (or
    ``radii``) and an orthonormal ``frame`` whose columns span the embedding
    planes.
    """
    if kind not in KINDS:
        raise UnsupportedKind(f"unsupported manifold kind {kind!r}", kind=kind)
    n = int(ambient_dim)
    if n < MIN_DIM[kind]:
        raise DimensionTooSmall(f"{kind} needs ambient dimension >= {MIN_DIM[kind]}, got {n}")
    g = dict(geometry_params or {})
    center = np.asarray(g.get("center", np.zeros(n)), dtype=float)

    if kind == "point":
        p = np.zeros(0)
        sample = ManifoldSample(p, center.copy(), Subspace.zero(n))
        return CriticalManifold(kind, 0, lambda _p: center, lambda _p: np.zeros((n, 0)),
                                (sample,), (1,), 0.0)

    counts = tuple(count) if isinstance(count, (tuple, list)) else None
    if kind == "torus2":
        counts = counts or (int(count), int(count))
        frame = np.asarray(g.get("frame", np.eye(n)[:, :4]), dtype=float)
        radii = tuple(g.get("radii", (1.0, 1.0)))
        embed, jac, foot = _torus_chart(n, center, frame, radii)
        grids = [np.arange(c) * TWO_PI / c for c in counts]
        params = [np.array([u, v]) for u in grids[0] for v in grids[1]]
        lip = float(np.hypot(*radii))
    else:
        counts = counts or (int(count),)
        frame = np.asarray(g.get("frame", np.eye(n)[:, :2]), dtype=float)
        radius = float(g.get("radius", 1.0))
        embed, jac, foot = _circle_chart(n, center, frame, radius)
        params = [np.array([t]) for t in np.arange(counts[0]) * TWO_PI / counts[0]]
        lip = radius
    if min(counts) < 16:
        raise ValueError(f"need at least 16 samples per axis, got {min(counts)}")
    samples = tuple(ManifoldSample(p, embed(p), Subspace.span(jac(p))) for p in params)
    d = len(counts)
    # closed-form foot point needs orthonormal frame columns; otherwise Gauss-Newton
    if np.abs(frame.T @ frame - np.eye(frame.shape[1])).max() > 1e-12:
        foot = None
    return CriticalManifold(kind, d, embed, jac, samples, counts, lip, foot)


def hessian_at(f: SplitFunctional, x, mode: str = "analytic", h: Optional[float] = None) -> SymOperator:
    """Hessian of phi at x, analytic or by central differences of the gradient."""
    x = np.asarray(x, dtype=float)
    if mode == "analytic":
        return SymOperator.symmetrized(f.hess(x))
    if mode != "central_fd":
        raise ValueError(f"unknown Hessian mode {mode!r}")
    if h is None:
        h = np.finfo(float).eps ** (1.0 / 3.0) * (1.0 + np.linalg.norm(x))
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    n = x.shape[0]
    H = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        H[:, j] = (f.grad(x + e) - f.grad(x - e)) / (2.0 * h)
    return SymOperator.symmetrized(H)


@dataclass(frozen=True, eq=False)
class BundleSample:
    """Per-sample splittings X- (+) X0 (+) X+ of the Hessian along M."""

    manifold: CriticalManifold
    splittings: tuple
    nd_residuals: np.ndarray
    continuity: dict
    functional: SplitFunctional = field(repr=False)
    zero_tol: float = 1e-8
    hessian_mode: str = "analytic"

    @property
    def gaps(self) -> np.ndarray:
        return np.array([s.gap for s in self.splittings])

    @property
    def x_minus(self) -> list[Subspace]:
        return [s.x_minus for s in self.splittings]

    @property
    def x_zero(self) -> list[Subspace]:
        return [s.x_zero for s in self.splittings]

    @property
    def x_plus(self) -> list[Subspace]:
        return [s.x_plus for s in self.splittings]

    def fiber_at(self, params) -> SpectralSplitting:
        """Splitting at an arbitrary chart parameter (between samples)."""
        m = self.manifold.embed(np.asarray(params, dtype=float))
        return spectral_split(hessian_at(self.functional, m, self.hessian_mode), self.zero_tol)

    def fiber_bases(self, params):
        """Orthonormal bases (X-, X+) at a chart parameter, as plain arrays.

        Same thresholds as fiber_at without building Subspace objects; used by
        the neighborhood membership queries.
        """
        m = self.manifold.embed(np.asarray(params, dtype=float))
        if self.hessian_mode == "analytic":
            H = self.functional.hess(m)
        else:
            H = hessian_at(self.functional, m, self.hessian_mode).entries
        lam, vec = np.linalg.eigh(H)
        neg, _, pos = sign_masks(lam, self.zero_tol)
        return vec[:, neg], vec[:, pos]


def _hessian_mode(f: SplitFunctional, mode: Optional[str]) -> str:
    if mode is not None:
        return mode
    return "analytic" if f.has_hessian else "central_fd"


def fiber_splitting(f: SplitFunctional, M: CriticalManifold, zero_tol: float = 1e-8,
                    nd_tol: float = DEFAULT_ND_TOL, crit_tol: float = DEFAULT_CRIT_TOL,
                    hessian_mode: Optional[str] = None) -> BundleSample:
    """Check [C] and [ND] on every sample and record the Hessian splitting."""
    mode = _hessian_mode(f, hessian_mode)
    splits, residuals = [], []
    for i, s in enumerate(M.samples):
        g = np.linalg.norm(f.grad(s.point))
        if g > crit_tol:
            raise NotCritical(f"|grad phi| = {g:.3e} at sample {i}", sample=i, grad_norm=g)
        sp = spectral_split(hessian_at(f, s.point, mode), zero_tol)
        if sp.x_zero.dim != M.d:
            raise Degenerate(f"Hessian kernel has dimension {sp.x_zero.dim}, manifold has {M.d}",
                             sample=i, kernel_dim=sp.x_zero.dim)
        res = gap_distance(sp.x_zero, s.tangent)
        if res > nd_tol:
            raise Degenerate(f"kernel/tangent distance {res:.3e} exceeds nd_tol", sample=i, residual=res)
        splits.append(sp)
        residuals.append(res)
    pairs = M.adjacent_pairs()
    continuity = {
        name: max((gap_distance(getattr(splits[i], name), getattr(splits[j], name)) for i, j in pairs),
                  default=0.0)
        for name in ("x_minus", "x_zero", "x_plus")
    }
    return BundleSample(M, tuple(splits), np.array(residuals), continuity, f, zero_tol, mode)


@dataclass(frozen=True, eq=False)
class OperatorField:
    """Samples K_m of a compact-operator field, so that L + K_m is the Hessian at m."""

    samples: tuple
    kernel_dim: int
    L: SymOperator
    grid_shape: tuple

    def total(self, i: int) -> SymOperator:
        return self.L + self.samples[i]

    def kernel_dims(self, zero_tol: float = 1e-8) -> list[int]:
        return [spectral_split(self.total(i), zero_tol).x_zero.dim for i in range(len(self.samples))]

    def in_class(self, zero_tol: float = 1e-8) -> bool:
        try:
            return all(k == self.kernel_dim for k in self.kernel_dims(zero_tol))
        except NoSpectralGap:
            return False

    def stacked(self) -> np.ndarray:
        return np.array([k.entries for k in self.samples])

    def max_distance(self, other: "OperatorField") -> float:
        return max(np.linalg.norm(a.entries - b.entries, 2) for a, b in zip(self.samples, other.samples))


def operator_field(f: SplitFunctional, M: CriticalManifold, hessian_mode: Optional[str] = None
                   ) -> OperatorField:
    """K_m = Hess phi(m) - L along the samples of M."""
    mode = _hessian_mode(f, hessian_mode)
    ks = tuple(hessian_at(f, s.point, mode) - f.L for s in M.samples)
    return OperatorField(ks, M.d, f.L, M.grid_shape)


def _periodic_gaussian(count: int, bandwidth: float) -> np.ndarray:
    spacing = TWO_PI / count
    offsets = np.arange(count)
    dist = np.minimum(offsets, count - offsets) * spacing
    w = np.exp(-0.5 * (dist / bandwidth) ** 2)
    return w / w.sum()


def smooth_field(K: OperatorField, bandwidth: float) -> np.ndarray:
    """Periodic Gaussian convolution of every matrix entry over the parameter grid."""
    stack = K.stacked()
    n = K.L.dim
    if K.kernel_dim == 0 or len(K.samples) == 1:
        return stack
    grid = stack.reshape(*K.grid_shape, n, n)
    for axis, count in enumerate(K.grid_shape):
        if bandwidth <= TWO_PI / count:
            raise ValueError(f"bandwidth {bandwidth} must exceed grid spacing {TWO_PI / count:.4g}")
        kernel = np.fft.fft(_periodic_gaussian(count, bandwidth))
        shape = [1] * grid.ndim
        shape[axis] = count
        grid = np.fft.ifft(np.fft.fft(grid, axis=axis) * kernel.reshape(shape), axis=axis).real
    return grid.reshape(len(K.samples), n, n)


def rank_correct(L: SymOperator, K_tilde: np.ndarray, contour: ContourPath, d: int) -> SymOperator:
    """Force dim ker(L + K) = d: L + K is replaced by 0 on the Riesz subspace V
    around zero and kept on its orthogonal complement."""
    H = SymOperator.symmetrized(L.entries + K_tilde)
    P = riesz_projector(H, contour)
    w, vecs = np.linalg.eigh(0.5 * (P + P.T))
    rank = int(np.sum(w > 0.5))
    if rank != d:
        raise KernelDimensionUnrecoverable(f"Riesz contour captured {rank} eigenvalues, need {d}",
                                           captured=rank, required=d)
    V = vecs[:, w > 0.5]
    Q = np.eye(L.dim) - V @ V.T
    return SymOperator.symmetrized(Q @ H.entries @ Q - L.entries)


def mollify_field(K: OperatorField, bandwidth: float, contour: ContourPath) -> OperatorField:
    """Smooth K over the parameter grid, then restore kernel dimension d exactly."""
    smoothed = smooth_field(K, bandwidth)
    corrected = tuple(rank_correct(K.L, Kt, contour, K.kernel_dim) for Kt in smoothed)
    return OperatorField(corrected, K.kernel_dim, K.L, K.grid_shape)


# ---------------------------------------------------------------- Galerkin

def galerkin_basis(L: SymOperator, zero_tol: float = 1e-8) -> np.ndarray:
    """L-eigenvectors ordered kernel first, then alternating negative/positive.

    Every leading block spans an L-invariant subspace. A diagonal L keeps
    its coordinate vectors, ordered by index within each sign class.
    """
    A = L.entries
    n = L.dim
    tol = zero_tol * max(L.norm, 1.0)
    if np.count_nonzero(A - np.diag(np.diag(A))) == 0:
        lam, vec = np.diag(A).copy(), np.eye(n)
    else:
        lam, vec = L.eigh
    kern = [i for i in range(n) if abs(lam[i]) <= tol]
    neg = [i for i in range(n) if lam[i] < -tol]
    pos = [i for i in range(n) if lam[i] > tol]
    order = list(kern)
    for k in range(max(len(neg), len(pos))):
        order.extend(lst[k] for lst in (neg, pos) if k < len(lst))
    return vec[:, order]


def flow_operator(L: SymOperator, s: float) -> np.ndarray:
    """exp(sL); for canonical L the eigenvalues are e^{-s}, 1, e^{s}."""
    lam, vec = L.eigh
    return (vec * np.exp(s * lam)) @ vec.T


@dataclass(frozen=True, eq=False)
class GalerkinReduction:
    n: int
    X_n: Subspace
    F0: tuple
    U_minus: tuple
    U_plus: tuple
    Y_minus: tuple
    Y_plus: tuple
    Y: tuple
    T: tuple
    gaps: np.ndarray
    t_gaps: np.ndarray
    diagnostics: dict
    L: SymOperator = field(repr=False)
    adjacent: tuple = ()

    @property
    def kernel_identity_holds(self) -> bool:
        """Smallest nonzero |eigenvalue| of every T_nm is at least half the splitting gap."""
        return bool(np.all(self.t_gaps >= 0.5 * self.gaps))

    def row(self) -> dict:
        return {"n": self.n, **self.diagnostics}


def _flow_drift(L: SymOperator, Y: Sequence[Subspace], pairs, s_grid) -> float:
    worst = 0.0
    for s in s_grid:
        E = flow_operator(L, float(s))
        moved = [Subspace.span(E @ y.basis) for y in Y]
        for i, j in pairs:
            worst = max(worst, gap_distance(moved[i], Y[j]))
    return worst


DEFAULT_S_GRID = tuple(np.linspace(-2.0, 2.0, 9))


def galerkin_reduce(f: SplitFunctional, K: OperatorField, bundle: BundleSample, n: int,
                    zero_tol: float = 1e-8, s_grid: Sequence[float] = DEFAULT_S_GRID) -> GalerkinReduction:
    """Finite-dimensional reduction of the splitting bundle onto the first n L-eigenvectors."""
    L = f.L
    N = L.dim
    d = K.kernel_dim
    if n < d:
        raise KernelCollapse(f"level n={n} below kernel dimension d={d}", n=n, d=d)
    if n > N:
        raise ValueError(f"level n={n} exceeds ambient dimension {N}")
    if len(K.samples) != bundle.manifold.count:
        raise InconsistentScenario("operator field and bundle have different sample counts")
    E = galerkin_basis(L, zero_tol)[:, :n]
    Xn = Subspace(E)
    out = {k: [] for k in ("F0", "Um", "Up", "Ym", "Yp", "Y", "T", "gap", "tgap")}
    delta_zero = op_gap = fiber_gap = 0.0
    for i in range(len(K.samples)):
        H = K.total(i)
        sp = spectral_split(H, zero_tol)
        if sp.x_zero.dim != d:
            raise Degenerate(f"L + K_m has kernel dimension {sp.x_zero.dim} at sample {i}", sample=i)
        delta = pseudodistance(sp.x_zero, Xn)
        delta_zero = max(delta_zero, delta)
        try:
            F0 = project_subspace(sp.x_zero, Xn)
        except ProjectionDegenerate as exc:
            raise KernelCollapse(f"kernel projects degenerately onto X_{n} at sample {i}",
                                 n=n, sample=i, delta=delta) from exc
        # U = orthocomplement of F0 inside X_n
        coeff = Subspace(E.T @ F0.basis).complement().basis
        U = E @ coeff
        PU = U @ U.T
        A = H.entries
        T_full = PU @ A @ PU
        T = SymOperator.symmetrized(E.T @ T_full @ E)
        op_gap = max(op_gap, float(np.linalg.norm((T_full - A) @ E, 2)))
        block = U.T @ A @ U
        mu, w = np.linalg.eigh(0.5 * (block + block.T)) if U.shape[1] else (np.zeros(0), np.zeros((0, 0)))
        tiny = np.abs(mu) <= zero_tol * max(H.norm, 1.0) * 10
        if np.any(tiny):
            raise GapLost(f"T_nm has extra kernel on U at sample {i} (|mu|={np.abs(mu).min():.3e})",
                          n=n, sample=i)
        Um = Subspace(U @ w[:, mu < 0]) if U.shape[1] else Subspace.zero(N)
        Up = Subspace(U @ w[:, mu > 0]) if U.shape[1] else Subspace.zero(N)
        try:
            Ym = project_subspace(Um, sp.x_minus)
            Yp = project_subspace(Up, sp.x_plus)
        except ProjectionDegenerate as exc:
            raise GapLost(f"U+- projects degenerately onto X+- at sample {i}", n=n, sample=i) from exc
        fiber_gap = max(fiber_gap, gap_distance(Um, Ym), gap_distance(Up, Yp))
        Y = orthogonal_sum(orthogonal_sum(Ym, sp.x_zero), Yp)
        out["F0"].append(F0)
        out["Um"].append(Um)
        out["Up"].append(Up)
        out["Ym"].append(Ym)
        out["Yp"].append(Yp)
        out["Y"].append(Y)
        out["T"].append(T)
        out["gap"].append(sp.gap)
        out["tgap"].append(float(np.abs(mu).min()) if mu.size else np.inf)
    pairs = tuple(bundle.manifold.adjacent_pairs()) + tuple((i, i) for i in range(len(K.samples)))
    diagnostics = {
        "delta_zero": float(delta_zero),
        "op_gap": float(op_gap),
        "fiber_gap": float(fiber_gap),
        "flow_drift": float(_flow_drift(L, out["Y"], pairs, s_grid)),
    }
    return GalerkinReduction(n, Xn, tuple(out["F0"]), tuple(out["Um"]), tuple(out["Up"]),
                             tuple(out["Ym"]), tuple(out["Yp"]), tuple(out["Y"]), tuple(out["T"]),
                             np.array(out["gap"]), np.array(out["tgap"]), diagnostics, L, pairs)


def galerkin_sweep(f: SplitFunctional, K: OperatorField, bundle: BundleSample, levels: Sequence[int],
                   zero_tol: float = 1e-8, s_grid: Sequence[float] = DEFAULT_S_GRID) -> dict:
    """Reduce at every level; levels where the kernel identity fails are recorded, not raised.

    ``n0`` is the smallest level from which every larger level in the sweep
    has a gapped T_nm with smallest nonzero |eigenvalue| >= gap/2.
    """
    reductions, failures = [], {}
    for n in levels:
        try:
            reductions.append(galerkin_reduce(f, K, bundle, n, zero_tol, s_grid))
        except (GapLost, KernelCollapse) as exc:
            failures[n] = type(exc).__name__
    good = {r.n: r.kernel_identity_holds for r in reductions}
    n0 = None
    for n in sorted(levels, reverse=True):
        if good.get(n, False):
            n0 = n
        else:
            break
    return {"reductions": reductions, "failures": failures, "n0": n0}


def check_reduction_limits(reductions: Sequence[GalerkinReduction], s_grid: Sequence[float] = DEFAULT_S_GRID,
                           probes: Optional[np.ndarray] = None, rng: Optional[np.random.Generator] = None,
                           slack: float = 1e-10) -> dict:
    """Convergence of the reduced bundles: flow invariance (i) and density (ii), per level."""
    if not reductions:
        raise InconsistentScenario("no reductions given")
    N = reductions[0].X_n.ambient_dim
    counts = {len(r.Y) for r in reductions}
    levels = [r.n for r in reductions]
    if len(counts) != 1 or any(r.X_n.ambient_dim != N for r in reductions):
        raise InconsistentScenario("reductions come from different scenarios")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise InconsistentScenario(f"levels must increase, got {levels}")
    if any(abs(s) > 2.0 for s in s_grid):
        raise InconsistentScenario("s_grid must lie in [-2, 2]")
    if probes is None:
        rng = rng or np.random.default_rng(0)
        R = rng.standard_normal((N, 2 * N))
        probes = np.hstack([galerkin_basis(reductions[0].L), R / np.linalg.norm(R, axis=0)])
    flow, dense = [], []
    for r in reductions:
        flow.append(_flow_drift(r.L, r.Y, r.adjacent, s_grid))
        worst = 0.0
        for Y in r.Y:
            resid = probes - projector(Y) @ probes
            worst = max(worst, float(np.linalg.norm(resid, axis=0).max()))
        dense.append(worst)
    mono = lambda seq: all(b <= a + slack for a, b in zip(seq, seq[1:]))
    return {"levels": levels, "flow_invariance": flow, "density": dense,
            "flow_monotone": mono(flow), "density_monotone": mono(dense)}


def write_diagnostics_csv(path, reductions: Sequence[GalerkinReduction]) -> None:
    cols = ["n", "delta_zero", "op_gap", "fiber_gap", "flow_drift"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in reductions:
            row = r.row()
            w.writerow([row["n"]] + [repr(float(row[c])) for c in cols[1:]])

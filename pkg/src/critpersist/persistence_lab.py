"""Perturbations, multi-start critical point search, multiplicity verdicts and the C0 counterexample."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import spearmanr

from .errors import AmplitudeExceedsBudget, CritPersistError, EpsilonOutOfRange, NoConvergence
from .functional import SplitFunctional
from .manifold_bundle import fiber_splitting, hessian_at
from .saddle_flow import SaddleNeighborhood, build_neighborhood, fiber_grid, verify_saddle_conditions
from .scenarios import (CUPLENGTH, SCENARIOS, Scenario, build_scenario, cuplength, multiplicity_bound,
                        product_cuplength_bound)

__all__ = ["PerturbationSpec", "perturb", "perturb_with_report", "find_critical_points", "counterexample",
           "persistence_sweep", "build_scenario", "SCENARIOS", "CuplengthTable", "random_spec",
           "robustness_check", "write_report_csv", "format_counterexample"]

C1_KINDS = ("linear_tilt", "trig_bump", "finite_rank_smooth")
KINDS = C1_KINDS + ("c0_counterexample",)
BUDGET_SLACK = 1.01


class CuplengthTable:
    """Lookup of classical cuplengths; never computed from cohomology."""

    entries = dict(CUPLENGTH)

    def __getitem__(self, kind: str) -> int:
        return cuplength(kind)

    @staticmethod
    def product(*kinds: str) -> int:
        return product_cuplength_bound(*kinds)

    @staticmethod
    def bound(kind: str) -> int:
        return multiplicity_bound(kind)


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str
    amplitude: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be >= 0")


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def random_spec(kind: str, eps: float, rng: np.random.Generator, n: int) -> PerturbationSpec:
    """A random draw of the given kind with amplitude eps in R^n."""
    if kind in ("linear_tilt", "trig_bump"):
        return PerturbationSpec(kind, eps, {"direction": _unit(rng.standard_normal(n)).tolist()})
    if kind == "finite_rank_smooth":
        rank = min(3, n)
        B = np.linalg.qr(rng.standard_normal((n, rank)))[0]
        return PerturbationSpec(kind, eps, {"directions": B.T.tolist(), "coeffs": _unit(rng.standard_normal(rank)).tolist(),
                                            "phases": rng.uniform(0, 2 * np.pi, rank).tolist()})
    return PerturbationSpec(kind, eps, {})


def _f_eps(z, eps):
    """f(z) = sqrt(eps + z) - sqrt(eps) for z >= 0, odd reflection below 0."""
    z = np.asarray(z, dtype=float)
    return np.sign(z) * (np.sqrt(eps + np.abs(z)) - np.sqrt(eps))


def _df_eps(z, eps):
    return 0.5 / np.sqrt(eps + np.abs(np.asarray(z, dtype=float)))


def _d2f_eps(z, eps):
    # one-sided values of opposite sign at 0; the symmetric choice there is 0
    z = np.asarray(z, dtype=float)
    return -np.sign(z) * 0.25 / (eps + np.abs(z)) ** 1.5


def _term(spec: PerturbationSpec, n: int):
    """(value, grad, hess) of the added term."""
    e = float(spec.amplitude)
    p = spec.params
    if spec.kind == "linear_tilt":
        a = _unit(p.get("direction", np.eye(n)[0]))
        return (lambda x: e * float(a @ x), lambda x: e * a, lambda x: np.zeros((n, n)))
    if spec.kind == "trig_bump":
        a = _unit(p.get("direction", np.eye(n)[0]))
        return (lambda x: e * np.cos(a @ x), lambda x: -e * np.sin(a @ x) * a,
                lambda x: -e * np.cos(a @ x) * np.outer(a, a))
    if spec.kind == "finite_rank_smooth":
        B = np.atleast_2d(np.asarray(p["directions"], dtype=float))
        c = np.asarray(p["coeffs"], dtype=float)
        ph = np.asarray(p.get("phases", np.zeros(len(c))), dtype=float)
        if np.linalg.norm(B @ B.T - np.eye(len(B))) > 1e-10 or np.linalg.norm(c) > 1 + 1e-12:
            raise ValueError("finite_rank_smooth needs orthonormal directions and |coeffs| <= 1")
        return (lambda x: e * float(c @ np.sin(B @ x + ph)), lambda x: e * (B.T @ (c * np.cos(B @ x + ph))),
                lambda x: -e * (B.T * (c * np.sin(B @ x + ph))) @ B)
    # C0-small only: eps^(1/4) f_eps(x + y) on the first two coordinates
    if n != 2:
        raise ValueError("c0_counterexample lives in R^2")
    k = e ** 0.25
    s = np.array([1.0, 1.0])
    return (lambda x: k * float(_f_eps(s @ x, e)), lambda x: k * float(_df_eps(s @ x, e)) * s,
            lambda x: k * float(_d2f_eps(s @ x, e)) * np.outer(s, s))


def probe_points(s: Scenario, count: int = 256, seed: int = 0) -> np.ndarray:
    """Dense probe grid: manifold samples, fiber offsets around them and random points in a box."""
    rng = np.random.default_rng(seed)
    n = s.ambient_dim
    pts = [s.manifold.points]
    reach = s.diameter / 2 + max(s.r_minus, s.r_plus)
    for r in (0.5, 1.0):
        d = rng.standard_normal((len(s.manifold.points), n))
        pts.append(s.manifold.points + r * max(s.r_minus, s.r_plus) * d / np.linalg.norm(d, axis=1, keepdims=True))
    pts.append(rng.uniform(-reach, reach, (count, n)))
    P = np.vstack(pts)
    return np.array([p for p in P if s.functional.domain_check(p)])


def gradient_deviation(f: SplitFunctional, g: SplitFunctional, points) -> float:
    return float(max(np.linalg.norm(f.psi_grad(x) - g.psi_grad(x)) for x in points))


def perturb_with_report(s: Scenario, spec: PerturbationSpec, probes: Optional[np.ndarray] = None):
    """Perturbed functional (same L) and the measured sup-gradient deviation on the probe grid."""
    if spec.amplitude == 0.0:
        return s.functional, 0.0
    value, grad, hess = _term(spec, s.ambient_dim)
    f = s.functional.plus(value, grad, hess if s.functional.has_hessian else None,
                          name=f"{s.name}+{spec.kind}")
    probes = probe_points(s) if probes is None else probes
    dev = gradient_deviation(f, s.functional, probes)
    if spec.kind in C1_KINDS and dev > spec.amplitude * BUDGET_SLACK:
        raise AmplitudeExceedsBudget(f"measured deviation {dev:.6g} exceeds {spec.amplitude:.6g}",
                                     deviation=dev, amplitude=spec.amplitude)
    return f, dev


def perturb(s: Scenario, spec: PerturbationSpec) -> SplitFunctional:
    return perturb_with_report(s, spec)[0]


@dataclass(frozen=True)
class CriticalPoint:
    location: np.ndarray
    grad_norm: float
    distance_to_M: float
    cluster_id: int
    params: np.ndarray


@dataclass(frozen=True, eq=False)
class CriticalPointReport:
    points: tuple
    representatives: tuple
    bound_required: int
    dedup_radius: float
    seeds_total: int
    seeds_converged: int
    seeds_left: int
    continuum: bool
    error: Optional[dict] = None

    @property
    def count_distinct(self) -> int:
        return len(self.representatives)

    @property
    def verdict(self) -> str:
        return "pass" if (self.continuum or self.count_distinct >= self.bound_required) else "fail"

    @property
    def max_distance_to_M(self) -> float:
        return max((p.distance_to_M for p in self.representatives), default=float("nan"))


def _seeds(nbhd: SaddleNeighborhood, spec: dict) -> list:
    stride = int(spec.get("stride", 1))
    fr = tuple(spec.get("fractions", (0.0,)))
    out = []
    for i in nbhd.manifold.grid_indices(stride):
        m = nbhd.manifold.samples[i].point
        sp = nbhd.bundle.splittings[i]
        em = _unit(sp.x_minus.basis.sum(axis=1)) if sp.x_minus.dim else np.zeros_like(m)
        ep = _unit(sp.x_plus.basis.sum(axis=1)) if sp.x_plus.dim else np.zeros_like(m)
        for a in fr:
            for b in fr:
                out.append(m + a * nbhd.r_minus * em + b * nbhd.r_plus * ep)
    return out


def newton(f: SplitFunctional, x, nbhd: Optional[SaddleNeighborhood], tol: float = 1e-10, max_iter: int = 100,
           hessian_mode: str = "analytic"):
    """Damped Newton on grad f = 0 with least-squares steps; None if it fails or leaves the closed B."""
    x = np.array(x, dtype=float)
    g = f.grad(x)
    gn = np.linalg.norm(g)
    for _ in range(max_iter):
        if gn <= tol:
            return x, gn
        H = hessian_at(f, x, hessian_mode).entries
        step = np.linalg.lstsq(H, -g, rcond=None)[0]
        lam = 1.0
        while lam > 1e-4:
            y = x + lam * step
            try:
                gy = f.grad(y)
            except CritPersistError:
                gy = None
            if gy is not None and np.linalg.norm(gy) < (1 - 1e-4 * lam) * gn:
                break
            lam *= 0.5
        else:
            return None
        x, g = y, gy
        gn = np.linalg.norm(g)
        if nbhd is not None and not nbhd.contains(x, closed=True):
            return None
    return (x, gn) if gn <= tol else None


def find_critical_points(f: SplitFunctional, nbhd: SaddleNeighborhood, seeds: Optional[dict] = None,
                         newton_tol: float = 1e-10, dedup_radius: Optional[float] = None, max_iter: int = 100,
                         diameter: float = 2.0, continuum_tol: float = 1e-6) -> CriticalPointReport:
    """Multi-start Newton seeded on (manifold samples) x (fiber grid), clustered by dedup_radius."""
    M = nbhd.manifold
    bound = multiplicity_bound(M.kind)
    radius = 1e-3 * diameter if dedup_radius is None else float(dedup_radius)
    mode = "analytic" if f.has_hessian else "central_fd"
    seeds_list = _seeds(nbhd, seeds or {})
    found, left = [], 0
    for x0 in seeds_list:
        res = newton(f, x0, nbhd, newton_tol, max_iter, mode)
        if res is None:
            left += 1
            continue
        found.append(res)
    reps, points = [], []
    for x, gn in found:
        cid = next((k for k, r in enumerate(reps) if np.linalg.norm(r.location - x) < radius), None)
        params, foot, _ = M.nearest(x)
        cp = CriticalPoint(x, float(gn), float(np.linalg.norm(x - foot)), len(reps) if cid is None else cid,
                           np.asarray(params, dtype=float))
        if cid is None:
            reps.append(cp)
        points.append(cp)
    continuum = len(reps) > 4 * bound and all(r.distance_to_M <= continuum_tol for r in reps)
    err = None
    if not found:
        err = NoConvergence(f"none of {len(seeds_list)} seeds converged", seeds=len(seeds_list)).as_record()
    return CriticalPointReport(tuple(points), tuple(reps), bound, radius, len(seeds_list), len(found), left,
                               continuum, err)


def counterexample(epsilon: float, grid: int = 401, newton_tol: float = 1e-14) -> dict:
    """Phi(x, y) = x^2 - y^2 + eps^(1/4) f_eps(x + y): C0-small, yet no critical point in the unit ball."""
    eps = float(epsilon)
    if not 0.0 < eps < 1.0 / 64.0:
        raise EpsilonOutOfRange(f"epsilon={eps} outside (0, 1/64)", epsilon=eps)
    k = eps ** 0.25

    def grad(p):
        d = k * _df_eps(p[..., 0] + p[..., 1], eps)
        return np.stack([2 * p[..., 0] + d, -2 * p[..., 1] + d], axis=-1)

    def hess(p):
        c = k * float(_d2f_eps(p[0] + p[1], eps))
        return np.array([[2 + c, c], [c, -2 + c]])

    x = np.zeros(2)
    for _ in range(50):
        g = grad(x)
        if np.linalg.norm(g) <= newton_tol:
            break
        x = x - np.linalg.solve(hess(x), g)
    lam_closed = 1.0 / (4.0 * eps ** 0.25)
    t = np.linspace(-1.0, 1.0, grid)
    X, Y = np.meshgrid(t, t, indexing="ij")
    P = np.stack([X, Y], axis=-1)[X ** 2 + Y ** 2 <= 1.0]
    gmin = float(np.linalg.norm(grad(P), axis=1).min())
    return {"eps": eps, "lambda": float(x[1]), "lambda_closed_form": lam_closed, "x": float(x[0]), "y": float(x[1]),
            "norm": float(np.linalg.norm(x)), "grad_norm": float(np.linalg.norm(grad(x))),
            "min_grad_unit_ball": gmin, "critical_point": x, "outside_unit_ball": bool(np.linalg.norm(x) > 1.0)}


COUNTEREXAMPLE_FIELDS = ("eps", "lambda", "x", "y", "norm", "grad_norm", "min_grad_unit_ball")


def format_counterexample(rec: dict) -> str:
    return ", ".join(repr(float(rec[k])) for k in COUNTEREXAMPLE_FIELDS)


def boundary_min_grad(f: SplitFunctional, nbhd: SaddleNeighborhood, stride: int = 1) -> float:
    """min |grad phi| over the sampled boundary of B (both faces)."""
    fr = tuple(np.linspace(0.0, 1.0, 5))
    pts = fiber_grid(nbhd, (1.0,), fr, stride) + fiber_grid(nbhd, fr, (1.0,), stride)
    return float(min(np.linalg.norm(f.grad(p[0])) for p in pts))


def verified_neighborhood(s: Scenario, stride: int = 1, **kwargs):
    """Bundle, neighborhood and saddle report for the unperturbed functional of a scenario."""
    bundle = fiber_splitting(s.functional, s.manifold)
    nbhd = build_neighborhood(bundle, s.r_minus, s.r_plus)
    report = verify_saddle_conditions(nbhd, stride=stride, **kwargs)
    return nbhd.with_levels(report["c0"], report["sigma"]), report


def robustness_check(s: Scenario, nbhd: SaddleNeighborhood, base: dict, specs: Sequence[PerturbationSpec],
                     stride: int = 1) -> list:
    """Rerun the saddle verification with the unperturbed c0 and sigma for each perturbation in budget."""
    probes = probe_points(s)
    out = []
    for spec in specs:
        f, dev = perturb_with_report(s, spec, probes)
        row = {"kind": spec.kind, "amplitude": spec.amplitude, "deviation": dev,
               "in_budget": dev <= base["robust_budget"]}
        rep = verify_saddle_conditions(nbhd, f, c0=base["c0"], sigma=base["sigma"], stride=stride,
                                       raise_on_fail=False)
        row.update(passed=rep["passed"], c0=rep["c0"], violations=rep["violations"])
        out.append(row)
    return out


REPORT_COLUMNS = ("scenario", "kind", "eps", "trial", "n_found", "bound", "verdict", "max_dist_to_M", "min_grad")


def _trial(s, nbhd, kind, ki, eps, ei, trial, seed, probes, newton_tol, margin, stride, dedup_radius):
    rng = np.random.default_rng([seed, ki, ei, trial])
    spec = random_spec(kind, eps, rng, s.ambient_dim)
    f, dev = perturb_with_report(s, spec, probes)
    rep = find_critical_points(f, nbhd, s.seed_spec, newton_tol, dedup_radius, diameter=s.diameter)
    return {"scenario": s.name, "kind": kind, "eps": float(eps), "trial": int(trial), "n_found": rep.count_distinct,
            "bound": rep.bound_required, "verdict": rep.verdict, "max_dist_to_M": rep.max_distance_to_M,
            "min_grad": boundary_min_grad(f, nbhd, stride), "deviation": dev, "continuum": rep.continuum,
            "margin_exceeded": bool(margin is not None and eps > margin), "report": rep}


def persistence_sweep(s: Scenario, kinds: Sequence[str] = ("linear_tilt",), eps_grid: Sequence[float] = (0.1, 0.05, 0.01),
                      trials: int = 10, seed: int = 0, nbhd: Optional[SaddleNeighborhood] = None,
                      margin: Optional[float] = None, newton_tol: float = 1e-10, threads: int = 1,
                      stride: int = 1, dedup_radius: Optional[float] = None) -> dict:
    """Critical point counts under random perturbations over an amplitude grid."""
    if nbhd is None:
        nbhd, base = verified_neighborhood(s, stride=stride)
        margin = base["robust_budget"] if margin is None else margin
    probes = probe_points(s)
    jobs = []
    for ki, kind in enumerate(kinds):
        for ei, eps in enumerate(eps_grid):
            for t in range(trials if eps > 0 else 1):
                jobs.append((kind, ki, eps, ei, t))

    def run(job):
        kind, ki, eps, ei, t = job
        return _trial(s, nbhd, kind, ki, eps, ei, t, seed, probes, newton_tol, margin, stride, dedup_radius)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(run, jobs))
    else:
        rows = [run(j) for j in jobs]
    summary = {}
    for kind in kinds:
        per = {}
        for eps in eps_grid:
            sel = [r for r in rows if r["kind"] == kind and r["eps"] == float(eps)]
            per[float(eps)] = {"pass_rate": float(np.mean([r["verdict"] == "pass" for r in sel])),
                               "max_dist_to_M": float(max(r["max_dist_to_M"] for r in sel)),
                               "margin_exceeded": any(r["margin_exceeded"] for r in sel)}
        eps_sorted = sorted(per)
        trend = None
        if len(eps_sorted) >= 3:
            rho = spearmanr(eps_sorted, [per[e]["max_dist_to_M"] for e in eps_sorted]).statistic
            trend = float(rho)
        passing = [e for e in eps_sorted if per[e]["pass_rate"] == 1.0]
        summary[kind] = {"per_eps": per, "spearman": trend, "trend_ok": trend is None or trend >= 0.8,
                         "empirical_margin": max(passing) if passing else None}
    return {"scenario": s.name, "rows": rows, "summary": summary, "margin": margin}


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_report_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in REPORT_COLUMNS])

"""Command-line front end. Exit codes: 0 pass, 2 verdict failure, 1 error."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import grassmann, manifold_bundle as mb, persistence_lab as pl, saddle_flow as sf
from .config import RunConfig, help_epilog
from .errors import ConfigError, CritPersistError
from .matrix_io import read_operator
from .spectral_core import (ContourPath, default_contour, eigen_projector, riesz_projector, sign_masks,
                            spectral_split, verify_splitting)

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
RIESZ_TOL = 1e-10
SELFTEST_SLACK = -1e-10


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def _dump(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _write(outdir: Path, name: str, text: str) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / name
    path.write_text(text)
    return path


def _scenario(cfg: RunConfig):
    try:
        return pl.build_scenario(cfg.get("scenario.name"), cfg.get("scenario.params"))
    except TypeError as exc:
        raise ConfigError(f"scenario.params not accepted by {cfg.get('scenario.name')}: {exc}") from None


def _neighborhood(cfg: RunConfig, s):
    tol = cfg["tolerances"]
    bundle = mb.fiber_splitting(s.functional, s.manifold, tol["zero_tol"], tol["nd_tol"], tol["crit_tol"])
    rm = cfg.get("neighborhood.r_minus") or s.r_minus
    rp = cfg.get("neighborhood.r_plus") or s.r_plus
    nbhd = sf.build_neighborhood(bundle, rm, rp, tol["fiber_tol"])
    rep = sf.verify_saddle_conditions(nbhd, grad_floor=tol["grad_floor"], eps_factor=tol["eps_factor"],
                                      refine=cfg.get("neighborhood.refine"), stride=cfg.get("neighborhood.stride"))
    return bundle, nbhd.with_levels(rep["c0"], rep["sigma"]), rep


def cmd_split(args) -> int:
    op = read_operator(args.matrix)
    s = spectral_split(op, args.zero_tol)
    lam = op.eigenvalues
    checks = verify_splitting(op, s)
    residual = 0.0
    for mask, sub in zip(sign_masks(lam, args.zero_tol), (s.x_minus, s.x_zero, s.x_plus)):
        if sub.dim == 0:
            continue
        lo, hi = float(lam[mask].min()), float(lam[mask].max())
        contour = default_contour(lam, lo, hi, args.nodes)
        P = riesz_projector(op, contour)
        residual = max(residual, float(np.linalg.norm(P - sub.basis @ sub.basis.T, 2)),
                       float(np.linalg.norm(P - eigen_projector(op, contour), 2)))
    report = {"dims": list(s.dims), "gap": s.gap, "eigenvalues": lam, "riesz_residual": residual,
              "checks": checks, "passed": bool(checks["passed"] and residual <= RIESZ_TOL)}
    sys.stdout.write(_dump(report))
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def cmd_grassmann(args) -> int:
    if not args.selftest:
        sys.stderr.write("grassmann: nothing to do (use --selftest)\n")
        return EXIT_ERROR
    worst = grassmann.selftest(args.instances, args.seed)
    passed = all(v >= SELFTEST_SLACK for v in worst.values())
    sys.stdout.write(_dump({"instances": args.instances, "seed": args.seed, "worst_slack": worst, "passed": passed}))
    return EXIT_PASS if passed else EXIT_FAIL


def _default_levels(d: int, n: int) -> list:
    levels = sorted(set(list(range(max(d, 2), n + 1, 2)) + [n]))
    return [k for k in levels if k >= d]


def cmd_bundle(args) -> int:
    cfg = RunConfig.load(args.config)
    s = _scenario(cfg)
    tol = cfg["tolerances"]
    bundle = mb.fiber_splitting(s.functional, s.manifold, tol["zero_tol"], tol["nd_tol"], tol["crit_tol"])
    K = mb.operator_field(s.functional, s.manifold)
    outdir = Path(cfg["output_dir"])
    summary = {"scenario": s.name, "nd_residual_max": float(bundle.nd_residuals.max()),
               "continuity": bundle.continuity, "min_gap": float(bundle.gaps.min())}
    if s.manifold.d > 0:
        spacing = 2 * np.pi / s.manifold.grid_shape[0]
        bw = cfg.get("bundle.bandwidth") or 2 * spacing
        lam0 = K.total(0).eigenvalues
        half = 0.5 * float(np.abs(lam0[np.abs(lam0) > tol["zero_tol"] * np.abs(lam0).max()]).min())
        moll = mb.mollify_field(K, bw, ContourPath(0.0, half, cfg.get("bundle.contour_nodes")))
        summary["mollify"] = {"bandwidth": bw, "max_change": moll.max_distance(K),
                              "kernel_dims_ok": moll.in_class(tol["zero_tol"])}
    levels = cfg.get("bundle.levels") or _default_levels(s.manifold.d, s.ambient_dim)
    s_grid = cfg.get("bundle.s_grid")
    sweep = mb.galerkin_sweep(s.functional, K, bundle, levels, tol["zero_tol"], s_grid)
    reds = sweep["reductions"]
    mb.write_diagnostics_csv(_write(outdir, "bundle_diagnostics.csv", ""), reds)
    limits = mb.check_reduction_limits(reds, s_grid, rng=np.random.default_rng(cfg["rng_seed"])) if reds else {}
    keys = ("delta_zero", "op_gap", "fiber_gap", "flow_drift")
    mono = all(all(b.diagnostics[k] <= a.diagnostics[k] + 1e-10 for k in keys) for a, b in zip(reds, reds[1:]))
    full = [r for r in reds if r.n == s.ambient_dim]
    full_ok = all(max(r.diagnostics.values()) <= 1e-8 for r in full)
    n0 = sweep["n0"]
    kernel_ok = all(r.kernel_identity_holds for r in reds if n0 is not None and r.n >= n0)
    summary.update(levels=levels, failures=sweep["failures"], n0=n0, limits=limits, monotone=mono,
                   full_level_ok=full_ok, kernel_identity=kernel_ok)
    summary["passed"] = bool(mono and full_ok and kernel_ok and not sweep["failures"])
    _write(outdir, "bundle_summary.json", _dump(summary))
    sys.stdout.write(_dump({k: summary[k] for k in ("scenario", "levels", "n0", "monotone", "passed")}))
    return EXIT_PASS if summary["passed"] else EXIT_FAIL


def _flow_starts(nbhd, count: int) -> list:
    M = nbhd.manifold
    idx = np.linspace(0, M.count, count, endpoint=False).astype(int)
    starts = []
    for i in idx:
        sp = nbhd.bundle.splittings[i]
        v = sp.x_minus.basis[:, 0] if sp.x_minus.dim else np.zeros(M.ambient_dim)
        starts.append(M.samples[i].point + 0.5 * nbhd.r_minus * v)
    return starts


def cmd_flow(args) -> int:
    cfg = RunConfig.load(args.config)
    s = _scenario(cfg)
    outdir = Path(cfg["output_dir"])
    _, nbhd, rep = _neighborhood(cfg, s)
    f = s.functional
    Z = sf.pseudogradient(f, cfg.get("flow.pseudogradient"), cfg.get("flow.rank"), nbhd)
    step = cfg.get("flow.step_h")
    rows = []
    for k, x0 in enumerate(_flow_starts(nbhd, cfg.get("flow.starts"))):
        traj = sf.integrate_flow(x0, f, Z, nbhd, step)
        rec = sf.decompose_deformation(traj, Z, f.L)
        sf.write_trajectory_csv(_write(outdir, f"trajectory_{k}.csv", ""), traj)
        sf.write_deformation_csv(_write(outdir, f"deformation_{k}.csv", ""), rec)
        rows.append({"start": k, "tau": traj.tau, "exit_kind": traj.exit_kind,
                     "reconstruction_error": rec.reconstruction_error, "theta_bound": rec.theta_bound,
                     "descent": bool(np.all(np.diff(traj.phi) <= sf.DESCENT_SLACK * max(1.0, abs(traj.phi[0] - traj.c0))))})
    clauses = sf.deformation_clauses(nbhd, f, Z, cfg.get("flow.delta"), cfg.get("flow.critical_level"),
                                     cfg.get("flow.u_radius"), stride=cfg.get("flow.clause_stride"), step_h=step)
    ok = (rep["passed"] and all(r["reconstruction_error"] <= sf.RECON_TOL and r["descent"] for r in rows)
          and clauses["holds"])
    summary = {"scenario": s.name, "saddle": rep, "pseudogradient_bound": Z.bound, "trajectories": rows,
               "clauses": clauses, "passed": bool(ok)}
    _write(outdir, "flow_summary.json", _dump(summary))
    sys.stdout.write(_dump({"scenario": s.name, "c0": rep["c0"], "sigma": rep["sigma"], "passed": bool(ok)}))
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_persist(args) -> int:
    cfg = RunConfig.load(args.config)
    s = _scenario(cfg)
    outdir = Path(cfg["output_dir"])
    _, nbhd, rep = _neighborhood(cfg, s)
    threads = min(cfg["threads"], args.threads) if args.threads else cfg["threads"]
    sw = pl.persistence_sweep(s, cfg.get("sweep.kinds"), cfg.get("sweep.eps_grid"), cfg.get("sweep.trials"),
                              cfg["rng_seed"], nbhd, rep["robust_budget"], cfg.get("tolerances.newton_tol"),
                              threads, cfg.get("neighborhood.stride"), cfg.get("tolerances.dedup_radius"))
    pl.write_report_csv(_write(outdir, "persist_report.csv", ""), sw["rows"])
    in_budget = [r for r in sw["rows"] if not r["margin_exceeded"]]
    ok = all(r["verdict"] == "pass" for r in in_budget) and all(v["trend_ok"] for v in sw["summary"].values())
    summary = {"scenario": s.name, "margin": sw["margin"], "summary": sw["summary"], "passed": bool(ok)}
    _write(outdir, "persist_summary.json", _dump(summary))
    sys.stdout.write(_dump(summary))
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_counterexample(args) -> int:
    rec = pl.counterexample(args.eps, args.grid)
    sys.stdout.write(pl.format_counterexample(rec) + "\n")
    ok = rec["grad_norm"] <= 1e-10 and rec["outside_unit_ball"] and rec["min_grad_unit_ball"] > 0
    return EXIT_PASS if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="critpersist", description=__doc__, epilog=help_epilog(),
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--threads", type=int, default=None, help="cap on parallel sweep workers [config threads]")
    sub = p.add_subparsers(dest="command", required=True)
    a = sub.add_parser("split", help="spectral splitting of a matrix file with a Riesz cross-check")
    a.add_argument("matrix")
    a.add_argument("--zero-tol", type=float, default=1e-8, help="[1e-8]")
    a.add_argument("--nodes", type=int, default=64, help="contour nodes [64]")
    a.set_defaults(func=cmd_split)
    a = sub.add_parser("grassmann", help="property suite over random subspaces")
    a.add_argument("--selftest", action="store_true")
    a.add_argument("--instances", type=int, default=500, help="[500]")
    a.add_argument("--seed", type=int, default=0, help="[0]")
    a.set_defaults(func=cmd_grassmann)
    for name, func, text in (("bundle", cmd_bundle, "fiber splitting, mollification and Galerkin diagnostics"),
                             ("flow", cmd_flow, "saddle verification, trajectories and deformation records"),
                             ("persist", cmd_persist, "perturbation sweep report")):
        a = sub.add_parser(name, help=text, epilog=help_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
        a.add_argument("config")
        a.set_defaults(func=func)
    a = sub.add_parser("counterexample", help="C0-small perturbation without critical points in the unit ball")
    a.add_argument("--eps", type=float, required=True)
    a.add_argument("--grid", type=int, default=401, help="unit-ball grid points per axis [401]")
    a.set_defaults(func=cmd_counterexample)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_ERROR
    if args.threads is not None and args.threads < 1:
        sys.stderr.write("--threads must be >= 1\n")
        return EXIT_ERROR
    try:
        return args.func(args)
    except CritPersistError as exc:
        sys.stderr.write(json.dumps(_plain(exc.as_record()), sort_keys=True) + "\n")
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "invariant": "input", "message": str(exc)}) + "\n")
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())

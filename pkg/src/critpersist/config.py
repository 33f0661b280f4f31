"""Run configuration: JSON files validated against the shipped schema, merged over defaults."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError

# knob path -> (default, module parameter it feeds)
KNOBS = {
    "scenario.name": ("circle3", "persistence_lab.build_scenario(name)"),
    "scenario.params": ({}, "persistence_lab.build_scenario(params)"),
    "tolerances.zero_tol": (1e-8, "spectral_core.spectral_split(zero_tol)"),
    "tolerances.nd_tol": (1e-6, "manifold_bundle.fiber_splitting(nd_tol)"),
    "tolerances.crit_tol": (1e-8, "manifold_bundle.fiber_splitting(crit_tol)"),
    "tolerances.fiber_tol": (1e-6, "saddle_flow.build_neighborhood(fiber_tol)"),
    "tolerances.newton_tol": (1e-10, "persistence_lab.find_critical_points(newton_tol)"),
    "tolerances.grad_floor": (1e-8, "saddle_flow.verify_saddle_conditions(grad_floor)"),
    "tolerances.eps_factor": (1e-4, "saddle_flow.verify_saddle_conditions(eps_factor)"),
    "tolerances.dedup_radius": (None, "persistence_lab.find_critical_points(dedup_radius); null = 1e-3 * diameter"),
    "neighborhood.r_minus": (None, "saddle_flow.build_neighborhood(r_minus); null = scenario default"),
    "neighborhood.r_plus": (None, "saddle_flow.build_neighborhood(r_plus); null = scenario default"),
    "neighborhood.refine": (1, "saddle_flow.verify_saddle_conditions(refine)"),
    "neighborhood.stride": (1, "saddle_flow.verify_saddle_conditions(stride)"),
    "bundle.levels": (None, "manifold_bundle.galerkin_sweep(levels); null = even levels up to full"),
    "bundle.bandwidth": (None, "manifold_bundle.mollify_field(bandwidth); null = 2 * grid spacing"),
    "bundle.contour_nodes": (64, "spectral_core.ContourPath(nodes)"),
    "bundle.s_grid": ([-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0], "manifold_bundle.check_reduction_limits(s_grid)"),
    "flow.starts": (4, "number of start points m_i + r_minus/2 * v- passed to saddle_flow.integrate_flow"),
    "flow.step_h": (None, "saddle_flow.integrate_flow(step_h); null = 1e-2 * r_minus"),
    "flow.pseudogradient": ("exact", "saddle_flow.pseudogradient(mode)"),
    "flow.rank": (None, "saddle_flow.pseudogradient(k)"),
    "flow.delta": (1e-3, "saddle_flow.deformation_clauses(delta)"),
    "flow.critical_level": (0.0, "saddle_flow.deformation_clauses(c)"),
    "flow.u_radius": (None, "saddle_flow.deformation_clauses(u_radius); null = r_plus / 2"),
    "flow.clause_stride": (16, "saddle_flow.deformation_clauses(stride)"),
    "sweep.kinds": (["linear_tilt"], "persistence_lab.persistence_sweep(kinds)"),
    "sweep.eps_grid": ([0.1, 0.05, 0.01], "persistence_lab.persistence_sweep(eps_grid)"),
    "sweep.trials": (10, "persistence_lab.persistence_sweep(trials)"),
    "rng_seed": (0, "persistence_lab.persistence_sweep(seed)"),
    "threads": (1, "persistence_lab.persistence_sweep(threads)"),
    "output_dir": ("out", "directory for CSV and JSON outputs"),
}


def schema() -> dict:
    text = resources.files("critpersist").joinpath("data/config.schema.json").read_text()
    return json.loads(text)


def defaults() -> dict:
    out: dict = {}
    for path, (value, _) in KNOBS.items():
        node = out
        *head, last = path.split(".")
        for key in head:
            node = node.setdefault(key, {})
        node[last] = copy.deepcopy(value)
    return out


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "params":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class RunConfig:
    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        try:
            jsonschema.validate(raw, schema())
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid config at {where}: {exc.message}", path=where) from None
        return cls(_merge(defaults(), raw))

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.parse(text)

    def emit(self) -> str:
        # float repr is the shortest decimal that parses back to the same double
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def __getitem__(self, key):
        return self.data[key]

    def get(self, path: str):
        node = self.data
        for key in path.split("."):
            node = node[key]
        return node


def help_epilog() -> str:
    lines = ["config knobs (JSON, defaults in brackets):"]
    for path, (value, target) in KNOBS.items():
        lines.append(f"  {path} [{json.dumps(value)}] -> {target}")
    return "\n".join(lines)

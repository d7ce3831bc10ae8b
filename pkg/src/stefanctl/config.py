"""Run configuration: JSON loading, defaults, and validation that reports every problem at once."""
from __future__ import annotations

import copy
import json
import os

import numpy as np

from .control import PiecewiseConstantField, discretize_Q
from .errors import ConfigError, GraphError, GridError
from .expr import ExpressionError, compile_field
from .graph import Branch, MonotoneGraph, identity_graph, two_phase_graph
from .grid import Discretization, Domain, ProblemData
from .optimize import OptimizerConfig
from .solver import SolverConfig

MODES = ("solve", "optimize", "verify", "converge")
CHECKS = ("max_principle", "energy", "contraction", "random_max_principle", "newton_oracle")
STUDIES = ("manufactured", "stefan", "functional")

DEFAULTS = {
    "seed": 0,
    "coefficients": {"a": 1.0, "b": 0.0, "c": 0.0, "r": 0.0, "a0": None},
    "data": {"phi": 0.0, "f": 0.0, "gamma": 0.0},
    "solver": {"tol_fp": 1e-10, "tol_sc": 1e-12, "max_iter": 200000, "n": None, "bisect_width": 1e-2},
    "control": {"R": 1.0, "f": None, "file": None},
    "optimizer": {"eps": 1e-12, "max_iter": 200, "fd_step": None, "initial_step": 0.5, "backtrack": 0.5,
                  "min_step": 1e-14, "armijo": 1e-4, "step_tol": 1e-12, "target": None,
                  "pattern_search": True, "require": None},
    "target": {"manufacture": None},
    "verify": {"checks": ["max_principle"], "instances": 50, "newton_instances": 20,
               "energy_chain": None, "energy_slack": 0.1},
    "converge": {"study": "manufactured", "d": 1, "chain": None, "depth": 3, "stefan": {},
                 "functional": {"fine_h": None, "fine_n_t": None, "f": None}},
}
TOP_KEYS = set(DEFAULTS) | {"domain", "grid", "graph"}


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("stefan",):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _problem(code, message, **extra):
    return {"code": code, "message": message, **extra}


class RunConfig:
    """Resolved configuration for one CLI run.

    ``resolved`` is the JSON-able dict with defaults filled in; it is what
    artifacts embed.  Built objects (domain, discretization, graph, problem
    data) are created lazily from it.
    """

    def __init__(self, resolved, base_dir="."):
        self.resolved = resolved
        self.base_dir = base_dir

    @property
    def seed(self):
        return int(self.resolved["seed"])

    @property
    def d(self):
        return len(self.resolved["domain"]["box"])

    def domain(self):
        dom = self.resolved["domain"]
        return Domain(tuple(tuple(ax) for ax in dom["box"]), dom["T"])

    def discretization(self):
        g = self.resolved["grid"]
        return Discretization(self.domain(), g["h"], g["n_t"])

    def graph(self):
        return build_graph(self.resolved["graph"])

    def solver_config(self, workers=1):
        s = self.resolved["solver"]
        return SolverConfig(tol_fp=s["tol_fp"], tol_sc=s["tol_sc"], max_iter=s["max_iter"], n=s["n"],
                            workers=workers, bisect_width=s["bisect_width"])

    def optimizer_config(self, workers=1):
        o = {k: v for k, v in self.resolved["optimizer"].items() if k != "require"}
        return OptimizerConfig(R=float(self.resolved["control"]["R"]), seed=self.seed, workers=workers, **o)

    def problem_data(self, disc=None):
        d = self.d
        disc = self.discretization() if disc is None else disc
        co, da = self.resolved["coefficients"], self.resolved["data"]

        def per_axis(spec):
            items = spec if isinstance(spec, list) else [spec] * d
            if len(items) == 1:
                items = items * d
            return tuple(field_from_spec(s, d, disc) for s in items)

        return ProblemData(
            self.domain(), a=per_axis(co["a"]), b=per_axis(co["b"]), c=per_axis(co["c"]),
            r=field_from_spec(co["r"], d, disc), f=field_from_spec(da["f"], d, disc),
            phi=field_from_spec(da["phi"], d, disc, spatial=True),
            gamma=field_from_spec(da["gamma"], d, disc, spatial=True), a0=co["a0"],
        )


def build_graph(spec):
    kind = spec.get("kind", "general")
    if kind == "identity":
        return identity_graph(float(spec.get("slope", 1.0)))
    if kind == "two_phase":
        return two_phase_graph(float(spec.get("transition", 0.0)), float(spec.get("latent", 1.0)),
                               float(spec.get("c_solid", 1.0)), float(spec.get("c_liquid", 1.0)))
    if kind == "general":
        branches = tuple(Branch(b["knots"], b["values"]) for b in spec["branches"])
        return MonotoneGraph(tuple(spec.get("breakpoints", ())), tuple(spec.get("jumps", ())),
                             branches, float(spec["slope_floor"]))
    raise GraphError(f"unknown graph kind {kind!r} (expected identity, two_phase or general)")


class _SpatialCells:
    """Prism-wise constant spatial field from a flat table (C order over prisms)."""

    def __init__(self, disc, values):
        self.inner = PiecewiseConstantField(
            disc, np.repeat(np.asarray(values, dtype=float).reshape(disc.cell_shape)[..., None], disc.n_t, axis=-1))

    def __call__(self, x):
        return self.inner(x, 0.5 * self.inner.disc.tau)


def field_from_spec(spec, d, disc=None, spatial=False):
    """Number, expression string, or ``{"cells": [...]}`` table to a field."""
    if isinstance(spec, dict):
        if set(spec) != {"cells"}:
            raise ExpressionError("a tabulated field must be given as {\"cells\": [...]}")
        if disc is None:
            raise ExpressionError("tabulated fields need a grid")
        vals = np.asarray(spec["cells"], dtype=float)
        shape = disc.cell_shape if spatial else disc.control_shape
        if vals.size != int(np.prod(shape)):
            raise ExpressionError(f"tabulated field has {vals.size} entries, grid needs {int(np.prod(shape))}")
        if spatial:
            return _SpatialCells(disc, vals)
        return PiecewiseConstantField(disc, vals.reshape(shape))
    if isinstance(spec, bool):
        raise ExpressionError("booleans are not fields")
    if isinstance(spec, (int, float)):
        return float(spec)
    return compile_field(spec, d, spatial=spatial)


def _sampled_sup(fn, disc, points=5):
    if not callable(fn):
        return abs(float(fn))
    axes = [np.linspace(lo, hi, disc.cell_shape[i] * (points - 1) + 1) for i, (lo, hi) in enumerate(disc.domain.box)]
    X = np.meshgrid(*axes, indexing="ij")
    ts = np.linspace(0.0, disc.domain.T, disc.n_t * (points - 1) + 1)
    return max(float(np.max(np.abs(fn(X, t)))) for t in ts)


def _validate(cfg, mode):
    r = cfg.resolved
    problems = []
    unknown = sorted(set(r) - TOP_KEYS)
    if unknown:
        problems.append(_problem("unknown_key", f"unknown top-level keys: {', '.join(unknown)}"))
    if not isinstance(r.get("seed"), int) or isinstance(r.get("seed"), bool):
        problems.append(_problem("seed", "seed must be an integer"))

    needs_problem = mode in ("solve", "optimize") or (
        mode == "verify" and any(c in ("max_principle", "energy", "contraction") for c in r["verify"]["checks"])
    ) or (mode == "converge" and r["converge"]["study"] == "functional") or (
        mode == "verify" and "functional" in r["verify"]["checks"])
    disc = graph = None
    if needs_problem:
        for key in ("domain", "grid", "graph"):
            if key not in r:
                problems.append(_problem("missing", f"missing required block {key!r}"))
        if "domain" in r:
            try:
                cfg.domain()
            except (GridError, KeyError, TypeError, ValueError) as exc:
                problems.append(_problem("domain", f"domain: {exc}"))
        if "domain" in r and "grid" in r and not any(p["code"] == "domain" for p in problems):
            try:
                disc = cfg.discretization()
            except (GridError, KeyError, TypeError, ValueError) as exc:
                problems.append(_problem("grid", f"grid: {exc}"))
        if "graph" in r:
            try:
                graph = cfg.graph()
            except (GraphError, KeyError, TypeError, ValueError) as exc:
                problems.append(_problem("graph", f"graph: {exc}"))

    data = None
    if disc is not None:
        try:
            data = cfg.problem_data(disc)
        except (ExpressionError, GridError, TypeError, ValueError) as exc:
            problems.append(_problem("expression", str(exc)))
        a0 = r["coefficients"]["a0"]
        if a0 is not None and not (isinstance(a0, (int, float)) and a0 > 0):
            problems.append(_problem("a0", "coefficients.a0 must be a positive number or null"))
    if data is not None and graph is not None:
        b_sum = sum(_sampled_sup(bi, disc) for bi in data.b)
        need = (1.0 + 2.0 * b_sum) / graph.slope_floor
        ratio = disc.h / disc.tau
        if ratio < need * (1 - 1e-12):
            problems.append(_problem(
                "htau", f"htau: h/tau = {ratio:.6g} is below the minimal admissible ratio {need:.6g}",
                min_ratio=need, ratio=ratio))

    s = r["solver"]
    for key in ("tol_fp", "tol_sc", "bisect_width"):
        if not (isinstance(s[key], (int, float)) and s[key] > 0):
            problems.append(_problem("solver", f"solver.{key} must be positive"))
    if not (isinstance(s["max_iter"], int) and s["max_iter"] >= 1):
        problems.append(_problem("solver", "solver.max_iter must be a positive integer"))
    if s["n"] is not None and not (isinstance(s["n"], int) and s["n"] >= 1):
        problems.append(_problem("solver", "solver.n must be a positive integer or null"))

    if mode == "optimize":
        R = r["control"]["R"]
        if not (isinstance(R, (int, float)) and R >= 0):
            problems.append(_problem("R", "control.R must be a non-negative number"))
        else:
            try:
                cfg.optimizer_config()
            except (TypeError, ValueError) as exc:
                problems.append(_problem("optimizer", f"optimizer: {exc}"))
        man = r["target"]["manufacture"]
        if man is not None and disc is not None:
            try:
                fstar = field_from_spec(man, cfg.d, disc)
                sup = float(np.max(np.abs(discretize_Q(fstar, disc).values)))
                if isinstance(R, (int, float)) and sup > R * (1 + 1e-12):
                    problems.append(_problem("R", f"manufactured control has sup {sup:.6g} > R = {R:.6g}"))
            except ExpressionError as exc:
                problems.append(_problem("expression", f"target.manufacture: {exc}"))

    if mode == "verify":
        v = r["verify"]
        bad = [c for c in v["checks"] if c not in CHECKS + STUDIES]
        if bad or not v["checks"]:
            problems.append(_problem("verify", f"verify.checks must be a non-empty subset of "
                                               f"{list(CHECKS + STUDIES)}; unknown: {bad}"))
        for key in ("instances", "newton_instances"):
            if not (isinstance(v[key], int) and v[key] >= 1):
                problems.append(_problem("verify", f"verify.{key} must be a positive integer"))

    if mode == "converge" or (mode == "verify" and any(c in STUDIES for c in r["verify"]["checks"])):
        c = r["converge"]
        if c["study"] not in STUDIES:
            problems.append(_problem("converge", f"converge.study must be one of {list(STUDIES)}"))
        if c["chain"] is None and not (isinstance(c["depth"], int) and c["depth"] >= 1):
            problems.append(_problem("converge", "converge.depth must be a positive integer"))
        if c["chain"] is not None:
            ok = isinstance(c["chain"], list) and c["chain"] and all(
                isinstance(e, list) and len(e) == 2 and e[0] > 0 and isinstance(e[1], int) and e[1] >= 1
                for e in c["chain"])
            if not ok:
                problems.append(_problem("converge", "converge.chain must be a list of [h, n_t] pairs"))
        if c["study"] == "manufactured" and c["d"] not in (1, 2):
            problems.append(_problem("converge", "converge.d must be 1 or 2"))
        wants_functional = c["study"] == "functional" if mode == "converge" else "functional" in r["verify"]["checks"]
        if wants_functional and c["functional"]["f"] is None:
            problems.append(_problem("converge", "converge.functional.f is required"))
    return problems


def load_config(source, mode, seed=None):
    """Load, default-fill and validate a configuration (path or dict).

    Raises :class:`ConfigError` listing every problem found.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    base_dir = "."
    if isinstance(source, dict):
        raw = source
    else:
        base_dir = os.path.dirname(os.path.abspath(source))
        try:
            with open(source) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError([_problem("io", f"cannot read config: {exc}")]) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError([_problem("json", f"invalid JSON: {exc}")]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([_problem("json", "configuration must be a JSON object")])
    resolved = _merge(DEFAULTS, raw)
    if seed is not None:
        resolved["seed"] = int(seed)
    cfg = RunConfig(resolved, base_dir)
    problems = _validate(cfg, mode)
    if problems:
        raise ConfigError(problems)
    return cfg


def default_chain(study, depth, d=1):
    """Dyadic chains used when ``converge.chain`` is not given (tau ~ h^2)."""
    if study == "stefan":
        start = 1 / 8
    elif study == "manufactured":
        start = 1 / 8 if d == 1 else 1 / 4
    else:
        start = 1 / 4
    out = []
    for j in range(depth):
        h = start / 2**j
        out.append([h, None])
    return out

"""Command-line entry point: ``stefanctl {solve,optimize,verify,converge}``.

Each run reads one JSON configuration, writes self-describing artifacts into
``--out`` and prints a short summary.  The exit status is 0 iff every
requested check passed; errors are reported as one JSON object on stderr.
The worker count only caps parallelism and is not part of any artifact.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import io
from .config import STUDIES, default_chain, field_from_spec, load_config
from .control import ControlProblem, discretize_Q, read_control_csv, write_control_csv
from .errors import ConfigError, StefanError, StepSizeError
from .grid import Discretization, build_coefficient_grid, check_htau
from .interpolants import discrete_norms
from .optimize import projected_descent
from .solver import contraction_factor, mollified_for, solve_state
from .verify import (
    NeumannParams, StefanStudySetup, check_energy, check_max_principle, energy_chain,
    functional_trend_study, manufactured_solution_study, newton_oracle_sweep,
    random_max_principle_sweep, sine_product_case, stefan_convergence_study, write_table_csv,
)

# manufactured study thresholds per dimension: minimal per-halving ratio and order window
MANUFACTURED_RATIO = {1: 1.8, 2: 1.5}
ORDER_WINDOW = (0.9, 2.2)
STEFAN_RELATIVE_L2 = 0.05
NEWTON_TOL = 1e-8


class _Run:
    def __init__(self, cfg, out, workers):
        self.cfg = cfg
        self.out = io.ensure_dir(out)
        self.workers = workers
        self.config = cfg.resolved
        self.seed = cfg.seed

    def path(self, name):
        return os.path.join(self.out, name)

    def json(self, name, payload):
        io.write_json(self.path(name), payload, self.config, self.seed)

    def header(self):
        return io.header_line(self.config, self.seed)

    def problem(self):
        disc = self.cfg.discretization()
        data = self.cfg.problem_data(disc)
        graph = self.cfg.graph()
        coeffs = build_coefficient_grid(disc, data)
        check_htau(disc, coeffs.b_sup_sum, graph.slope_floor)
        scfg = self.cfg.solver_config(self.workers)
        return disc, data, graph, coeffs, mollified_for(disc, graph, scfg), scfg

    def control_values(self, disc, data):
        ctl = self.config["control"]
        R = ctl["R"] if ctl["R"] is not None else np.inf
        if ctl["file"]:
            path = ctl["file"] if os.path.isabs(ctl["file"]) else os.path.join(self.cfg.base_dir, ctl["file"])
            try:
                return read_control_csv(path, disc, R).values
            except (OSError, ValueError, IndexError, StopIteration) as exc:
                raise ConfigError([{"code": "control_file", "message": f"control.file: {exc}"}]) from exc
        if ctl["f"] is not None:
            return discretize_Q(field_from_spec(ctl["f"], disc.d, disc), disc).values
        return None


def cmd_solve(run):
    disc, data, graph, coeffs, mg, scfg = run.problem()
    f = run.control_values(disc, data)
    state = solve_state(coeffs, mg, scfg, f=f)
    io.write_trajectory_csv(run.path("trajectory.csv"), state, run.config, run.seed)
    run.json("diagnostics.json", state.diagnostics_dict())
    norms = discrete_norms(state)
    run.json("norms.json", {"norms": norms, "h": disc.h, "tau": disc.tau, "n_t": disc.n_t})
    sweeps = sum(dg.iterations for dg in state.diagnostics)
    print(f"solve: {disc.n_t} steps, {sweeps} sweeps, max|v| = {norms['linf']:.6g}")
    return True


def cmd_optimize(run):
    disc, data, graph, coeffs, mg, scfg = run.problem()
    ocfg = run.cfg.optimizer_config(run.workers)
    man = run.config["target"]["manufacture"]
    if man is not None:
        fstar = discretize_Q(field_from_spec(man, disc.d, disc), disc).values
        gamma = solve_state(coeffs, mg, scfg, f=fstar).final
    else:
        gamma = coeffs.gamma
    problem = ControlProblem(coeffs, graph, scfg, gamma=gamma, R=ocfg.R, mollified=mg)
    f0 = run.control_values(disc, data)
    cv, trace = projected_descent(problem, ocfg, f0)
    write_control_csv(run.path("control.csv"), cv, run.header())
    run.json("trace.json", trace.as_dict())
    final = trace.history[-1]
    require = run.config["optimizer"]["require"]
    ok = require is None or final <= require
    run.json("summary.json", {"final_I": final, "require": require, "passed": ok,
                              "certified": trace.certified, "reason": trace.reason})
    print(f"optimize: final I = {final:.6e} after {trace.gradient_evaluations} gradients "
          f"({trace.reason}){'' if require is None else ' ' + ('PASS' if ok else 'FAIL') + f' (<= {require:g})'}")
    return ok


def cmd_verify(run):
    v = run.config["verify"]
    checks = v["checks"]
    reports, summary = {}, {}
    scfg_base = run.cfg.solver_config(1)
    if any(c in checks for c in ("max_principle", "energy", "contraction")):
        disc, data, graph, coeffs, mg, scfg = run.problem()
        state = solve_state(coeffs, mg, scfg)
        if "max_principle" in checks:
            rep = check_max_principle(state, coeffs, graph.slope_floor)
            reports["max_principle"] = [rep.as_dict()]
            summary["max_principle"] = rep.passed
        if "contraction" in checks:
            delta = contraction_factor(coeffs, mg)
            worst = max((max(dg.ratios) for dg in state.diagnostics if dg.ratios), default=0.0)
            passed = 0.0 < delta < 1.0 and worst <= delta
            reports["contraction"] = [{"delta": delta, "max_ratio": worst, "passed": passed}]
            summary["contraction"] = passed
        if "energy" in checks:
            chain = v["energy_chain"] or [[disc.h, disc.n_t]]
            consts, rows = [], []
            for h, n_t in chain:
                d2 = Discretization(disc.domain, h, n_t)
                c2 = build_coefficient_grid(d2, data)
                check_htau(d2, c2.b_sup_sum, graph.slope_floor)
                st = solve_state(c2, mollified_for(d2, graph, scfg), scfg)
                rep = check_energy(st, c2, data.phi)
                consts.append(rep.left)
                rows.append(rep.descriptor)
            chain_reports = energy_chain(consts, v["energy_slack"])
            reports["energy"] = [dict(r.as_dict(), **{"level": row}) for r, row in zip(chain_reports, rows)]
            summary["energy"] = all(r.passed for r in chain_reports)
    if "random_max_principle" in checks:
        reps = random_max_principle_sweep(v["instances"], run.seed, run.workers, scfg_base)
        reports["random_max_principle"] = [r.as_dict() for r in reps]
        n_pass = sum(r.passed for r in reps)
        summary["random_max_principle"] = n_pass == len(reps)
        print(f"random_max_principle: {n_pass}/{len(reps)} pass")
    if "newton_oracle" in checks:
        rows = newton_oracle_sweep(v["newton_instances"], run.seed, run.workers, scfg_base)
        for r in rows:
            r["passed"] = r["max_error"] <= NEWTON_TOL and 0.0 < r["delta"] < 1.0 and r["max_ratio"] <= r["delta"]
        reports["newton_oracle"] = rows
        n_pass = sum(r["passed"] for r in rows)
        summary["newton_oracle"] = n_pass == len(rows)
        print(f"newton_oracle: {n_pass}/{len(rows)} pass "
              f"(max error {max(r['max_error'] for r in rows):.3e})")
    for study in (c for c in checks if c in STUDIES):
        rows, cols, study_checks = _study(run, study)
        write_table_csv(run.path(f"convergence_{study}.csv"), rows, cols, run.header())
        reports[study] = {"rows": [{k: r[k] for k in cols} for r in rows], "checks": study_checks}
        summary[study] = all(study_checks.values())
    for name in checks:
        if name not in ("random_max_principle", "newton_oracle"):
            print(f"{name}: {'PASS' if summary[name] else 'FAIL'}")
    ok = all(summary.values())
    run.json("bound_reports.json", {"reports": reports, "summary": summary, "passed": ok})
    return ok


def _chain(c, study, d, T):
    chain = c["chain"] or default_chain(study, c["depth"], d)
    out = []
    for h, n_t in chain:
        if n_t is None:
            n_t = max(1, int(round(T / (h * h))))
        out.append((float(h), int(n_t)))
    return out


def _study(run, study):
    """Run one refinement study; returns ``(rows, columns, checks)``.

    ``converge.chain`` applies only when ``converge.study`` names this study,
    otherwise the default dyadic chain of ``converge.depth`` levels is used.
    """
    c = dict(run.config["converge"])
    if c["study"] != study:
        c["chain"] = None
    scfg = run.cfg.solver_config(1)
    checks = {}
    if study == "manufactured":
        d = c["d"]
        exact, build = sine_product_case(d)
        rows = manufactured_solution_study(exact, build, _chain(c, study, d, 1.0), config=scfg,
                                           workers=run.workers)
        ratios = [r["error_ratio"] for r in rows[1:]]
        checks["ratio"] = all(q >= MANUFACTURED_RATIO[d] for q in ratios)
        if ratios:
            lo, hi = ORDER_WINDOW
            order = rows[-1]["error_order"]
            checks["order"] = order is not None and lo <= order <= hi
        cols = ["h", "tau", "n_t", "error", "error_ratio", "error_order"]
    elif study == "stefan":
        params = dict(c["stefan"])
        setup_kw = {k: params.pop(k) for k in ("inner", "outer", "t0", "T") if k in params}
        setup = StefanStudySetup(NeumannParams(**params) if params else StefanStudySetup().params, **setup_kw)
        rows = stefan_convergence_study(setup, _chain(c, study, 1, setup.T), scfg, run.workers)
        if len(rows) > 1:
            checks["error_decreasing"] = all(b["error"] < a["error"] for a, b in zip(rows, rows[1:]))
            checks["interface_decreasing"] = all(
                b["interface_error"] < a["interface_error"] for a, b in zip(rows, rows[1:]))
        checks["relative_l2"] = rows[-1]["relative"] <= STEFAN_RELATIVE_L2
        cols = ["h", "tau", "n_t", "n", "error", "relative", "error_ratio", "interface", "interface_error",
                "interface_error_ratio"]
    else:
        disc = run.cfg.discretization()
        data = run.cfg.problem_data(disc)
        graph = run.cfg.graph()
        fc = c["functional"]
        f = field_from_spec(fc["f"], disc.d)
        chain = _chain(c, study, disc.d, disc.domain.T)
        fine_h = fc["fine_h"] or chain[-1][0] / 4
        fine = (fine_h, fc["fine_n_t"] or max(1, int(round(disc.domain.T / fine_h**2))))
        rows = functional_trend_study(data, graph, f, chain, fine, scfg, run.workers)
        checks["gap_non_increasing"] = all(b["gap"] <= a["gap"] for a, b in zip(rows, rows[1:]))
        cols = ["h", "tau", "n_t", "I", "J", "gap", "gap_ratio"]
    for r in rows:
        print("  " + "  ".join(f"{k}={r[k]:.6g}" if isinstance(r[k], float) else f"{k}={r[k]}" for k in cols))
    return rows, cols, checks


def cmd_converge(run):
    study = run.config["converge"]["study"]
    rows, cols, checks = _study(run, study)
    write_table_csv(run.path("convergence.csv"), rows, cols, run.header())
    ok = all(checks.values())
    run.json("convergence.json", {"study": study, "rows": [{k: r[k] for k in cols} for r in rows],
                                  "checks": checks, "passed": ok})
    print(f"converge ({study}): {'PASS' if ok else 'FAIL'} {checks}")
    return ok


COMMANDS = {"solve": cmd_solve, "optimize": cmd_optimize, "verify": cmd_verify, "converge": cmd_converge}


def build_parser():
    p = argparse.ArgumentParser(prog="stefanctl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON run configuration")
        s.add_argument("--out", default="out", help="artifact directory (default: ./out)")
        s.add_argument("--workers", type=int, default=1, help="maximum parallel workers")
        s.add_argument("--seed", type=int, default=None, help="override the configured seed")
    return p


def _error(kind, message, **extra):
    print(json.dumps(io.jsonable({"error": kind, "message": message, **extra}), sort_keys=True), file=sys.stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        _error("usage", "--workers must be at least 1")
        return 2
    try:
        cfg = load_config(args.config, args.command, seed=args.seed)
    except ConfigError as exc:
        _error("config", str(exc), problems=exc.problems)
        return 2
    try:
        ok = COMMANDS[args.command](_Run(cfg, args.out, args.workers))
    except ConfigError as exc:
        _error("config", str(exc), problems=exc.problems)
        return 2
    except StepSizeError as exc:
        _error("step_size", str(exc), condition=exc.condition, min_ratio=exc.min_ratio)
        return 3
    except StefanError as exc:
        _error(type(exc).__name__, str(exc))
        return 3
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

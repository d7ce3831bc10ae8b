"""Projected descent over the discrete control set using finite-difference gradients."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .control import ControlVector, project
from .errors import StefanError


@dataclass(frozen=True)
class OptimizerConfig:
    R: float = 1.0
    eps: float = 1e-12
    max_iter: int = 200
    fd_step: float | None = None
    initial_step: float = 0.5
    backtrack: float = 0.5
    min_step: float = 1e-14
    armijo: float = 1e-4
    step_tol: float = 1e-12
    target: float | None = None
    pattern_search: bool = True
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        problems = []
        if self.R < 0:
            problems.append("R must be non-negative")
        if self.eps <= 0 or self.step_tol <= 0:
            problems.append("eps and step_tol must be positive")
        if not 0 < self.backtrack < 1:
            problems.append("backtrack factor must lie in (0, 1)")
        if self.initial_step <= 0 or self.min_step <= 0:
            problems.append("step sizes must be positive")
        if self.fd_step is not None and self.fd_step <= 0:
            problems.append("fd_step must be positive")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def probe(self):
        return self.fd_step if self.fd_step else 1e-4 * max(1.0, self.R)


@dataclass
class OptimizerTrace:
    history: list = field(default_factory=list)
    log: list = field(default_factory=list)
    final: np.ndarray | None = None
    certified: bool = False
    reason: str = ""
    lower_reference: float = 0.0
    gradient_evaluations: int = 0
    flagged_probes: list = field(default_factory=list)
    seed: int = 0

    @property
    def best(self):
        return min(self.history) if self.history else float("nan")

    def as_dict(self):
        return {
            "history": [float(x) for x in self.history],
            "log": self.log,
            "final_I": float(self.history[-1]) if self.history else None,
            "lower_reference": self.lower_reference,
            "certified": self.certified,
            "reason": self.reason,
            "gradient_evaluations": self.gradient_evaluations,
            "flagged_probes": self.flagged_probes,
            "seed": self.seed,
        }


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def fd_gradient(problem, f, step, workers=1, flagged=None):
    """Central-difference gradient of ``I`` with respect to every cell value.

    Probes are independent forward solves and run on ``workers`` threads; the
    result is assembled in index order.  A probe whose solve fails is retried
    once with half the step and recorded in ``flagged``.
    """
    f = np.asarray(f, dtype=float)
    flat = f.ravel()
    solver_cfg = replace(problem.config, workers=1)

    def probe(j):
        s = step
        for attempt in range(2):
            try:
                plus, minus = flat.copy(), flat.copy()
                plus[j] += s
                minus[j] -= s
                Ip = problem.cost(plus.reshape(f.shape), solver_cfg)
                Im = problem.cost(minus.reshape(f.shape), solver_cfg)
                return (Ip - Im) / (2 * s), attempt > 0
            except StefanError:
                if attempt:
                    raise
                s *= 0.5
        raise AssertionError("unreachable")

    results = _map(probe, range(flat.size), workers)
    if flagged is not None:
        flagged.extend(int(j) for j, (_, fl) in enumerate(results) if fl)
    return np.array([g for g, _ in results]).reshape(f.shape)


def _pattern_search(problem, f, I, mu, cfg, rng, trace, it):
    """Coordinate pattern search; returns improved ``(f, I, mu)`` or the input with shrunken ``mu``."""
    order = rng.permutation(f.size)
    while mu >= cfg.step_tol:
        for j in order:
            for sgn in (1.0, -1.0):
                trial = f.ravel().copy()
                trial[j] += sgn * mu
                trial = project(trial, cfg.R).reshape(f.shape)
                if np.array_equal(trial, f):
                    continue
                It = problem.cost(trial)
                if It < I:
                    trace.log.append({"iter": it, "kind": "pattern", "mu": mu, "I": It, "accepted": True})
                    return trial, It, mu
        mu *= 0.5
    trace.log.append({"iter": it, "kind": "pattern", "mu": mu, "I": I, "accepted": False})
    return f, I, mu


def projected_descent(problem, cfg, f0=None):
    """Minimize ``I`` over ``||f||_inf <= R`` from ``f0`` (default zero).

    Returns ``(ControlVector, OptimizerTrace)``.  Every iterate is clamped to
    the feasible box and accepted iterates never increase ``I``.
    """
    disc = problem.disc
    shape = disc.control_shape
    f = project(np.zeros(shape) if f0 is None else np.asarray(f0, dtype=float), cfg.R)
    trace = OptimizerTrace(seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    I = problem.cost(f)
    trace.history.append(I)
    if cfg.R == 0:
        trace.final, trace.certified, trace.reason = f, True, "feasible set is a single point"
        return ControlVector(disc, f, cfg.R), trace

    alpha = None
    prev_f = prev_g = None
    mu = 0.1 * max(cfg.R, 1.0) if np.isfinite(cfg.R) else 0.1
    for it in range(1, cfg.max_iter + 1):
        if cfg.target is not None and I <= cfg.target:
            trace.certified, trace.reason = True, "target reached"
            break
        g = fd_gradient(problem, f, cfg.probe, cfg.workers, trace.flagged_probes)
        trace.gradient_evaluations += 1
        gmax = float(np.max(np.abs(g)))
        if gmax == 0.0:
            trace.certified, trace.reason = True, "zero gradient"
            break
        if alpha is None:
            scale = cfg.R if np.isfinite(cfg.R) else 1.0
            alpha = cfg.initial_step * scale / gmax
        elif prev_g is not None:
            s, y = (f - prev_f).ravel(), (g - prev_g).ravel()
            sy = float(np.dot(s, y))
            if sy > 0:
                alpha = float(np.dot(s, s)) / sy
        accepted = False
        a = alpha
        while a >= cfg.min_step:
            trial = project(f - a * g, cfg.R)
            step = trial - f
            if not np.any(step):
                break
            It = problem.cost(trial)
            ok = It <= I - cfg.armijo / a * float(np.sum(step * step))
            trace.log.append({"iter": it, "kind": "gradient", "alpha": a, "I": It, "accepted": bool(ok)})
            if ok:
                accepted = True
                break
            a *= cfg.backtrack
        if accepted:
            decrease = I - It
            prev_f, prev_g = f, g
            f, I, alpha = trial, It, a
            trace.history.append(I)
            if float(np.max(np.abs(step))) < cfg.step_tol or decrease < cfg.eps:
                trace.certified, trace.reason = True, "stationary (small step or decrease)"
                break
            continue
        if not cfg.pattern_search:
            trace.certified, trace.reason = True, "line search stalled"
            break
        f_new, I_new, mu = _pattern_search(problem, f, I, mu, cfg, rng, trace, it)
        if I_new < I:
            prev_f = prev_g = None
            decrease = I - I_new
            f, I = f_new, I_new
            trace.history.append(I)
            if decrease < cfg.eps:
                trace.certified, trace.reason = True, "stationary (small decrease)"
                break
        else:
            trace.certified, trace.reason = True, "pattern search exhausted"
            break
    else:
        trace.reason = "iteration budget exhausted"
        trace.certified = cfg.target is not None and I <= cfg.target
    if cfg.target is not None and I <= cfg.target and not trace.certified:
        trace.certified, trace.reason = True, "target reached"
    trace.final = f
    return ControlVector(disc, f, cfg.R), trace


def epsilon_certificate(runs):
    """Successive-gap table for a refinement chain.

    ``runs`` is a list of dicts with keys ``h``, ``tau``, ``I`` (discrete
    optimum estimate) and ``J`` (surrogate value of the lifted iterate).
    """
    rows = []
    for r in runs:
        rows.append({"h": r["h"], "tau": r["tau"], "I": r["I"], "J": r["J"], "gap": abs(r["I"] - r["J"])})
    gaps = [row["gap"] for row in rows]
    succ = [abs(rows[j + 1]["I"] - rows[j]["I"]) for j in range(len(rows) - 1)]
    return {
        "rows": rows,
        "successive_I_gaps": succ,
        "gaps_non_increasing": all(b <= a for a, b in zip(gaps, gaps[1:])),
    }

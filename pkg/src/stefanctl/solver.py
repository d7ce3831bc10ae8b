"""Discrete state vector by successive approximations, one implicit step at a time.

At every interior lattice point the scheme reads (scaled by ``h^2``)

    A [b_n(v_g(k)) - b_n(v_g(k-1))] + D_g v_g(k)
        - sum_i [E_{g,i} v_{g+e_i}(k) + W_{g,i} v_{g-e_i}(k)] = h^2 f_g,

with ``A = h^2/tau``.  The Jacobi iteration freezes the neighbours at the
previous sweep and solves one strictly increasing scalar equation per node.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceError, StepSizeError
from .graph import MollifiedGraph

# Node chunks are fixed in size so that results never depend on the worker count.
CHUNK = 2048


@dataclass(frozen=True)
class SolverConfig:
    tol_fp: float = 1e-10
    tol_sc: float = 1e-12
    max_iter: int = 200000
    n: int | None = None
    workers: int = 1
    bisect_width: float = 1e-2
    check_residual: bool = True

    def __post_init__(self):
        if not (self.tol_fp > 0 and self.tol_sc > 0):
            raise ValueError("solver tolerances must be positive")
        if self.max_iter < 1 or self.workers < 1:
            raise ValueError("max_iter and workers must be >= 1")

    def mollification(self, h):
        """Mollification parameter; defaults to ``ceil(1/h)``."""
        return int(self.n) if self.n else int(math.ceil(1.0 / h - 1e-12))


@dataclass
class StepDiagnostics:
    k: int
    iterations: int
    updates: list
    ratios: list
    delta: float
    residual: float
    rhs_norm: float

    def as_dict(self):
        return {
            "k": self.k,
            "iterations": self.iterations,
            "A_N": [float(a) for a in self.updates],
            "ratios": [float(r) for r in self.ratios],
            "delta": float(self.delta),
            "residual": float(self.residual),
            "rhs_norm": float(self.rhs_norm),
        }


@dataclass
class DiscreteState:
    """Lattice values ``v[k][gamma]`` for ``k = 0..n_t`` plus per-step diagnostics."""

    disc: object
    values: np.ndarray
    steps_done: int
    diagnostics: list = field(default_factory=list)
    n: int = 0

    @property
    def final(self):
        return self.values[self.steps_done]

    def diagnostics_dict(self):
        return {"mollification_n": self.n, "steps": [d.as_dict() for d in self.diagnostics]}


# ---------------------------------------------------------------- scalar solve


def _check_monotone(A, S, bbar):
    slope = A * bbar + S
    if np.any(slope <= 0):
        bad = int(np.argmin(slope))
        raise StepSizeError(
            "monotone",
            f"scalar map is not increasing: A*bbar + S = {np.ravel(slope)[bad]:.6g} <= 0; "
            "refine h",
            index=bad,
        )
    return slope


def _solve_many(mg, A, S, rhs, x0, tol_sc, width):
    """Vectorized safeguarded solve of ``A b_n(x) + S x = rhs`` (one equation per entry).

    The root lies within ``|F(x0)|/m`` of any start ``x0`` because
    ``F' >= m = A*bbar + S``, which gives a guaranteed bracket.  Bisection
    narrows it to ``width``; Newton then continues past ``tol_sc`` until its
    correction reaches roundoff, so fixed-point updates stay clean down to
    the stopping tolerance.
    """
    S = np.broadcast_to(np.asarray(S, dtype=float), np.shape(rhs))
    rhs = np.asarray(rhs, dtype=float)
    x = np.array(x0, dtype=float, copy=True)
    eps = np.finfo(float).eps

    def F(y, idx, deriv):
        out = mg.evaluate(y, True, deriv)
        bv, bd = out if deriv else (out, None)
        by, sy = A * bv, S[idx] * y
        g = by + sy - rhs[idx]
        return g, 16 * eps * (np.abs(by) + np.abs(sy) + np.abs(rhs[idx])), bd

    idx = np.arange(x.size)
    g, fl, bd = F(x, idx, True)
    active = np.abs(g) > fl
    # pad: with slope exactly m on an affine stretch the root sits on the edge
    step = np.abs(g) / (A * mg.slope_floor + S) * (1.0 + 1e-8) + 1e-300
    lo = np.where(g > 0, x - step, x)
    hi = np.where(g > 0, x, x + step)
    wide = active & (hi - lo > width)
    if np.any(wide):
        for _ in range(200):
            w = np.flatnonzero(active & (hi - lo > width))
            if w.size == 0:
                break
            mid = 0.5 * (lo[w] + hi[w])
            gm, _, _ = F(mid, w, False)
            pos = gm > 0
            hi[w] = np.where(pos, mid, hi[w])
            lo[w] = np.where(pos, lo[w], mid)
        x = np.where(wide, 0.5 * (lo + hi), x)
        idx = np.flatnonzero(active)
        g, fl, bd = F(x[idx], idx, True)
    else:
        idx = np.flatnonzero(active)
        g, fl, bd = g[idx], fl[idx], bd[idx]
    for _ in range(200):
        if idx.size == 0:
            break
        xi = x[idx]
        exact = np.abs(g) <= fl
        li = np.where(g < 0, xi, lo[idx])
        ui = np.where(g > 0, xi, hi[idx])
        xn = xi - g / (A * bd + S[idx])
        outside = ~((xn >= li) & (xn <= ui))
        xn = np.where(outside, 0.5 * (li + ui), xn)
        tiny = 8 * eps * (1.0 + np.abs(xi))
        # bracket collapsed to adjacent floats: accept
        stuck = (ui - li) <= tiny
        converged = (np.abs(g) <= np.maximum(tol_sc, fl)) & ~outside & (np.abs(xn - xi) <= tiny)
        fin = exact | stuck | converged
        x[idx] = np.where(exact | stuck, xi, xn)
        lo[idx], hi[idx] = li, ui
        idx = idx[~fin]
        if idx.size == 0:
            break
        g, fl, bd = F(x[idx], idx, True)
    return x


def scalar_monotone_solve(mg, A, S, rhs, tol_sc=1e-12, x0=0.0, bisect_width=1e-2):
    """Solve ``A*b_n(v) + S*v = rhs`` for the unique root ``v``.

    Requires ``A*bbar + S > 0``; otherwise :class:`StepSizeError` is raised.
    """
    if A < 0:
        raise ValueError("A must be non-negative")
    _check_monotone(A, S, mg.slope_floor)
    S_arr = np.array([float(S)])
    out = _solve_many(mg, float(A), S_arr, np.array([float(rhs)]), np.array([float(x0)]),
                      tol_sc, bisect_width)
    return float(out[0])


# ---------------------------------------------------------------- step assembly


@dataclass(frozen=True)
class StepCoefficients:
    """Scheme coefficients on the interior lattice for one time level."""

    A: float
    diag: np.ndarray
    east: np.ndarray  # shape (d,) + interior shape
    west: np.ndarray
    source: np.ndarray  # h^2 f on the interior


def step_coefficients(coeffs, k, f=None):
    disc = coeffs.disc
    h, d = disc.h, disc.d
    inner = tuple(slice(1, n - 1) for n in disc.shape)
    f = coeffs.f if f is None else f
    diag = np.zeros(tuple(n - 2 for n in disc.shape))
    east, west = [], []
    for i in range(d):
        here = inner
        back = tuple(slice(0, n - 2) if j == i else inner[j] for j, n in enumerate(disc.shape))
        a_here = coeffs.a[i][here + (k - 1,)]
        a_back = coeffs.a[i][back + (k - 1,)]
        b_here = coeffs.b[i][here + (k - 1,)]
        b_back = coeffs.b[i][back + (k - 1,)]
        c_here = coeffs.c[i][here + (k - 1,)]
        diag = diag + (a_here + a_back - h * b_here - h * c_here)
        east.append(a_here - h * c_here)
        west.append(a_back - h * b_back)
    diag = diag + h * h * coeffs.r[inner + (k - 1,)]
    return StepCoefficients(
        A=h * h / disc.tau,
        diag=diag,
        east=np.stack(east),
        west=np.stack(west),
        source=h * h * np.asarray(f)[inner + (k - 1,)],
    )


def _neighbour_sum(sc, v):
    """``sum_i E_i v_{g+e_i} + W_i v_{g-e_i}`` on the interior of lattice array ``v``."""
    d = v.ndim
    inner = tuple(slice(1, n - 1) for n in v.shape)
    total = np.zeros(sc.diag.shape)
    for i in range(d):
        fwd = tuple(slice(2, None) if j == i else inner[j] for j in range(d))
        bwd = tuple(slice(0, -2) if j == i else inner[j] for j in range(d))
        total = total + (sc.east[i] * v[fwd] + sc.west[i] * v[bwd])
    return total


def _step_delta(sc, bbar):
    ew = np.sum(sc.east + sc.west, axis=0)
    denom = sc.diag + sc.A * bbar
    return ew, denom


def _validate_step(sc, bbar, k):
    for name, arr in (("east", sc.east), ("west", sc.west)):
        if np.any(arr < 0):
            idx = tuple(int(j) for j in np.argwhere(arr < 0)[0])
            raise StepSizeError(
                "coefficients",
                f"step {k}: {name} coefficient a - h*(b or c) is negative at axis/node {idx}; refine h",
                index=idx,
            )
    ew, denom = _step_delta(sc, bbar)
    if np.any(denom - ew <= 0):
        idx = tuple(int(j) for j in np.argwhere(denom - ew <= 0)[0])
        raise StepSizeError(
            "contraction",
            f"step {k}: h^2 bbar/tau + h*sum(b_back - b) + h^2 r is not positive at node {idx}; "
            "refine h or tau",
            index=idx,
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(ew > 0, ew / denom, 0.0)
    return float(np.max(delta)) if delta.size else 0.0


def contraction_factor(coeffs, mg, h=None, tau=None):
    """Worst-case contraction factor ``delta`` over all cells and steps."""
    disc = coeffs.disc
    if h is not None and abs(h - disc.h) > 1e-14 * h:
        raise ValueError("h does not match the coefficient grid")
    if tau is not None and abs(tau - disc.tau) > 1e-14 * tau:
        raise ValueError("tau does not match the coefficient grid")
    worst = 0.0
    for k in range(1, disc.n_t + 1):
        worst = max(worst, _validate_step(step_coefficients(coeffs, k), mg.slope_floor, k))
    return worst


def _chunked(fn, n_items, workers):
    """Apply ``fn(slice)`` over fixed-size chunks, in parallel, results in index order."""
    slices = [slice(s, min(s + CHUNK, n_items)) for s in range(0, n_items, CHUNK)]
    if workers <= 1 or len(slices) == 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, slices))


def _is_affine(mg):
    g = mg.base
    return len(g._ramp_knots) == 0 and len(g.breakpoints) == 0


def solve_timestep(prev, coeffs, mg, k, config=SolverConfig(), f=None, sc=None, start=None):
    """Advance one step: return ``(v(k), StepDiagnostics)``.

    The iteration starts from ``start`` (default ``v(k-1)``) and stops when ``A_N <= tol_fp`` or the
    tail bound ``delta*A_N/(1-delta) <= tol_fp``, provided the scheme residual
    is also below ``tol_fp*(1 + ||rhs||)``.
    """
    disc = coeffs.disc
    bbar = mg.slope_floor
    sc = step_coefficients(coeffs, k, f) if sc is None else sc
    delta = _validate_step(sc, bbar, k)
    _check_monotone(sc.A, sc.diag, bbar)

    prev = np.asarray(prev, dtype=float)
    inner = tuple(slice(1, n - 1) for n in disc.shape)
    data = sc.A * mg.value(prev[inner]) + sc.source
    rhs_norm = float(np.max(np.abs(data))) if data.size else 0.0
    target = config.tol_fp * (1.0 + rhs_norm)

    diag_flat = sc.diag.ravel()
    n_nodes = diag_flat.size
    affine = _is_affine(mg)
    if affine:
        p0, p1 = mg.base._p0, mg.base._p1

    v = (prev if start is None else np.asarray(start, dtype=float)).copy()
    v[disc.boundary_mask] = 0.0
    updates, ratios = [], []
    residual = math.inf
    for it in range(1, config.max_iter + 1):
        rhs = (data + _neighbour_sum(sc, v)).ravel()
        start = v[inner].ravel()
        if affine:
            new = (rhs - sc.A * p0) / (sc.A * p1 + diag_flat)
        else:
            parts = _chunked(
                lambda s: _solve_many(mg, sc.A, diag_flat[s], rhs[s], start[s],
                                      config.tol_sc, config.bisect_width),
                n_nodes, config.workers,
            )
            new = np.concatenate(parts) if parts else start
        A_N = float(np.max(np.abs(new - start))) if n_nodes else 0.0
        if updates:
            ratios.append(A_N / updates[-1] if updates[-1] > 0 else 0.0)
        updates.append(A_N)
        v[inner] = new.reshape(sc.diag.shape)
        small = A_N <= config.tol_fp or (delta < 1 and delta * A_N / (1 - delta) <= config.tol_fp)
        if small:
            residual = step_residual(v, prev, sc, mg)
            if not config.check_residual or residual <= target:
                return v, StepDiagnostics(k, it, updates, ratios, delta, residual, rhs_norm)
    raise ConvergenceError(
        f"step {k}: fixed point not reached in {config.max_iter} sweeps "
        f"(last update {updates[-1]:.3e}, delta {delta:.6f})",
        step=k, updates=updates, ratios=ratios,
    )


def step_residual(v, prev, sc, mg):
    """Max-norm residual of the ``h^2``-scaled scheme at the interior nodes."""
    inner = tuple(slice(1, n - 1) for n in v.shape)
    if sc.diag.size == 0:
        return 0.0
    r = (sc.A * (mg.value(v[inner]) - mg.value(prev[inner])) + sc.diag * v[inner]
         - _neighbour_sum(sc, v) - sc.source)
    return float(np.max(np.abs(r)))


def initial_values(coeffs):
    v0 = np.array(coeffs.phi, dtype=float, copy=True)
    v0[coeffs.disc.boundary_mask] = 0.0
    return v0


def solve_state(coeffs, mg, config=SolverConfig(), f=None, until=None, resume=None):
    """Solve the discrete state vector for steps ``1..until``.

    ``f`` overrides the averaged source (a cell array).  ``resume`` continues a
    partially solved :class:`DiscreteState`; the result is bit-identical to a
    single uninterrupted run.
    """
    disc = coeffs.disc
    until = disc.n_t if until is None else int(until)
    if not 0 <= until <= disc.n_t:
        raise ValueError(f"until must be within 0..{disc.n_t}")
    if resume is None:
        values = np.zeros((disc.n_t + 1,) + disc.shape)
        values[0] = initial_values(coeffs)
        state = DiscreteState(disc, values, 0, [], mg.n)
    else:
        state = DiscreteState(disc, resume.values.copy(), resume.steps_done,
                              list(resume.diagnostics), resume.n)
    for k in range(state.steps_done + 1, until + 1):
        try:
            vk, diag = solve_timestep(state.values[k - 1], coeffs, mg, k, config, f=f)
        except (ConvergenceError, StepSizeError) as exc:
            exc.step = getattr(exc, "step", None) or k
            raise
        state.values[k] = vk
        state.diagnostics.append(diag)
        state.steps_done = k
    return state


def mollified_for(disc, graph, config=SolverConfig(), quadrature_order=64):
    return MollifiedGraph(graph, config.mollification(disc.h), quadrature_order)


# ---------------------------------------------------------------- identities


def pointwise_residual(values, coeffs, mg, k, f=None):
    """Residual of the pointwise scheme (unscaled) at interior nodes for step ``k``."""
    sc = step_coefficients(coeffs, k, f)
    disc = coeffs.disc
    inner = tuple(slice(1, n - 1) for n in disc.shape)
    vk, vp = values[k], values[k - 1]
    r = (sc.A * (mg.value(vk[inner]) - mg.value(vp[inner])) + sc.diag * vk[inner]
         - _neighbour_sum(sc, vk) - sc.source)
    return r / disc.h**2


def weak_form(values, coeffs, mg, k, eta, f=None):
    """Left side of the summed weak identity for test vector ``eta`` at step ``k``."""
    disc = coeffs.disc
    h, d, tau = disc.h, disc.d, disc.tau
    f = coeffs.f if f is None else f
    P = tuple(slice(0, m) for m in disc.cell_shape)
    vk, vp = values[k], values[k - 1]
    bt = (mg.value(vk[P]) - mg.value(vp[P])) / tau
    total = bt * eta[P]
    for i in range(d):
        fw = tuple(slice(1, m + 1) if j == i else P[j] for j, m in enumerate(disc.cell_shape))
        vx = (vk[fw] - vk[P]) / h
        ex = (eta[fw] - eta[P]) / h
        total = total + (coeffs.a[i][..., k - 1] * vx + coeffs.b[i][..., k - 1] * vk[P]) * ex
        total = total + coeffs.c[i][..., k - 1] * vx * eta[P]
    total = total + (coeffs.r[..., k - 1] * vk[P] - np.asarray(f)[..., k - 1]) * eta[P]
    return h**d * float(np.sum(total))


def zeta_field(state, mg, order=32):
    """``zeta`` for every interior node and step, by quadrature of ``b_n'``."""
    disc = state.disc
    out = np.empty((state.steps_done,) + tuple(n - 2 for n in disc.shape))
    inner = tuple(slice(1, n - 1) for n in disc.shape)
    for k in range(1, state.steps_done + 1):
        vk = state.values[k][inner].ravel()
        vp = state.values[k - 1][inner].ravel()
        out[k - 1] = np.array(
            [mg.derivative_mean(w, v, order) for w, v in zip(vp, vk)]
        ).reshape(out.shape[1:])
    return out


def with_workers(config, workers):
    return replace(config, workers=int(workers))

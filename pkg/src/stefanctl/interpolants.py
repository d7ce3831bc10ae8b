"""Interpolations of a discrete state and the norms entering the estimates.

Four modes are supported:

``"constant"``    value at the natural corner on each cell (interior + top face)
``"difference"``  forward difference quotient along one axis, same attribution
``"step"``        multilinear in space, piecewise constant in time
``"linear"``      multilinear in space, linear in time

Spatial faces shared by two prisms are attributed to the prism with the
smaller natural corner; ``t`` in ``(t_{k-1}, t_k]`` belongs to step ``k`` and
``t = 0`` to the initial slice.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GridError

MODES = ("constant", "difference", "step", "linear")
_FACE_TOL = 1e-12


@lru_cache(maxsize=None)
def _gauss01(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _prisms(disc):
    return tuple(slice(0, m) for m in disc.cell_shape)


def _shift(disc, corner):
    return tuple(slice(c, c + m) for c, m in zip(corner, disc.cell_shape))


def _corner_weights(xi):
    """Multilinear corner weights for local coordinates ``xi`` (list of arrays)."""
    d = len(xi)
    out = {}
    for corner in itertools.product((0, 1), repeat=d):
        w = 1.0
        for i, c in enumerate(corner):
            w = w * (xi[i] if c else 1.0 - xi[i])
        out[corner] = w
    return out


@dataclass(frozen=True)
class InterpolantBundle:
    """Read-only view evaluating the interpolants of one solved state."""

    state: object

    @property
    def disc(self):
        return self.state.disc

    def _locate_space(self, x):
        disc = self.disc
        x = [np.asarray(xi, dtype=float) for xi in x]
        if len(x) != disc.d:
            raise GridError(f"expected {disc.d} coordinates, got {len(x)}")
        gam, xi = [], []
        for i, xc in enumerate(x):
            lo, hi = disc.domain.box[i]
            if np.any(xc < lo - _FACE_TOL * (1 + abs(lo))) or np.any(xc > hi + _FACE_TOL * (1 + abs(hi))):
                raise GridError(f"query outside the domain along axis {i}")
            s = (xc - lo) / disc.h
            g = np.clip(np.ceil(s - _FACE_TOL) - 1, 0, disc.cell_shape[i] - 1).astype(int)
            gam.append(g)
            xi.append(np.clip(s - g, 0.0, 1.0))
        return gam, xi

    def _locate_time(self, t):
        disc = self.disc
        t = np.asarray(t, dtype=float)
        if np.any(t < -_FACE_TOL) or np.any(t > disc.domain.T * (1 + _FACE_TOL)):
            raise GridError("query time outside [0, T]")
        s = t / disc.tau
        k = np.clip(np.ceil(s - _FACE_TOL), 0, self.state.steps_done).astype(int)
        theta = np.clip(s - (k - 1), 0.0, 1.0)
        return k, theta

    def _multilinear(self, k, gam, xi):
        vals = self.state.values
        out = 0.0
        for corner, w in _corner_weights(xi).items():
            idx = tuple(g + c for g, c in zip(gam, corner))
            out = out + w * vals[(k,) + idx]
        return out

    def eval(self, mode, x, t, axis=0):
        """Evaluate interpolant ``mode`` at points ``x`` (sequence of arrays) and times ``t``."""
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
        gam, xi = self._locate_space(x)
        k, theta = self._locate_time(t)
        shape = np.broadcast(*gam, k).shape
        gam = [np.broadcast_to(g, shape) for g in gam]
        xi = [np.broadcast_to(a, shape) for a in xi]
        k = np.broadcast_to(k, shape)
        vals = self.state.values
        if mode == "constant":
            return vals[(k,) + tuple(gam)]
        if mode == "difference":
            up = list(gam)
            up[axis] = up[axis] + 1
            return (vals[(k,) + tuple(up)] - vals[(k,) + tuple(gam)]) / self.disc.h
        if mode == "step":
            return self._multilinear(k, gam, xi)
        theta = np.broadcast_to(theta, shape)
        km = np.maximum(k - 1, 0)
        cur = self._multilinear(k, gam, xi)
        prev = self._multilinear(km, gam, xi)
        return np.where(k == 0, cur, prev + theta * (cur - prev))


def evaluate(state, mode, x, t, axis=0):
    return InterpolantBundle(state).eval(mode, x, t, axis)


# ---------------------------------------------------------------- discrete norms


def _forward_diffs(disc, v):
    """Forward differences ``v_{gamma x_i}`` on the prism index set, one array per axis."""
    P = _prisms(disc)
    out = []
    for i in range(disc.d):
        e = tuple(1 if j == i else 0 for j in range(disc.d))
        out.append((v[_shift(disc, e)] - v[P]) / disc.h)
    return out


def discrete_norms(state):
    """Discrete norms of a state, keyed by name.

    ``time``, ``gradient`` and ``mixed`` are the three left-hand terms of the
    energy estimate; ``gradient_all`` also includes ``k = 0``.
    """
    disc = state.disc
    h, tau, d = disc.h, disc.tau, disc.d
    n = state.steps_done
    V = state.values[: n + 1]
    P = _prisms(disc)
    hd = h**d
    time = 0.0
    mixed = 0.0
    grads = []
    l2 = 0.0
    for k in range(0, n + 1):
        dx = _forward_diffs(disc, V[k])
        grads.append(hd * float(sum(np.sum(g * g) for g in dx)))
        if k == 0:
            prev_dx = dx
            continue
        vt = (V[k][P] - V[k - 1][P]) / tau
        time += tau * hd * float(np.sum(vt * vt))
        mixed += tau**2 * hd * float(sum(np.sum(((a - b) / tau) ** 2) for a, b in zip(dx, prev_dx)))
        l2 += tau * hd * float(np.sum(V[k][P] ** 2))
        prev_dx = dx
    grads = np.array(grads)
    return {
        "linf": float(np.max(np.abs(V))),
        "l2": float(np.sqrt(l2)),
        "time": time,
        "gradient": float(np.max(grads[1:])) if n else 0.0,
        "gradient_all": float(np.max(grads)),
        "mixed": mixed,
    }


def energy_left(norms):
    return norms["time"] + norms["gradient"] + norms["mixed"]


# ---------------------------------------------------------------- exact cell integrals


def _corner_fields(disc, v):
    """Values of lattice array ``v`` at each corner of every prism."""
    return {c: v[_shift(disc, c)] for c in itertools.product((0, 1), repeat=disc.d)}


def _prism_quadrature(disc, fields, order, fn):
    """Sum over prisms of ``h^d * int fn(values at local nodes)`` with tensor GL."""
    x, w = _gauss01(order)
    total = 0.0
    for node in itertools.product(range(order), repeat=disc.d):
        xi = [x[j] for j in node]
        wt = float(np.prod([w[j] for j in node]))
        cw = _corner_weights(xi)
        vals = [sum(cw[c] * F[c] for c in cw) for F in fields]
        grads = [_local_gradient(disc, F, xi) for F in fields]
        total += wt * float(np.sum(fn(vals, grads)))
    return disc.h**disc.d * total


def _local_gradient(disc, F, xi):
    """Spatial gradient of the multilinear interpolant at local coordinates ``xi``."""
    d = disc.d
    out = []
    for i in range(d):
        g = 0.0
        for c, val in F.items():
            w = 1.0 / disc.h * (1.0 if c[i] else -1.0)
            for j in range(d):
                if j != i:
                    w = w * (xi[j] if c[j] else 1.0 - xi[j])
            g = g + w * val
        out.append(g)
    return out


def multilinear_l2_sq(disc, v):
    """``||V||^2_{L2(Omega)}`` of the multilinear interpolant of lattice array ``v`` (exact)."""
    F = _corner_fields(disc, v)
    return _prism_quadrature(disc, [F], 2, lambda vals, grads: vals[0] ** 2)


def l2_mismatch_gap(state, gamma=None, k=None):
    """``||V^k - G||_{L2(Omega)}`` with ``G`` prism-wise constant, by default at the final time.

    ``gamma`` holds the prism values of ``G`` (lattice- or prism-shaped); when
    omitted, ``G`` is the state's own piecewise-constant interpolant at ``t_k``.
    The multilinear-minus-constant difference is integrated exactly per prism.
    """
    disc = state.disc
    k = state.steps_done if k is None else k
    v = state.values[k]
    F = _corner_fields(disc, v)
    P = _prisms(disc)
    const = v[P] if gamma is None else np.asarray(gamma, dtype=float)
    if const.shape == disc.shape:
        const = const[P]
    sq = _prism_quadrature(disc, [F], 2, lambda vals, grads: (vals[0] - const) ** 2)
    return float(np.sqrt(sq))


def step_linear_gap(state):
    """``||V - V'||_{L2(D)}``; equals ``tau/sqrt(3)`` times the time-difference norm of ``V``."""
    disc = state.disc
    total = 0.0
    for k in range(1, state.steps_done + 1):
        total += disc.tau / 3.0 * multilinear_l2_sq(disc, state.values[k] - state.values[k - 1])
    return float(np.sqrt(total))


def gradient_l2_sq(state):
    """``||D_x V'||^2_{L2(D)}``, exact (2-point Gauss in space and time)."""
    disc = state.disc
    x, w = _gauss01(2)
    total = 0.0
    for k in range(1, state.steps_done + 1):
        F0 = _corner_fields(disc, state.values[k - 1])
        F1 = _corner_fields(disc, state.values[k])
        for th, wt in zip(x, w):
            F = {c: (1 - th) * F0[c] + th * F1[c] for c in F0}
            total += disc.tau * wt * _prism_quadrature(
                disc, [F], 2, lambda vals, grads: sum(g * g for g in grads[0])
            )
    return total


def time_derivative_l2_sq(state):
    """``||dV'/dt||^2_{L2(D)}``, exact."""
    disc = state.disc
    total = 0.0
    for k in range(1, state.steps_done + 1):
        total += disc.tau * multilinear_l2_sq(disc, (state.values[k] - state.values[k - 1]) / disc.tau)
    return total


def interpolant_bounds(state):
    """Both interpolant inequalities as ``{name: (left, right)}``."""
    disc = state.disc
    norms = discrete_norms(state)
    d, T = disc.d, disc.tau * state.steps_done
    return {
        "gradient": (gradient_l2_sq(state), 2 ** (d + 1) * T * norms["gradient_all"]),
        "time": (time_derivative_l2_sq(state), 2**d * norms["time"]),
    }


def l2_error(state, exact, order=4, t_offset=0.0):
    """``||V' - v||_{L2(D)}`` by tensor Gauss-Legendre on every space-time cell.

    ``exact(x, t)`` takes coordinate arrays; ``t_offset`` is added to the time
    passed to it.
    """
    disc = state.disc
    d, h, tau = disc.d, disc.h, disc.tau
    x, w = _gauss01(order)
    lower = disc.domain.lower
    M = disc.cell_shape
    total = 0.0
    for k in range(1, state.steps_done + 1):
        F0 = _corner_fields(disc, state.values[k - 1])
        F1 = _corner_fields(disc, state.values[k])
        for node in itertools.product(range(order), repeat=d):
            xi = [x[j] for j in node]
            wx = float(np.prod([w[j] for j in node]))
            cw = _corner_weights(xi)
            V0 = sum(cw[c] * F0[c] for c in cw)
            V1 = sum(cw[c] * F1[c] for c in cw)
            pts = np.meshgrid(*[lower[i] + h * (np.arange(M[i]) + xi[i]) for i in range(d)],
                              indexing="ij")
            for th, wt in zip(x, w):
                t = (k - 1 + th) * tau
                diff = (1 - th) * V0 + th * V1 - exact(pts, t + t_offset)
                total += wx * wt * float(np.sum(diff * diff))
    return float(np.sqrt(total * h**d * tau))


def l2_norm_exact(disc, exact, order=4, t_offset=0.0, steps=None):
    """``||v||_{L2(D)}`` with the same quadrature as :func:`l2_error`."""
    from types import SimpleNamespace

    steps = disc.n_t if steps is None else steps
    zero = SimpleNamespace(disc=disc, values=np.zeros((steps + 1,) + disc.shape), steps_done=steps)
    return l2_error(zero, exact, order, t_offset)


def derivative_pairings(state, tests, axis=0, order=4):
    """``int_D (Vtilde^i - dV'/dx_i) psi`` for each test function ``psi(x, t)``."""
    disc = state.disc
    d, h, tau = disc.d, disc.h, disc.tau
    x, w = _gauss01(order)
    lower = disc.domain.lower
    M = disc.cell_shape
    out = np.zeros(len(tests))
    for k in range(1, state.steps_done + 1):
        F0 = _corner_fields(disc, state.values[k - 1])
        F1 = _corner_fields(disc, state.values[k])
        step = _forward_diffs(disc, state.values[k])[axis]
        for node in itertools.product(range(order), repeat=d):
            xi = [x[j] for j in node]
            wx = float(np.prod([w[j] for j in node]))
            g0 = _local_gradient(disc, F0, xi)[axis]
            g1 = _local_gradient(disc, F1, xi)[axis]
            pts = np.meshgrid(*[lower[i] + h * (np.arange(M[i]) + xi[i]) for i in range(d)],
                              indexing="ij")
            for th, wt in zip(x, w):
                t = (k - 1 + th) * tau
                diff = step - ((1 - th) * g0 + th * g1)
                for j, psi in enumerate(tests):
                    out[j] += wx * wt * float(np.sum(diff * psi(pts, t)))
    return out * h**d * tau


def interface_position(state, k=None, level=0.0):
    """First sign change of ``V'(., t_k) - level`` along the axis (1-D), by linear interpolation."""
    disc = state.disc
    if disc.d != 1:
        raise ValueError("interface extraction is implemented for d = 1")
    k = state.steps_done if k is None else k
    v = state.values[k] - level
    xs = disc.coords(0)
    s = np.sign(v)
    for j in range(len(v) - 1):
        if s[j] != 0 and s[j] * s[j + 1] < 0:
            return float(xs[j] + v[j] / (v[j] - v[j + 1]) * disc.h)
    zeros = np.flatnonzero((s == 0) & (np.arange(len(v)) > 0) & (np.arange(len(v)) < len(v) - 1))
    return float(xs[zeros[0]]) if zeros.size else float("nan")


def export_samples(path, state, mode="linear", points_per_cell=2, axis=0):
    """Write ``x..., t, value`` rows sampling an interpolant on a regular grid."""
    disc = state.disc
    bundle = InterpolantBundle(state)
    axes = [np.linspace(lo, hi, disc.cell_shape[i] * points_per_cell + 1)
            for i, (lo, hi) in enumerate(disc.domain.box)]
    X = [a.ravel() for a in np.meshgrid(*axes, indexing="ij")]
    with open(path, "w") as fh:
        fh.write(",".join([f"x{i + 1}" for i in range(disc.d)] + ["t", "value"]) + "\n")
        for t in disc.times[: state.steps_done + 1]:
            vals = bundle.eval(mode, X, np.full(X[0].shape, t), axis)
            for row in zip(*X, vals):
                fh.write(",".join(repr(float(c)) for c in row[:-1]) + f",{float(t)!r},{float(row[-1])!r}\n")

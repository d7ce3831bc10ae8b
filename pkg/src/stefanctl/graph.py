"""Maximal monotone graphs with jumps and their smooth mollifications.

A graph is stored as a continuous piecewise-linear part ``B`` plus a sum of
Heaviside steps of height ``nu_j`` at the breakpoints ``v^j``.  Convolving
each ramp ``(y - t)_+`` and each step ``H(y - v^j)`` with the compactly
supported bump kernel reduces the mollified graph to two scalar kernel
functions: the kernel CDF and its first moment.  The first moment has a
closed form in terms of the exponential integral; the CDF is computed with a
fixed Gauss-Legendre rule.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import GraphError, QuadratureError

DEFAULT_KERNEL_ORDER = 64


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ui * ui))
    return out


@lru_cache(maxsize=None)
def _kernel_mass():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(
            lambda u: float(_bump(u)), -1.0, 1.0, epsabs=1e-15, epsrel=1e-14, limit=400
        )
    if not np.isfinite(val) or err > 1e-12:
        raise QuadratureError(f"kernel mass quadrature did not converge (estimate {err:.3e})")
    return val


@lru_cache(maxsize=None)
def _gauss_unit(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def kernel_constant(n=1, quadrature_order=DEFAULT_KERNEL_ORDER):
    """Return the factor ``C*n`` in front of the width-``1/n`` kernel.

    ``C`` normalizes ``omega_1`` to unit mass.  The value is checked against
    the Gauss-Legendre rule of the requested order; a rule too coarse to
    reproduce unit mass to 1e-12 raises :class:`QuadratureError`.
    """
    if n < 1:
        raise ValueError("mollification parameter n must be >= 1")
    C = 1.0 / _kernel_mass()
    x, w = _gauss_unit(quadrature_order)
    half = C * np.dot(w, _bump(x))
    if abs(2.0 * half - 1.0) > 1e-12:
        raise QuadratureError(
            f"Gauss-Legendre order {quadrature_order} reproduces kernel mass only to "
            f"{abs(2.0 * half - 1.0):.3e}"
        )
    return C * n


class _Kernel:
    """Unit-width kernel ``omega_1`` with its CDF and first moment."""

    def __init__(self, order):
        self.C = kernel_constant(1, order)
        self.nodes, self.weights = _gauss_unit(order)

    def density(self, u):
        return self.C * _bump(u)

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        out = np.where(u >= 1.0, 1.0, 0.0)
        inside = np.abs(u) < 1.0
        if np.any(inside):
            ui = u[inside]
            a = np.abs(ui)
            pts = a[:, None] * self.nodes[None, :]
            half = a * (np.exp(-1.0 / (1.0 - pts * pts)) @ self.weights)
            out[inside] = 0.5 + np.sign(ui) * self.C * half
        return out

    def moment(self, u):
        # int_{-1}^{u} w omega_1(w) dw = -(C/2) [q e^{-1/q} - E1(1/q)],  q = 1 - u^2
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        if np.any(inside):
            q = 1.0 - u[inside] ** 2
            out[inside] = -0.5 * self.C * (q * np.exp(-1.0 / q) - special.exp1(1.0 / q))
        return out


@lru_cache(maxsize=None)
def _kernel(order):
    return _Kernel(order)


def _as_tuple(seq):
    return tuple(float(s) for s in seq)


@dataclass(frozen=True)
class Branch:
    """Piecewise-linear monotone branch given by knots and values.

    Outside its knot range the branch extends its first/last linear piece.
    """

    knots: tuple
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "knots", _as_tuple(self.knots))
        object.__setattr__(self, "values", _as_tuple(self.values))
        if len(self.knots) != len(self.values) or len(self.knots) < 2:
            raise GraphError("a branch needs at least two knots and one value per knot")
        if np.any(np.diff(self.knots) <= 0):
            raise GraphError("branch knots must be strictly increasing")

    @property
    def slopes(self):
        return np.diff(self.values) / np.diff(self.knots)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        k = np.asarray(self.knots)
        v = np.asarray(self.values)
        s = self.slopes
        out = np.interp(y, k, v)
        out = np.where(y < k[0], v[0] + s[0] * (y - k[0]), out)
        out = np.where(y > k[-1], v[-1] + s[-1] * (y - k[-1]), out)
        return out


@dataclass(frozen=True)
class MonotoneGraph:
    """Maximal monotone graph: monotone branches glued with positive jumps.

    Branch ``j`` (0-based) lives on ``(v^j, v^{j+1})`` with ``v^0 = -inf`` and
    ``v^{m+1} = +inf``.  On that interval the graph equals the branch plus
    the sum of the jumps at breakpoints to the left.
    """

    breakpoints: tuple
    jumps: tuple
    branches: tuple
    slope_floor: float
    # continuous part as B(y) = p0 + p1*y + sum_k c_k (y - t_k)_+
    _p0: float = field(init=False, repr=False, compare=False)
    _p1: float = field(init=False, repr=False, compare=False)
    _ramp_knots: np.ndarray = field(init=False, repr=False, compare=False)
    _ramp_coefs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", _as_tuple(self.breakpoints))
        object.__setattr__(self, "jumps", _as_tuple(self.jumps))
        branches = tuple(
            b if isinstance(b, Branch) else Branch(*b) for b in self.branches
        )
        object.__setattr__(self, "branches", branches)
        object.__setattr__(self, "slope_floor", float(self.slope_floor))
        self._validate()
        self._build_ramps()

    @property
    def m(self):
        return len(self.breakpoints)

    def _validate(self):
        bp, nu, br, bbar = self.breakpoints, self.jumps, self.branches, self.slope_floor
        problems = []
        if bbar <= 0:
            problems.append("slope_floor must be positive")
        if len(nu) != len(bp):
            problems.append("need exactly one jump per breakpoint")
        if len(br) != len(bp) + 1:
            problems.append("need m+1 branches for m breakpoints")
        if np.any(np.diff(bp) <= 0):
            problems.append("breakpoints must be strictly increasing")
        if any(x <= 0 for x in nu):
            problems.append("all jumps must be positive")
        tol = 1e-12 * max(1.0, bbar)
        for j, b in enumerate(br):
            if np.min(b.slopes) < bbar - tol:
                problems.append(
                    f"branch {j} has slope {np.min(b.slopes):.6g} below slope_floor {bbar:.6g}"
                )
        if not problems:
            for j, v in enumerate(bp):
                left, right = float(br[j](v)), float(br[j + 1](v))
                if abs(left - right) > 1e-12 * max(1.0, abs(left)):
                    problems.append(
                        f"branches {j} and {j + 1} disagree at breakpoint {v:.6g}: "
                        f"{left:.6g} vs {right:.6g}"
                    )
        if problems:
            raise GraphError("; ".join(problems))

    def _build_ramps(self):
        edges = (-np.inf,) + self.breakpoints + (np.inf,)
        pts = []
        for j, b in enumerate(self.branches):
            pts.extend(k for k in b.knots if edges[j] < k < edges[j + 1])
        pts.extend(self.breakpoints)
        knots = np.unique(np.asarray(pts, dtype=float))

        if knots.size == 0:
            b = self.branches[0]
            p1 = float(b.slopes[0])
            p0 = float(b.values[0] - p1 * b.knots[0])
            coefs = np.zeros(0)
        else:
            bounds = np.concatenate(([knots[0] - 1.0], knots, [knots[-1] + 1.0]))
            vals = self.continuous(bounds)
            slopes = np.diff(vals) / np.diff(bounds)
            p1 = float(slopes[0])
            p0 = float(self.continuous(knots[0]) - p1 * knots[0])
            coefs = np.diff(slopes)
            keep = coefs != 0.0
            knots, coefs = knots[keep], coefs[keep]
        object.__setattr__(self, "_p0", p0)
        object.__setattr__(self, "_p1", p1)
        object.__setattr__(self, "_ramp_knots", knots)
        object.__setattr__(self, "_ramp_coefs", coefs)

    def continuous(self, y):
        """Continuous part ``B``: branch ``j`` on its own interval, no jumps."""
        y = np.asarray(y, dtype=float)
        idx = np.searchsorted(np.asarray(self.breakpoints), y, side="left")
        out = np.empty_like(y)
        for j, b in enumerate(self.branches):
            mask = idx == j
            if np.any(mask):
                out[mask] = b(y[mask])
        return out

    def jump_sum(self, y, inclusive=False):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for v, nu in zip(self.breakpoints, self.jumps):
            out = out + nu * ((y >= v) if inclusive else (y > v))
        return out


def graph_eval(g, y):
    """Value set of the graph at ``y`` as a closed interval ``(lo, hi)``.

    Off the breakpoints the interval is degenerate.  At a breakpoint its width
    is the jump there.
    """
    y = float(y)
    base = float(g.continuous(y))
    lo = base + float(g.jump_sum(y, inclusive=False))
    hi = base + float(g.jump_sum(y, inclusive=True))
    return lo, hi


@dataclass(frozen=True)
class MollifiedGraph:
    """Convolution of a :class:`MonotoneGraph` with the width-``1/n`` kernel."""

    base: MonotoneGraph
    n: int
    quadrature_order: int = DEFAULT_KERNEL_ORDER
    kernel_norm: float = field(init=False)

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("mollification parameter n must be >= 1")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "kernel_norm", _kernel(self.quadrature_order).C)

    @property
    def slope_floor(self):
        return self.base.slope_floor

    @property
    def _centers(self):
        """Ramp knots and breakpoints merged: rows of (center, ramp coefficient, jump)."""
        cached = self.__dict__.get("_centers_cache")
        if cached is None:
            g = self.base
            table = {}
            for t, c in zip(g._ramp_knots, g._ramp_coefs):
                table.setdefault(float(t), [0.0, 0.0])[0] += float(c)
            for bp, nu in zip(g.breakpoints, g.jumps):
                table.setdefault(float(bp), [0.0, 0.0])[1] += float(nu)
            cached = tuple((t, c, nu) for t, (c, nu) in sorted(table.items()))
            object.__setattr__(self, "_centers_cache", cached)
        return cached

    def evaluate(self, v, value=True, derivative=False):
        """Return ``b_n(v)`` and/or ``b_n'(v)``, sharing the kernel work."""
        g, n = self.base, self.n
        ker = _kernel(self.quadrature_order)
        v0 = np.asarray(v, dtype=float)
        v = np.atleast_1d(v0)
        val = g._p0 + g._p1 * v if value else None
        der = np.full(v.shape, g._p1) if derivative else None
        for t, c, nu in self._centers:
            u = n * (v - t)
            win = np.abs(u) < 1.0
            step = (u >= 1.0).astype(float)
            if value:
                ramp = np.where(u >= 1.0, v - t, 0.0)
            if np.any(win):
                uw = u[win]
                K = ker.cdf(uw)
                step[win] = K
                if value and c:
                    ramp[win] = (uw * K - ker.moment(uw)) / n
                if derivative and nu:
                    der[win] += nu * n * ker.density(uw)
            if value:
                val = val + (c * ramp + nu * step)
            if derivative and c:
                der = der + c * step
        if value and derivative:
            return val.reshape(v0.shape), der.reshape(v0.shape)
        return (val if value else der).reshape(v0.shape)

    def value(self, v):
        return self.evaluate(v)

    def derivative(self, v):
        return self.evaluate(v, value=False, derivative=True)

    def critical_points(self):
        """Points where ``b_n`` stops being analytic (window edges)."""
        g = self.base
        centers = np.concatenate((g._ramp_knots, np.asarray(g.breakpoints)))
        return np.unique(np.concatenate((centers - 1.0 / self.n, centers + 1.0 / self.n)))

    def derivative_mean(self, w, v, order=32):
        """``int_0^1 b_n'(theta v + (1-theta) w) dtheta`` by split Gauss-Legendre.

        The segment is split at the window edges so each piece is smooth.
        """
        w, v = float(w), float(v)
        if w == v:
            return float(self.derivative(v))
        lo, hi = min(w, v), max(w, v)
        crit = self.critical_points()
        cuts = np.concatenate(([lo], crit[(crit > lo) & (crit < hi)], [hi]))
        x, wt = _gauss_unit(order)
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            total += (b - a) * np.dot(wt, self.derivative(a + (b - a) * x))
        return total / (hi - lo)


def mollify(mg, v):
    return mg.value(v)


def mollify_derivative(mg, v):
    return mg.derivative(v)


def two_phase_graph(transition=0.0, latent=1.0, c_solid=1.0, c_liquid=1.0):
    """Classical two-phase enthalpy graph with linear branches."""
    t = float(transition)
    return MonotoneGraph(
        breakpoints=(t,),
        jumps=(latent,),
        branches=(
            Branch((t - 1.0, t), (-c_solid, 0.0)),
            Branch((t, t + 1.0), (0.0, c_liquid)),
        ),
        slope_floor=min(c_solid, c_liquid),
    )


def identity_graph(slope=1.0):
    return MonotoneGraph((), (), (Branch((0.0, 1.0), (0.0, slope)),), slope)

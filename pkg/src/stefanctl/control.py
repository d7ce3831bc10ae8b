"""Discrete controls, the lift/discretize maps and the cost functionals."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .grid import build_coefficient_grid, cell_averages
from .solver import SolverConfig, mollified_for, solve_state

_FACE_TOL = 1e-12


@dataclass
class ControlVector:
    """Cell values ``f_alpha`` (shape ``cell_shape + (n_t,)``) and the bound ``R``."""

    disc: object
    values: np.ndarray
    R: float = np.inf

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.disc.control_shape:
            raise ValueError(
                f"control shape {self.values.shape} does not match {self.disc.control_shape}"
            )
        if self.R < 0:
            raise ValueError("R must be non-negative")

    @property
    def linf(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    @property
    def l2(self):
        disc = self.disc
        return float(np.sqrt(disc.tau * disc.h**disc.d * np.sum(self.values**2)))

    def feasible(self):
        return self.linf <= self.R

    def projected(self):
        return ControlVector(self.disc, project(self.values, self.R), self.R)


def project(values, R):
    """Per-entry clamp onto the ``l_inf`` ball of radius ``R`` (idempotent)."""
    return np.clip(values, -R, R)


def zero_control(disc, R=np.inf):
    return ControlVector(disc, np.zeros(disc.control_shape), R)


@dataclass(frozen=True)
class PiecewiseConstantField:
    """Space-time field equal to ``f_alpha`` on each cell and zero off the domain."""

    disc: object
    values: np.ndarray

    def __call__(self, x, t):
        disc = self.disc
        x = [np.asarray(xi, dtype=float) for xi in x]
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= disc.domain.T * (1 + _FACE_TOL))
        idx = []
        for i, xc in enumerate(x):
            lo, hi = disc.domain.box[i]
            inside = inside & (xc >= lo) & (xc <= hi)
            s = (xc - lo) / disc.h
            idx.append(np.clip(np.ceil(s - _FACE_TOL) - 1, 0, disc.cell_shape[i] - 1).astype(int))
        k = np.clip(np.ceil(t / disc.tau - _FACE_TOL), 1, disc.n_t).astype(int)
        shape = np.broadcast(*idx, k).shape
        idx = tuple(np.broadcast_to(a, shape) for a in idx)
        vals = self.values[idx + (np.broadcast_to(k - 1, shape),)]
        return np.where(np.broadcast_to(inside, shape), vals, 0.0)

    def ess_sup(self):
        """Essential sup, sampled at one interior point of every cell."""
        disc = self.disc
        centers = np.meshgrid(
            *[disc.domain.box[i][0] + disc.h * (np.arange(m) + 0.5) for i, m in enumerate(disc.cell_shape)],
            indexing="ij",
        )
        best = 0.0
        for k in range(1, disc.n_t + 1):
            best = max(best, float(np.max(np.abs(self(centers, (k - 0.5) * disc.tau)))))
        return best


def lift_P(cv):
    return PiecewiseConstantField(cv.disc, cv.values)


def discretize_Q(f, disc, R=np.inf, order=4):
    """Cell Steklov averages of ``f``; constant fields map to their constant bit for bit."""
    return ControlVector(disc, cell_averages(f, disc, order), R)


@dataclass
class CostReport:
    value: float
    contributions: np.ndarray
    disc_label: str = ""

    def as_dict(self):
        return {"I": self.value, "disc": self.disc_label,
                "max_contribution": float(np.max(self.contributions)) if self.contributions.size else 0.0}


def target_on_prisms(gamma_grid, disc):
    return np.asarray(gamma_grid)[tuple(slice(0, m) for m in disc.cell_shape)]


def cost_discrete(state, gamma_grid):
    """``I = sum_A h^d |v_gamma(n) - Gamma_gamma|^2`` with its per-prism terms.

    ``gamma_grid`` may be lattice shaped or already restricted to prisms.
    """
    disc = state.disc
    P = tuple(slice(0, m) for m in disc.cell_shape)
    G = np.asarray(gamma_grid)
    if G.shape == disc.shape:
        G = G[P]
    contrib = disc.h**disc.d * (state.final[P] - G) ** 2
    # fixed-order reduction: flatten C-order, then a plain sum
    value = float(np.sum(contrib.ravel()))
    return CostReport(value, contrib, f"h={disc.h:g},n_t={disc.n_t}")


@dataclass
class ControlProblem:
    """Forward map ``[f] -> I([f])`` on one discretization."""

    coeffs: object
    graph: object
    config: SolverConfig = field(default_factory=SolverConfig)
    gamma: np.ndarray | None = None
    R: float = np.inf
    mollified: object = None

    def __post_init__(self):
        if self.mollified is None:
            self.mollified = mollified_for(self.coeffs.disc, self.graph, self.config)
        if self.gamma is None:
            self.gamma = self.coeffs.gamma

    @property
    def disc(self):
        return self.coeffs.disc

    def solve(self, f, config=None):
        return solve_state(self.coeffs, self.mollified, config or self.config, f=np.asarray(f, dtype=float))

    def cost(self, f, config=None):
        return cost_discrete(self.solve(f, config), self.gamma).value


def cost_continuous_reference(f, data, fine_disc, graph, config=SolverConfig(), order=4):
    """Surrogate of the continuous functional: ``I`` on ``fine_disc`` of ``Q(f)``.

    Returns ``(value, fine_disc)``.
    """
    coeffs = build_coefficient_grid(fine_disc, data, order)
    fq = discretize_Q(f, fine_disc, order=order)
    prob = ControlProblem(coeffs, graph, config)
    return prob.cost(fq.values), fine_disc


def write_control_csv(path, cv, header=None):
    """Write ``g1..gd, k, value`` rows; ``header`` is an optional ``#`` line."""
    d = cv.disc.d
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"g{i + 1}" for i in range(d)] + ["k", "value"])
        for idx in np.ndindex(*cv.values.shape):
            w.writerow(list(idx[:-1]) + [idx[-1] + 1, repr(float(cv.values[idx]))])


def read_control_csv(path, disc, R=np.inf):
    vals = np.full(disc.control_shape, np.nan)
    with open(path, newline="") as fh:
        rows = csv.reader(ln for ln in fh if not ln.startswith("#"))
        next(rows)
        for row in rows:
            *g, k, v = row
            vals[tuple(int(x) for x in g) + (int(k) - 1,)] = float(v)
    if np.any(np.isnan(vals)):
        raise ValueError(f"{path}: control file does not cover every cell")
    return ControlVector(disc, vals, R)

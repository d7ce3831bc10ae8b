"""Space-time lattice on a box, index sets, and Steklov-averaged grid data.

Lattice points are indexed by ``gamma = (k_1, ..., k_d)`` with
``x_gamma = l + k*h``; axis ``i`` has ``N_i = L_i/h + 1`` points.  Prisms and
cells are identified by their natural (lowest) corner, so prism indices run
over ``0..N_i-2`` and cell indices over ``(gamma, k)`` with ``k = 1..n_t``.
Cell arrays store step ``k`` at position ``k-1`` on the last axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import EllipticityError, GridError, StepSizeError

DEFAULT_CELL_ORDER = 4


@dataclass(frozen=True)
class Domain:
    """Box ``prod_i [l_i, u_i]`` times the horizon ``(0, T]``."""

    box: tuple
    T: float

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "T", float(self.T))
        if not box:
            raise GridError("domain needs at least one axis")
        for i, (lo, hi) in enumerate(box):
            if not hi > lo:
                raise GridError(f"axis {i}: upper bound {hi} must exceed lower bound {lo}")
        if not self.T > 0:
            raise GridError("horizon T must be positive")

    @property
    def d(self):
        return len(self.box)

    @property
    def lower(self):
        return np.array([lo for lo, _ in self.box])

    @property
    def upper(self):
        return np.array([hi for _, hi in self.box])

    @property
    def lengths(self):
        return self.upper - self.lower

    @property
    def volume(self):
        return float(np.prod(self.lengths))


@dataclass(frozen=True)
class Discretization:
    domain: Domain
    h: float
    n_t: int
    shape: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "n_t", int(self.n_t))
        if self.h <= 0 or self.n_t < 1:
            raise GridError("need h > 0 and n_t >= 1")
        counts = []
        for i, L in enumerate(self.domain.lengths):
            q = L / self.h
            k = int(round(q))
            if k < 1 or abs(q - k) > 1e-9 * max(1.0, q):
                raise GridError(f"h={self.h:g} does not divide edge {i} of length {L:g}")
            counts.append(k + 1)
        object.__setattr__(self, "shape", tuple(counts))

    @property
    def d(self):
        return self.domain.d

    @property
    def tau(self):
        return self.domain.T / self.n_t

    @property
    def cell_shape(self):
        """Prism counts per axis (``N_i - 1``)."""
        return tuple(n - 1 for n in self.shape)

    @property
    def control_shape(self):
        return self.cell_shape + (self.n_t,)

    @property
    def times(self):
        return self.tau * np.arange(self.n_t + 1)

    def coords(self, axis):
        return self.domain.box[axis][0] + self.h * np.arange(self.shape[axis])

    def mesh(self):
        return np.meshgrid(*[self.coords(i) for i in range(self.d)], indexing="ij")

    @property
    def boundary_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        for i in range(self.d):
            sl = [slice(None)] * self.d
            sl[i] = 0
            mask[tuple(sl)] = True
            sl[i] = -1
            mask[tuple(sl)] = True
        return mask

    @property
    def interior_mask(self):
        return ~self.boundary_mask

    @property
    def core(self):
        """Slice selecting interior lattice points of a lattice-shaped array."""
        return tuple(slice(1, n - 1) for n in self.shape)

    def lattice_indices(self):
        return [tuple(g) for g in np.ndindex(*self.shape)]

    def interior_indices(self):
        return [tuple(int(c) for c in g) for g in np.argwhere(self.interior_mask)]

    def boundary_indices(self):
        return [tuple(int(c) for c in g) for g in np.argwhere(self.boundary_mask)]

    def prism_indices(self):
        """Natural corners of the prisms making up the box (the set ``A``)."""
        return [tuple(g) for g in np.ndindex(*self.cell_shape)]

    def cell_indices(self):
        """Cells ``(gamma, k)`` with ``k = 1..n_t``."""
        return [tuple(g) + (k,) for g in np.ndindex(*self.cell_shape) for k in range(1, self.n_t + 1)]

    def htau_ratio(self, b_sup_sum, slope_floor):
        """Smallest ``h/tau`` admitted by the step-ratio condition."""
        return (1.0 + 2.0 * b_sup_sum) / slope_floor


def build_discretization(domain, h, n_t, b_sup_sum=None, slope_floor=None):
    """Build the lattice and check the step-ratio condition when norms are given.

    ``b_sup_sum`` is ``sum_i ||b_i||_inf`` and ``slope_floor`` the graph's
    lower slope bound.  Violations raise :class:`StepSizeError` with condition
    ``"htau"`` carrying the minimal admissible ``h/tau``.
    """
    disc = Discretization(domain, h, n_t)
    if slope_floor is not None:
        check_htau(disc, b_sup_sum or 0.0, slope_floor)
    return disc


def check_htau(disc, b_sup_sum, slope_floor):
    need = disc.htau_ratio(b_sup_sum, slope_floor)
    have = disc.h / disc.tau
    if have < need * (1.0 - 1e-12):
        raise StepSizeError(
            "htau",
            f"h/tau = {have:.6g} is below the minimal admissible ratio {need:.6g}",
            min_ratio=need,
        )
    return need


@lru_cache(maxsize=None)
def _gauss01(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _as_field(g):
    if callable(g):
        return g
    value = float(g)
    return lambda x, t=None: np.full(np.shape(x[0]), value)


def _weighted_mean(vals, weights, axes):
    """Mean over quadrature axes, shifted by the first sample of each cell.

    Subtracting the reference sample makes the average of a cellwise constant
    field reproduce that constant bit for bit.
    """
    ref = vals[tuple(slice(None) if a not in axes else slice(0, 1) for a in range(vals.ndim))]
    out = vals - ref
    for a in sorted(axes, reverse=True):
        out = np.tensordot(out, weights, axes=([a], [0]))
    return np.squeeze(ref, axis=tuple(axes)) + out


def _axis_nodes(lo, h, count, order, clip):
    x, _ = _gauss01(order)
    pts = lo + h * (np.arange(count)[:, None] + x[None, :])
    return np.clip(pts, *clip).ravel()


def prism_averages(phi, disc, order=DEFAULT_CELL_ORDER, counts=None, return_sup=False):
    """Steklov averages of a spatial field over prisms ``[x_gamma, x_gamma + h]^d``.

    By default every lattice point gets a value (prisms on the upper faces
    stick out of the box; the field is extended by clamping).
    """
    phi = _as_field(phi)
    d = disc.d
    counts = tuple(disc.shape if counts is None else counts)
    _, w = _gauss01(order)
    axes = [
        _axis_nodes(disc.domain.box[i][0], disc.h, counts[i], order, disc.domain.box[i])
        for i in range(d)
    ]
    X = np.meshgrid(*axes, indexing="ij")
    vals = np.asarray(phi(X), dtype=float) * np.ones(X[0].shape)
    shaped = vals.reshape(sum(((c, order) for c in counts), ()))
    mean = _weighted_mean(shaped, w, axes=tuple(2 * i + 1 for i in range(d)))
    if return_sup:
        return mean, float(np.max(np.abs(vals)))
    return mean


def cell_averages(g, disc, order=DEFAULT_CELL_ORDER, return_sup=False):
    """Steklov averages of a space-time field over all cells ``C^alpha``.

    Returns an array of shape ``cell_shape + (n_t,)``.
    """
    g = _as_field(g)
    d = disc.d
    M = disc.cell_shape
    x, w = _gauss01(order)
    axes = [
        _axis_nodes(disc.domain.box[i][0], disc.h, M[i], order, disc.domain.box[i])
        for i in range(d)
    ]
    X = np.meshgrid(*axes, indexing="ij")
    out = np.empty(M + (disc.n_t,))
    sup = 0.0
    for k in range(1, disc.n_t + 1):
        ts = np.clip((k - 1 + x) * disc.tau, 0.0, disc.domain.T)
        slab = np.empty(X[0].shape + (order,))
        for q, t in enumerate(ts):
            slab[..., q] = np.asarray(g(X, t), dtype=float) * np.ones(X[0].shape)
        sup = max(sup, float(np.max(np.abs(slab))))
        shaped = slab.reshape(sum(((c, order) for c in M), ()) + (order,))
        qaxes = tuple(2 * i + 1 for i in range(d)) + (2 * d,)
        out[..., k - 1] = _weighted_mean(shaped, w, axes=qaxes)
    if return_sup:
        return out, sup
    return out


def steklov_average_prism(phi, disc, gamma, order=DEFAULT_CELL_ORDER):
    """Mean of ``phi`` over the single prism with natural corner ``gamma``."""
    phi = _as_field(phi)
    x, w = _gauss01(order)
    lo = disc.domain.lower + disc.h * np.asarray(gamma, dtype=float)
    grids = np.meshgrid(*[lo[i] + disc.h * x for i in range(disc.d)], indexing="ij")
    grids = [np.clip(g, *disc.domain.box[i]) for i, g in enumerate(grids)]
    W = np.ones(())
    for _ in range(disc.d):
        W = np.multiply.outer(W, w)
    return float(np.sum(W * phi(grids)))


def steklov_average_cell(g, disc, alpha, order=DEFAULT_CELL_ORDER):
    """Mean of ``g`` over the single cell ``alpha = (gamma, k)``."""
    g = _as_field(g)
    *gamma, k = alpha
    x, w = _gauss01(order)
    total = 0.0
    for q in range(order):
        t = min(max((k - 1 + x[q]) * disc.tau, 0.0), disc.domain.T)
        total += w[q] * steklov_average_prism(lambda X: g(X, t), disc, gamma, order)
    return total


@dataclass
class ProblemData:
    """Coefficients and data of the singular parabolic problem.

    Every entry is a constant or a vectorized callable: space-time fields take
    ``(x, t)`` with ``x`` a sequence of coordinate arrays, spatial fields take
    ``x`` only.  ``a``, ``b``, ``c`` hold one entry per axis.
    """

    domain: Domain
    a: Sequence = (1.0,)
    b: Sequence = (0.0,)
    c: Sequence = (0.0,)
    r: object = 0.0
    f: object = 0.0
    phi: object = 0.0
    gamma: object = 0.0
    a0: float | None = None

    def __post_init__(self):
        d = self.domain.d
        for name in ("a", "b", "c"):
            seq = getattr(self, name)
            if not isinstance(seq, (list, tuple)):
                seq = (seq,) * d
            if len(seq) == 1 and d > 1:
                seq = tuple(seq) * d
            if len(seq) != d:
                raise GridError(f"coefficient {name} needs {d} components, got {len(seq)}")
            setattr(self, name, tuple(seq))


@dataclass
class CoefficientGrid:
    """Steklov averages of all problem data on one discretization.

    ``a``, ``b``, ``c`` have shape ``(d,) + cell_shape + (n_t,)``; ``r`` and
    ``f`` have shape ``cell_shape + (n_t,)``; ``phi`` and ``gamma`` are
    lattice shaped.  ``sup`` holds sampled sup-norms of the raw data.
    """

    disc: Discretization
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    r: np.ndarray
    f: np.ndarray
    phi: np.ndarray
    gamma: np.ndarray
    sup: dict = field(default_factory=dict)

    @property
    def b_sup_sum(self):
        return float(np.sum(self.sup.get("b", np.max(np.abs(self.b), axis=tuple(range(1, self.b.ndim))))))

    def b_dx_sup(self):
        """Per-axis max of the backward difference quotient of ``b_i`` averages."""
        out = []
        for i in range(self.disc.d):
            bi = self.b[i]
            if bi.shape[i] < 2:
                out.append(0.0)
                continue
            out.append(float(np.max(np.abs(np.diff(bi, axis=i))) / self.disc.h))
        return np.array(out)

    def with_control(self, f):
        return CoefficientGrid(
            self.disc, self.a, self.b, self.c, self.r, np.asarray(f, dtype=float),
            self.phi, self.gamma, dict(self.sup),
        )


def build_coefficient_grid(disc, data, order=DEFAULT_CELL_ORDER):
    """Average every coefficient over cells/prisms and check ellipticity."""
    sup = {}
    a, sa = zip(*(cell_averages(ai, disc, order, return_sup=True) for ai in data.a))
    b, sb = zip(*(cell_averages(bi, disc, order, return_sup=True) for bi in data.b))
    c, sc = zip(*(cell_averages(ci, disc, order, return_sup=True) for ci in data.c))
    r, sup["r"] = cell_averages(data.r, disc, order, return_sup=True)
    f, sup["f"] = cell_averages(data.f, disc, order, return_sup=True)
    phi, sup["phi"] = prism_averages(data.phi, disc, order, return_sup=True)
    gamma = prism_averages(data.gamma, disc, order)
    sup["a"], sup["b"], sup["c"] = np.array(sa), np.array(sb), np.array(sc)
    a = np.stack(a)
    a0 = data.a0
    if a0 is not None:
        low = a < a0
        if np.any(low):
            idx = tuple(int(i) for i in np.argwhere(low)[0])
            raise EllipticityError(
                f"averaged a_{idx[0] + 1} = {a[idx]:.6g} below a0 = {a0:.6g} at cell {idx[1:]}",
                index=idx,
            )
    return CoefficientGrid(disc, a, np.stack(b), np.stack(c), r, f, phi, gamma, sup)


def discrete_gradient_energy(values, disc):
    """``sum_A h^d sum_i |forward x_i difference|^2`` of a lattice array."""
    h = disc.h
    total = 0.0
    prisms = tuple(slice(0, m) for m in disc.cell_shape)
    for i in range(disc.d):
        diff = np.diff(values, axis=i) / h
        sl = list(prisms)
        diff = diff[tuple(sl)]
        total += float(np.sum(diff * diff))
    return h**disc.d * total


def dump_grid_csv(path, disc, arrays):
    """Write cell-indexed arrays as CSV rows of (indices..., values...)."""
    names = list(arrays)
    shape = np.shape(arrays[names[0]])
    with open(path, "w") as fh:
        idx_names = [f"i{j + 1}" for j in range(len(shape))]
        fh.write(",".join(idx_names + names) + "\n")
        for idx in np.ndindex(*shape):
            vals = [repr(float(np.asarray(arrays[n])[idx])) for n in names]
            fh.write(",".join([str(i) for i in idx] + vals) + "\n")

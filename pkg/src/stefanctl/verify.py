"""Checks of the discrete estimates, independent oracles and refinement studies."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize, special

from .graph import Branch, MonotoneGraph, identity_graph, two_phase_graph
from .grid import (
    Discretization, Domain, ProblemData, build_coefficient_grid, check_htau,
)
from .interpolants import (
    discrete_norms, energy_left, interface_position, l2_error, l2_norm_exact,
)
from .control import cost_continuous_reference, cost_discrete, discretize_Q
from .solver import SolverConfig, initial_values, mollified_for, solve_state, solve_timestep


@dataclass
class BoundReport:
    name: str
    left: float
    right: float
    slack: float = 0.0
    descriptor: dict = field(default_factory=dict)
    seed: int | None = None

    @property
    def margin(self):
        return self.right - self.left

    @property
    def passed(self):
        return bool(self.left <= self.right * (1.0 + self.slack))

    def as_dict(self):
        out = asdict(self)
        out["margin"] = self.margin
        out["passed"] = self.passed
        return out


def max_principle_lambda(coeffs, bbar):
    """``lambda = (2/bbar)(1 + sum_i ||b_{i,x_i}|| + ||r||)`` from the averaged coefficients."""
    r_sup = max(float(np.max(np.abs(coeffs.r))), float(coeffs.sup.get("r", 0.0)))
    return 2.0 / bbar * (1.0 + float(np.sum(coeffs.b_dx_sup())) + r_sup)


def check_max_principle(state, coeffs, bbar, f=None, phi_sup=None, seed=None, descriptor=None):
    """Discrete maximum principle ``||v|| <= e^{lambda T} max(||f||, ||Phi||)``."""
    disc = state.disc
    f = coeffs.f if f is None else np.asarray(f)
    lam = max_principle_lambda(coeffs, bbar)
    phi_sup = max(float(coeffs.sup.get("phi", 0.0)), float(np.max(np.abs(coeffs.phi)))) if phi_sup is None else phi_sup
    f_sup = float(np.max(np.abs(f))) if f.size else 0.0
    T = disc.tau * state.steps_done
    right = math.exp(lam * T) * max(f_sup, phi_sup)
    left = float(np.max(np.abs(state.values[: state.steps_done + 1])))
    desc = dict(descriptor or {})
    desc.update({"lambda": lam, "T": T, "f_sup": f_sup, "phi_sup": phi_sup, "lambda_tau": lam * disc.tau})
    return BoundReport("max_principle", left, right, 0.0, desc, seed)


def phi_gradient_l2_sq(phi, domain, order=6, cells=64, step=1e-6):
    """``||D Phi||^2_{L2}`` by composite Gauss-Legendre of central differences."""
    if not callable(phi):
        return 0.0
    d = domain.d
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = 0.5 * (x + 1), 0.5 * w
    axes, weights = [], []
    for lo, hi in domain.box:
        H = (hi - lo) / cells
        axes.append((lo + H * (np.arange(cells)[:, None] + x[None, :])).ravel())
        weights.append(np.tile(w * H, cells))
    X = np.meshgrid(*axes, indexing="ij")
    W = weights[0]
    for wi in weights[1:]:
        W = np.multiply.outer(W, wi)
    total = 0.0
    for i in range(d):
        Xp = [xx + (step if j == i else 0.0) for j, xx in enumerate(X)]
        Xm = [xx - (step if j == i else 0.0) for j, xx in enumerate(X)]
        g = (phi(Xp) - phi(Xm)) / (2 * step)
        total += float(np.sum(W * g * g))
    return total


def energy_data(coeffs, phi, f=None):
    """Data functional ``||Phi||^2_inf + ||D Phi||^2_2 + ||f||^2_inf``."""
    f = coeffs.f if f is None else np.asarray(f)
    phi_sup = max(float(coeffs.sup.get("phi", 0.0)), float(np.max(np.abs(coeffs.phi))))
    f_sup = float(np.max(np.abs(f))) if f.size else 0.0
    return phi_sup**2 + phi_gradient_l2_sq(phi, coeffs.disc.domain) + f_sup**2


def check_energy(state, coeffs, phi, f=None, reference=None, slack=0.1, descriptor=None):
    """Energy estimate as an implied constant ``left/data``.

    With ``reference`` (the running maximum over coarser levels) the report
    passes when the constant stays within ``1 + slack`` of it.
    """
    left = energy_left(discrete_norms(state))
    data = energy_data(coeffs, phi, f)
    const = left / data if data > 0 else 0.0
    desc = dict(descriptor or {})
    desc.update({"left": left, "data": data, "h": state.disc.h, "tau": state.disc.tau})
    ref = const if reference is None else reference
    return BoundReport("energy_constant", const, ref, slack, desc)


def energy_chain(constants, slack=0.1):
    """Each level's implied constant must stay within ``1+slack`` of the running max so far."""
    reports = []
    running = None
    for c in constants:
        reports.append(BoundReport("energy_constant", c, c if running is None else running, slack))
        running = c if running is None else max(running, c)
    return reports


# ---------------------------------------------------------------- random instances


def random_graph(rng, max_breaks=2):
    """Random piecewise-linear monotone graph with up to ``max_breaks`` jumps."""
    bbar = float(rng.uniform(0.5, 2.0))
    m = int(rng.integers(0, max_breaks + 1))
    bps = np.sort(rng.uniform(-0.8, 0.8, size=m))
    while m > 1 and np.min(np.diff(bps)) < 0.1:
        bps = np.sort(rng.uniform(-0.8, 0.8, size=m))
    jumps = rng.uniform(0.2, 2.0, size=m)
    knots = np.sort(rng.uniform(-1.5, 1.5, size=int(rng.integers(0, 4))))
    knots = knots[np.min(np.abs(knots[:, None] - bps[None, :]), axis=1) > 1e-3] if m and knots.size else knots
    slopes = bbar * (1.0 + rng.uniform(0.0, 2.0, size=knots.size + 1))
    slopes[int(rng.integers(0, slopes.size))] = bbar

    def B(y):
        y = np.asarray(y, dtype=float)
        out = slopes[0] * y
        for t, ds in zip(knots, np.diff(slopes)):
            out = out + ds * np.maximum(y - t, 0.0)
        return out

    edges = [-np.inf, *bps, np.inf]
    branches = []
    for j in range(m + 1):
        lo, hi = edges[j], edges[j + 1]
        inner = [t for t in knots if lo < t < hi]
        left = lo if np.isfinite(lo) else min([*inner, *(bps[:1] if m else [0.0])]) - 1.0
        right = hi if np.isfinite(hi) else max([*inner, *(bps[-1:] if m else [0.0])]) + 1.0
        pts = [left, *inner, right]
        pts = sorted(set(pts))
        branches.append(Branch(pts, B(np.array(pts))))
    return MonotoneGraph(tuple(bps), tuple(jumps), tuple(branches), bbar)


def _smooth_field(rng, d, amp, spatial=False):
    k = rng.integers(1, 4, size=d)
    ph = rng.uniform(0, 2 * np.pi, size=d)
    om = rng.uniform(0, 3.0)
    c0 = rng.uniform(-1, 1)

    if spatial:
        def fn(x):
            out = np.full(np.shape(x[0]), c0 * amp * 0.5)
            prod = amp * np.ones(np.shape(x[0]))
            for i in range(d):
                prod = prod * np.sin(k[i] * np.pi * x[i] + ph[i])
            return out + prod
    else:
        def fn(x, t):
            prod = amp * np.cos(om * t) * np.ones(np.shape(x[0]))
            for i in range(d):
                prod = prod * np.sin(k[i] * np.pi * x[i] + ph[i])
            return c0 * amp * 0.5 + prod
    return fn


@dataclass
class RandomInstance:
    data: ProblemData
    disc: Discretization
    graph: MonotoneGraph
    seed: int
    descriptor: dict
    coeffs: object = None


def random_instance(seed, d=None, h=None, n_t=None, two_phase_1d=False):
    """Seeded random problem satisfying the step-size preconditions of the scheme.

    With ``two_phase_1d`` the graph is the standard two-phase graph and the
    source is random, bounded and nonzero.
    """
    rng = np.random.default_rng(seed)
    if two_phase_1d:
        d = 1
    d = int(rng.integers(1, 3)) if d is None else d
    if h is None:
        h = float(rng.choice([1 / 8, 1 / 16, 1 / 32])) if d == 1 else float(rng.choice([1 / 4, 1 / 8]))
    N = int(round(1.0 / h))
    if n_t is None:
        n_t = int(rng.integers(4, 17))
    if two_phase_1d:
        c_s, c_l = rng.uniform(0.5, 2.0, size=2)
        graph = two_phase_graph(float(rng.uniform(-0.3, 0.3)), float(rng.uniform(0.3, 2.0)), float(c_s), float(c_l))
    else:
        graph = random_graph(rng)
    bbar = graph.slope_floor
    a0 = float(rng.uniform(0.5, 1.5))
    small = 0.0 if two_phase_1d else 0.3
    a = tuple(
        (lambda f, a0=a0: (lambda x, t: a0 + 0.25 * a0 * (1 + f(x, t))))(_smooth_field(rng, d, 1.0)) for _ in range(d)
    )
    b = tuple(_smooth_field(rng, d, small * float(rng.uniform(0, 1))) for _ in range(d))
    c = tuple(_smooth_field(rng, d, small * float(rng.uniform(0, 1))) for _ in range(d))
    r = _smooth_field(rng, d, small * float(rng.uniform(0, 1)))
    f = _smooth_field(rng, d, float(rng.uniform(0.5, 5.0)))
    phi = _smooth_field(rng, d, float(rng.uniform(0.0, 1.5)), spatial=True)
    # tau = s h^2 keeps the iteration cheap; halve it until the step-ratio
    # condition and lambda*tau < 1/2 hold for the averaged coefficients
    tau = float(rng.uniform(1.0, 4.0)) * h * h
    for _ in range(40):
        domain = Domain(((0.0, N * h),) * d, n_t * tau)
        data = ProblemData(domain, a, b, c, r, f, phi, 0.0, a0=a0 * 0.25)
        disc = Discretization(domain, h, n_t)
        coeffs = build_coefficient_grid(disc, data)
        ok_ratio = h / tau >= (1 + 2 * coeffs.b_sup_sum) / bbar
        if ok_ratio and max_principle_lambda(coeffs, bbar) * tau < 0.5:
            break
        tau *= 0.5
    desc = {"d": d, "h": h, "n_t": n_t, "tau": disc.tau, "breakpoints": list(graph.breakpoints),
            "jumps": list(graph.jumps), "bbar": bbar}
    return RandomInstance(data, disc, graph, seed, desc, coeffs)


def prepare(inst, config=SolverConfig()):
    coeffs = inst.coeffs if inst.coeffs is not None else build_coefficient_grid(inst.disc, inst.data)
    check_htau(inst.disc, coeffs.b_sup_sum, inst.graph.slope_floor)
    mg = mollified_for(inst.disc, inst.graph, config)
    return coeffs, mg


# ---------------------------------------------------------------- global Newton oracle


def newton_timestep_oracle(prev, coeffs, mg, k, f=None, tol=1e-14, max_iter=100):
    """Solve one implicit step as a single dense nonlinear system by damped Newton.

    The system is assembled node by node from the averaged coefficients; the
    Jacobian is ``A diag(b_n'(v)) + L`` and steps are halved until the residual
    norm decreases.
    """
    disc = coeffs.disc
    h, d = disc.h, disc.d
    A = h * h / disc.tau
    f = coeffs.f if f is None else np.asarray(f)
    interior = disc.interior_indices()
    pos = {g: j for j, g in enumerate(interior)}
    n = len(interior)
    L = np.zeros((n, n))
    src = np.zeros(n)
    for j, g in enumerate(interior):
        cell = g + (k - 1,)
        for i in range(d):
            back = tuple(gg - (1 if q == i else 0) for q, gg in enumerate(g)) + (k - 1,)
            a_h, a_b = coeffs.a[i][cell], coeffs.a[i][back]
            L[j, j] += a_h + a_b - h * coeffs.b[i][cell] - h * coeffs.c[i][cell]
            for sgn, coef in ((1, a_h - h * coeffs.c[i][cell]), (-1, a_b - h * coeffs.b[i][back])):
                nb = tuple(gg + (sgn if q == i else 0) for q, gg in enumerate(g))
                if nb in pos:
                    L[j, pos[nb]] -= coef
        L[j, j] += h * h * coeffs.r[cell]
        src[j] = h * h * f[cell]
    vprev = np.array([prev[g] for g in interior])
    base = A * mg.value(vprev) + src

    def F(v):
        return A * mg.value(v) + L @ v - base

    v = vprev.copy()
    r = F(v)
    for _ in range(max_iter):
        nr = float(np.max(np.abs(r))) if n else 0.0
        if nr <= tol * (1.0 + float(np.max(np.abs(base)))) if n else True:
            break
        J = L + np.diag(A * mg.derivative(v))
        dv = np.linalg.solve(J, -r)
        lam = 1.0
        while lam > 1e-10:
            trial = v + lam * dv
            rt = F(trial)
            if np.linalg.norm(rt) < np.linalg.norm(r):
                break
            lam *= 0.5
        if lam <= 1e-10:
            break
        v, r = trial, rt
    out = np.zeros(disc.shape)
    for j, g in enumerate(interior):
        out[g] = v[j]
    return out


# ---------------------------------------------------------------- Neumann similarity solution


@dataclass(frozen=True)
class NeumannParams:
    """Two-phase melting on the line: liquid on the left at ``v_liquid > 0``."""

    conductivity: float = 1.0
    c_liquid: float = 1.0
    c_solid: float = 1.0
    latent: float = 1.0
    v_liquid: float = 1.0
    v_solid: float = -1.0


def _neumann_residual(lam, p):
    k = p.conductivity
    kl, ks = k / p.c_liquid, k / p.c_solid
    liq = k * p.v_liquid * math.exp(-lam * lam / kl) / (math.sqrt(math.pi * kl) * special.erfc(-lam / math.sqrt(kl)))
    sol = k * p.v_solid * math.exp(-lam * lam / ks) / (math.sqrt(math.pi * ks) * special.erfc(lam / math.sqrt(ks)))
    return liq + sol - p.latent * lam


def neumann_lambda(p, tol=1e-12):
    """Root of the interface equation (the residual is strictly decreasing in ``lambda``)."""
    if p.latent <= 0 or p.conductivity <= 0 or p.c_liquid <= 0 or p.c_solid <= 0:
        raise ValueError("latent heat, conductivity and heat capacities must be positive")
    if p.v_liquid < 0 or p.v_solid > 0:
        raise ValueError("need v_liquid >= 0 >= v_solid for a melting front")
    lo, hi = -1.0, 1.0
    while _neumann_residual(lo, p) < 0:
        lo *= 2
        if lo < -1e3:
            raise ValueError("no root bracket found for the interface equation")
    while _neumann_residual(hi, p) > 0:
        hi *= 2
        if hi > 1e3:
            raise ValueError("no root bracket found for the interface equation")
    return optimize.brentq(_neumann_residual, lo, hi, args=(p,), xtol=tol, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class NeumannSolution:
    params: NeumannParams
    lam: float

    def interface(self, t):
        return 2.0 * self.lam * np.sqrt(t)

    def __call__(self, x, t):
        p, lam = self.params, self.lam
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        kl = p.conductivity / p.c_liquid
        ks = p.conductivity / p.c_solid
        eta = x / (2.0 * np.sqrt(t))
        liq = p.v_liquid - p.v_liquid * special.erfc(-eta / np.sqrt(kl)) / special.erfc(-lam / np.sqrt(kl))
        sol = p.v_solid - p.v_solid * special.erfc(eta / np.sqrt(ks)) / special.erfc(lam / np.sqrt(ks))
        return np.where(eta < lam, liq, sol)

    def dx(self, x, t):
        p, lam = self.params, self.lam
        x = np.asarray(x, dtype=float)
        kl = p.conductivity / p.c_liquid
        ks = p.conductivity / p.c_solid
        eta = x / (2.0 * np.sqrt(t))
        g = 1.0 / (np.sqrt(np.pi * t))
        liq = -p.v_liquid * g * np.exp(-eta**2 / kl) / (np.sqrt(kl) * special.erfc(-lam / np.sqrt(kl)))
        sol = p.v_solid * g * np.exp(-eta**2 / ks) / (np.sqrt(ks) * special.erfc(lam / np.sqrt(ks)))
        return np.where(eta < lam, liq, sol)

    def graph(self):
        return two_phase_graph(0.0, self.params.latent, self.params.c_solid, self.params.c_liquid)


def neumann_oracle(params=NeumannParams()):
    """Classical similarity solution; interface ``s(t) = 2 lambda sqrt(t)``."""
    return NeumannSolution(params, neumann_lambda(params))


def _smoothstep(z):
    z = np.clip(z, 0.0, 1.0)
    return z**3 * (10 - 15 * z + 6 * z * z)


def _cutoff(x, inner, outer):
    """1 on ``|x| <= inner``, 0 at ``|x| >= outer``, quintic in between; with two derivatives."""
    w = outer - inner
    z = (outer - np.abs(x)) / w
    zc = np.clip(z, 0.0, 1.0)
    chi = _smoothstep(zc)
    ds = 30 * zc**2 * (1 - zc) ** 2
    d2s = 60 * zc * (1 - zc) * (1 - 2 * zc)
    band = (z > 0) & (z < 1)
    sgn = np.sign(x)
    chi_x = np.where(band, -sgn * ds / w, 0.0)
    chi_xx = np.where(band, d2s / w**2, 0.0)
    return chi, chi_x, chi_xx


@dataclass(frozen=True)
class StefanStudySetup:
    """Cut-off Neumann solution on ``[-outer, outer]`` with a compensating source.

    Inside ``|x| <= inner`` the exact solution is the similarity solution
    shifted in time by ``t0``; the cut-off makes the boundary values vanish
    and the source ``-k (2 chi' v_x + chi'' v)`` keeps it an exact solution.
    """

    params: NeumannParams = NeumannParams(v_liquid=1.0, v_solid=-0.5)
    inner: float = 1.0
    outer: float = 2.0
    t0: float = 0.25
    T: float = 0.25

    def oracle(self):
        return neumann_oracle(self.params)

    def exact(self):
        sol = self.oracle()

        def v(x, t):
            X = x[0] if isinstance(x, (list, tuple)) else x
            chi, _, _ = _cutoff(X, self.inner, self.outer)
            return chi * sol(X, t + self.t0)
        return v

    def problem(self):
        sol = self.oracle()
        k = self.params.conductivity
        inner, outer, t0 = self.inner, self.outer, self.t0

        def f(x, t):
            X = x[0]
            _, cx, cxx = _cutoff(X, inner, outer)
            return -k * (2 * cx * sol.dx(X, t + t0) + cxx * sol(X, t + t0))

        def phi(x):
            X = x[0]
            chi, _, _ = _cutoff(X, inner, outer)
            return chi * sol(X, t0)

        domain = Domain(((-outer, outer),), self.T)
        if abs(sol.interface(self.T + t0)) >= inner:
            raise ValueError("interface leaves the region where the cut-off is 1")
        return ProblemData(domain, a=(k,), f=f, phi=phi), sol.graph()


def _run_chain(fn, chain, workers):
    if workers <= 1:
        return [fn(c) for c in chain]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, chain))


def _with_ratios(rows, key):
    for j, row in enumerate(rows):
        if j == 0:
            row[f"{key}_ratio"] = None
            row[f"{key}_order"] = None
        else:
            prev = rows[j - 1]
            ratio = prev[key] / row[key] if row[key] > 0 else math.inf
            row[f"{key}_ratio"] = ratio
            if prev["h"] == row["h"]:
                row[f"{key}_order"] = None  # time-only refinement has no spatial order
            else:
                row[f"{key}_order"] = math.log(ratio) / math.log(prev["h"] / row["h"]) if row[key] > 0 else math.inf
    return rows


def sine_product_case(d):
    """``v = t prod sin(pi x_i)`` with identity graph and unit diffusion on the unit box."""
    def exact(x, t):
        out = t * np.ones(np.shape(x[0]))
        for i in range(d):
            out = out * np.sin(np.pi * x[i])
        return out

    def source(x, t):
        s = np.ones(np.shape(x[0]))
        for i in range(d):
            s = s * np.sin(np.pi * x[i])
        return s * (1.0 + d * np.pi**2 * t)

    def build(T=1.0):
        return ProblemData(Domain(((0.0, 1.0),) * d, T), a=(1.0,) * d, f=source, phi=0.0)

    return exact, build


def manufactured_solution_study(exact, build, chain, graph=None, config=SolverConfig(), workers=1):
    """Refinement table of ``||V' - v||_{L2(D)}`` over ``chain = [(h, n_t), ...]``."""
    graph = identity_graph() if graph is None else graph

    def run(entry):
        h, n_t = entry
        data = build()
        disc = Discretization(data.domain, h, n_t)
        coeffs = build_coefficient_grid(disc, data)
        mg = mollified_for(disc, graph, config)
        state = solve_state(coeffs, mg, config)
        err = l2_error(state, exact)
        return {"h": h, "tau": disc.tau, "n_t": n_t, "error": err,
                "sweeps": int(sum(dg.iterations for dg in state.diagnostics)), "state": state}

    rows = _run_chain(run, chain, workers)
    return _with_ratios(rows, "error")


def stefan_convergence_study(setup, chain, config=SolverConfig(), workers=1):
    """Enthalpy-scheme errors against the cut-off Neumann solution over ``chain``."""
    data, graph = setup.problem()
    exact = setup.exact()
    sol = setup.oracle()
    s_T = float(sol.interface(setup.T + setup.t0))

    def run(entry):
        h, n_t = entry
        disc = Discretization(data.domain, h, n_t)
        coeffs = build_coefficient_grid(disc, data)
        check_htau(disc, coeffs.b_sup_sum, graph.slope_floor)
        mg = mollified_for(disc, graph, config)
        state = solve_state(coeffs, mg, config)
        err = l2_error(state, exact)
        norm = l2_norm_exact(disc, exact)
        s_num = interface_position(state)
        return {"h": h, "tau": disc.tau, "n_t": n_t, "n": mg.n, "error": err, "relative": err / norm,
                "interface": s_num, "interface_error": abs(s_num - s_T), "state": state}

    rows = _run_chain(run, chain, workers)
    _with_ratios(rows, "error")
    return _with_ratios(rows, "interface_error")


def functional_trend_study(data, graph, f, chain, fine, config=SolverConfig(), workers=1):
    """``|I_Delta(Q f) - J(f)|`` over ``chain`` with ``J`` the cost on the ``fine`` level."""
    fine_disc = Discretization(data.domain, *fine)
    J, _ = cost_continuous_reference(f, data, fine_disc, graph, config)

    def run(entry):
        h, n_t = entry
        disc = Discretization(data.domain, h, n_t)
        coeffs = build_coefficient_grid(disc, data)
        check_htau(disc, coeffs.b_sup_sum, graph.slope_floor)
        mg = mollified_for(disc, graph, config)
        state = solve_state(coeffs, mg, config, f=discretize_Q(f, disc).values)
        I = cost_discrete(state, coeffs.gamma).value
        return {"h": h, "tau": disc.tau, "n_t": n_t, "I": I, "J": J, "gap": abs(I - J)}

    rows = _run_chain(run, chain, workers)
    return _with_ratios(rows, "gap")


def random_max_principle_sweep(count, seed=0, workers=1, config=SolverConfig()):
    """Max-principle reports for ``count`` random instances seeded ``seed, seed+1, ...``."""
    def run(i):
        inst = random_instance(seed + i)
        coeffs, mg = prepare(inst, config)
        state = solve_state(coeffs, mg, config)
        return check_max_principle(state, coeffs, inst.graph.slope_floor, seed=seed + i,
                                   descriptor=inst.descriptor)

    return _run_chain(run, range(count), workers)


def newton_oracle_sweep(count, seed=0, workers=1, config=SolverConfig(), max_nodes=33, max_steps=16):
    """Compare every time step of random 1-D two-phase runs with the dense Newton oracle.

    Each row records the largest l_inf gap to the oracle, the contraction
    factor and the largest measured update ratio over all iterations.
    """
    def run(i):
        rng = np.random.default_rng(seed + i)
        h = float(rng.choice([h for h in (1 / 8, 1 / 16, 1 / 32) if round(1 / h) + 1 <= max_nodes]))
        n_t = int(rng.integers(4, max_steps + 1))
        inst = random_instance(seed + i, d=1, h=h, n_t=n_t, two_phase_1d=True)
        coeffs, mg = prepare(inst, config)
        v = initial_values(coeffs)
        err, worst_ratio, delta, sweeps = 0.0, 0.0, 0.0, 0
        for k in range(1, inst.disc.n_t + 1):
            new, diag = solve_timestep(v, coeffs, mg, k, config)
            ref = newton_timestep_oracle(v, coeffs, mg, k)
            err = max(err, float(np.max(np.abs(new - ref))))
            if diag.ratios:
                worst_ratio = max(worst_ratio, max(diag.ratios))
            delta = max(delta, diag.delta)
            sweeps += diag.iterations
            v = new
        return {"seed": seed + i, "nodes": inst.disc.shape[0], "steps": inst.disc.n_t, "max_error": err,
                "delta": delta, "max_ratio": worst_ratio, "sweeps": sweeps}

    return _run_chain(run, range(count), workers)


def write_table_csv(path, rows, columns=None, header=None):
    columns = columns or [k for k in rows[0] if k != "state"]
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(["" if row.get(c) is None else repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])

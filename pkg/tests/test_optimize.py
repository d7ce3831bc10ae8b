import numpy as np
import pytest

from stefanctl.control import ControlProblem, cost_discrete
from stefanctl.graph import identity_graph, two_phase_graph
from stefanctl.grid import Discretization, Domain, ProblemData, build_coefficient_grid
from stefanctl.optimize import OptimizerConfig, epsilon_certificate, fd_gradient, projected_descent
from stefanctl.solver import SolverConfig


def make_problem(graph=None, h=0.25, n_t=2, T=0.25, R=2.0, tol=1e-13):
    dom = Domain(((0.0, 1.0),), T)
    disc = Discretization(dom, h, n_t)
    data = ProblemData(dom, phi=lambda x: 0.5 * np.sin(np.pi * x[0]) - 0.2,
                       gamma=lambda x: 0.3 * np.sin(np.pi * x[0]))
    coeffs = build_coefficient_grid(disc, data)
    cfg = SolverConfig(tol_fp=tol)
    return ControlProblem(coeffs, graph or identity_graph(), cfg, R=R)


def test_fd_gradient_matches_linear_sensitivity(rng):
    prob = make_problem()
    disc = prob.disc
    shape = disc.control_shape
    P = tuple(slice(0, m) for m in disc.cell_shape)
    base = prob.solve(np.zeros(shape)).final[P]
    # the identity graph makes the final state affine in f: assemble its Jacobian column by column
    J = np.empty((base.size, int(np.prod(shape))))
    for j in range(J.shape[1]):
        e = np.zeros(J.shape[1])
        e[j] = 1.0
        J[:, j] = (prob.solve(e.reshape(shape)).final[P] - base).ravel()
    f = rng.uniform(-1, 1, size=shape)
    vf = base.ravel() + J @ f.ravel()
    oracle = 2 * disc.h * J.T @ (vf - prob.gamma[P].ravel())
    g = fd_gradient(prob, f, 1e-3)
    np.testing.assert_allclose(g.ravel(), oracle, rtol=1e-6, atol=1e-9)


def test_fd_gradient_worker_independent(rng):
    prob = make_problem(graph=two_phase_graph(0.0, 1.0, 1.0, 1.0))
    f = rng.uniform(-1, 1, size=prob.disc.control_shape)
    np.testing.assert_array_equal(fd_gradient(prob, f, 1e-4, workers=1), fd_gradient(prob, f, 1e-4, workers=4))


def test_zero_radius_returns_zero_control():
    prob = make_problem()
    cv, trace = projected_descent(prob, OptimizerConfig(R=0.0))
    assert np.all(cv.values == 0.0)
    assert trace.history == [prob.cost(np.zeros(prob.disc.control_shape))]
    assert trace.certified


def test_start_at_known_optimum_stays_put():
    prob = make_problem()
    shape = prob.disc.control_shape
    fstar = 0.5 * np.ones(shape)
    state = prob.solve(fstar)
    prob.gamma = state.final.copy()
    cv, trace = projected_descent(prob, OptimizerConfig(R=2.0, max_iter=5), f0=fstar)
    assert trace.history[0] == pytest.approx(0.0, abs=1e-24)
    assert cost_discrete(prob.solve(cv.values), prob.gamma).value <= 1e-20
    assert cv.linf <= 2.0


def test_descent_is_feasible_and_monotone():
    prob = make_problem(graph=two_phase_graph(0.0, 1.0, 1.0, 1.0), R=0.5, tol=1e-10)
    cv, trace = projected_descent(prob, OptimizerConfig(R=0.5, max_iter=4, step_tol=1e-4))
    assert cv.feasible()
    h = trace.history
    assert all(b <= a for a, b in zip(h, h[1:]))
    assert h[-1] < h[0]
    assert trace.reason


def test_descent_is_seeded_and_reproducible():
    prob = make_problem(graph=two_phase_graph(0.0, 1.0, 1.0, 1.0), R=0.5, tol=1e-10)
    cfg = OptimizerConfig(R=0.5, max_iter=3, seed=7, step_tol=1e-4)
    a, ta = projected_descent(prob, cfg)
    b, tb = projected_descent(prob, cfg)
    np.testing.assert_array_equal(a.values, b.values)
    assert ta.as_dict() == tb.as_dict()


def test_infeasible_start_is_projected():
    prob = make_problem()
    cv, trace = projected_descent(prob, OptimizerConfig(R=0.1, max_iter=0), f0=np.full(prob.disc.control_shape, 3.0))
    assert np.all(cv.values == 0.1)


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(R=-1.0)
    with pytest.raises(ValueError):
        OptimizerConfig(backtrack=1.5)


def test_epsilon_certificate_table():
    runs = [{"h": 0.25, "tau": 0.1, "I": 1.0, "J": 1.3},
            {"h": 0.125, "tau": 0.05, "I": 1.1, "J": 1.2},
            {"h": 0.0625, "tau": 0.025, "I": 1.12, "J": 1.15}]
    cert = epsilon_certificate(runs)
    assert [r["gap"] for r in cert["rows"]] == pytest.approx([0.3, 0.1, 0.03])
    assert cert["successive_I_gaps"] == pytest.approx([0.1, 0.02])
    assert cert["gaps_non_increasing"]
    runs[2]["J"] = 2.0
    assert not epsilon_certificate(runs)["gaps_non_increasing"]

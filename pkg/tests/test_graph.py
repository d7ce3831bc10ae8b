import numpy as np
import pytest

from stefanctl.errors import GraphError, QuadratureError
from stefanctl.graph import (
    Branch, MollifiedGraph, MonotoneGraph, graph_eval, identity_graph, kernel_constant,
    mollify, mollify_derivative, two_phase_graph,
)
from stefanctl.verify import random_graph

# 1/int_{-1}^{1} exp(-1/(1-u^2)) du, 40-digit mpmath quadrature
KERNEL_C = 2.252283621043581010499781255559830730074
# b_n(0.05) for the unit-jump identity graph at n = 10, mpmath quadrature of the convolution
MOLLIFY_N10_AT_005 = 0.927032716722670921914265974436416359463


def test_graph_eval_identity():
    assert graph_eval(identity_graph(), 0.5) == (0.5, 0.5)


def test_graph_eval_jump(two_phase):
    assert graph_eval(two_phase, 0.0) == (0.0, 1.0)
    lo, hi = graph_eval(two_phase, 0.25)
    assert lo == hi == 1.25


def test_graph_validation_lists_problems():
    with pytest.raises(GraphError) as exc:
        MonotoneGraph((0.0,), (-1.0,), (Branch((0, 1), (0, 0.5)),), 1.0)
    msg = str(exc.value)
    assert "jumps must be positive" in msg and "m+1 branches" in msg


def test_branch_slope_below_floor_rejected():
    with pytest.raises(GraphError, match="slope_floor"):
        MonotoneGraph((), (), (Branch((0, 1), (0, 0.5)),), 1.0)


def test_branches_must_agree_at_breakpoint():
    with pytest.raises(GraphError, match="disagree"):
        MonotoneGraph((0.0,), (1.0,), (Branch((-1, 0), (-1, 0)), Branch((0, 1), (0.5, 1.5))), 1.0)


def test_kernel_constant_matches_quadrature_oracle():
    assert kernel_constant(1) == pytest.approx(KERNEL_C, abs=1e-13)
    assert kernel_constant(2) / kernel_constant(1) == 2.0


def test_kernel_mass_normalized():
    mg = MollifiedGraph(identity_graph(), 7)
    x, w = np.polynomial.legendre.leggauss(200)
    u = x / mg.n
    dens = mg.n * mg.kernel_norm * np.exp(-1.0 / (1.0 - (mg.n * u) ** 2))
    assert abs(np.dot(w, dens) / mg.n - 1.0) < 1e-12


def test_coarse_quadrature_rejected():
    with pytest.raises(QuadratureError):
        kernel_constant(1, quadrature_order=4)


def test_mollify_reproduces_affine():
    g = identity_graph(2.5)
    mg = MollifiedGraph(g, 5)
    v = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(mollify(mg, v), 2.5 * v, atol=1e-14)


def test_mollify_jump_midpoint(two_phase):
    for n in (1, 3, 10):
        assert mollify(MollifiedGraph(two_phase, n), 0.0) == pytest.approx(0.5, abs=1e-15)


def test_mollify_against_quadrature_oracle(two_phase_n10):
    assert mollify(two_phase_n10, 0.05) == pytest.approx(MOLLIFY_N10_AT_005, abs=1e-14)


def test_derivative_identity_and_outside_window(two_phase_n10):
    assert np.all(mollify_derivative(MollifiedGraph(identity_graph(), 4), np.linspace(-2, 2, 9)) == 1.0)
    assert mollify_derivative(two_phase_n10, 0.2) == 1.0
    assert mollify_derivative(two_phase_n10, -0.15) == 1.0


def test_derivative_at_jump_center(two_phase_n10):
    # 1 + nu * n * C * e^{-1}
    assert mollify_derivative(two_phase_n10, 0.0) == pytest.approx(1 + 10 * KERNEL_C * np.exp(-1), rel=1e-13)
    step = 1e-6
    fd = (mollify(two_phase_n10, step) - mollify(two_phase_n10, -step)) / (2 * step)
    assert mollify_derivative(two_phase_n10, 0.0) == pytest.approx(fd, rel=1e-8)


def test_ramp_knots_smoothed_consistently():
    g = MonotoneGraph((), (), (Branch((-1.0, 0.0, 1.0), (-1.0, 0.0, 3.0)),), 1.0)
    mg = MollifiedGraph(g, 4)
    v = np.linspace(-0.4, 0.4, 17)
    step = 1e-6
    fd = (mg.value(v + step) - mg.value(v - step)) / (2 * step)
    np.testing.assert_allclose(mg.derivative(v), fd, rtol=1e-7)
    assert np.all(mg.derivative(v) >= 1.0 - 1e-14)


def test_value_and_derivative_shared_evaluation(two_phase_n10):
    v = np.linspace(-0.2, 0.2, 41)
    val, der = two_phase_n10.evaluate(v, True, True)
    np.testing.assert_array_equal(val, two_phase_n10.value(v))
    np.testing.assert_array_equal(der, two_phase_n10.derivative(v))


def test_two_phase_slope_floor():
    g = two_phase_graph(0.1, 2.0, 0.5, 3.0)
    assert g.slope_floor == 0.5
    # zero enthalpy at the transition temperature, jump = latent heat
    assert graph_eval(g, 0.1) == (0.0, 2.0)
    assert graph_eval(g, 0.2)[0] == pytest.approx(2.0 + 3.0 * 0.1)


def test_random_graphs_strictly_increasing(rng):
    for _ in range(5):
        g = random_graph(rng)
        mg = MollifiedGraph(g, int(rng.integers(2, 20)))
        v = np.sort(rng.uniform(-2, 2, 200))
        q = np.diff(mg.value(v)) / np.diff(v)
        assert np.all(q >= g.slope_floor * (1 - 1e-10))


def test_derivative_mean_matches_difference_quotient(two_phase_n10):
    w, v = -0.07, 0.03
    dq = (mollify(two_phase_n10, v) - mollify(two_phase_n10, w)) / (v - w)
    assert two_phase_n10.derivative_mean(w, v) == pytest.approx(dq, rel=1e-12)


def test_invalid_n():
    with pytest.raises(ValueError):
        MollifiedGraph(identity_graph(), 0)

import math

import numpy as np
import pytest

from stefanctl.errors import GridError
from stefanctl.grid import Discretization, Domain
from stefanctl.interpolants import (
    InterpolantBundle, derivative_pairings, discrete_norms, energy_left, evaluate, export_samples,
    interface_position, interpolant_bounds, l2_error, l2_mismatch_gap, multilinear_l2_sq,
    step_linear_gap,
)
from stefanctl.solver import DiscreteState, solve_state
from stefanctl.verify import prepare, random_instance, sine_product_case, manufactured_solution_study


def make_state(values, d=1, h=0.5, T=1.0):
    values = np.asarray(values, dtype=float)
    n_t = values.shape[0] - 1
    disc = Discretization(Domain(((0.0, 1.0),) * d, T), h, n_t)
    return DiscreteState(disc, values, n_t)


def test_constant_state_all_modes():
    c = 1.7
    st = make_state(np.full((3, 3, 3), c), d=2)
    x = [np.array([0.1, 0.5, 0.99]), np.array([0.3, 0.0, 1.0])]
    t = np.array([0.0, 0.3, 1.0])
    for mode in ("constant", "step", "linear"):
        np.testing.assert_allclose(evaluate(st, mode, x, t), c, rtol=1e-15)
    np.testing.assert_array_equal(evaluate(st, "difference", x, t, axis=1), 0.0)


def test_linear_midpoint():
    st = make_state([[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]], h=0.5)
    assert evaluate(st, "linear", [np.array(0.25)], 1.0) == pytest.approx(0.5)


def test_random_2d_multilinear_matches_direct_formula(rng):
    vals = rng.normal(size=(3, 5, 5))
    st = make_state(vals, d=2, h=0.25, T=1.0)
    x1, x2, t = 0.3, 0.61, 0.8  # step 2, theta = 0.6
    i, j = 1, 2
    a, b = x1 / 0.25 - i, x2 / 0.25 - j

    def bilinear(V):
        return ((1 - a) * (1 - b) * V[i, j] + a * (1 - b) * V[i + 1, j] + (1 - a) * b * V[i, j + 1]
                + a * b * V[i + 1, j + 1])

    expected = 0.4 * bilinear(vals[1]) + 0.6 * bilinear(vals[2])
    got = evaluate(st, "linear", [np.array(x1), np.array(x2)], t)
    assert got == pytest.approx(expected, abs=1e-14)


def test_nodes_reproduced_and_initial_slice(rng):
    vals = rng.normal(size=(4, 5))
    st = make_state(vals, h=0.25, T=0.75)
    xs = st.disc.coords(0)
    for k in range(4):
        np.testing.assert_allclose(evaluate(st, "linear", [xs], k * st.disc.tau), vals[k], atol=1e-15)
    np.testing.assert_array_equal(evaluate(st, "step", [xs], 0.0), vals[0])


def test_queries_outside_domain_raise():
    st = make_state(np.zeros((2, 3)))
    b = InterpolantBundle(st)
    with pytest.raises(GridError):
        b.eval("linear", [np.array(1.2)], 0.5)
    with pytest.raises(GridError):
        b.eval("linear", [np.array(0.5)], 1.5)
    with pytest.raises(ValueError):
        b.eval("cubic", [np.array(0.5)], 0.5)


def test_zero_state_norms():
    st = make_state(np.zeros((3, 5)), h=0.25)
    assert all(v == 0.0 for v in discrete_norms(st).values())


def test_time_term_hand_sum():
    # 3-node grid, v(k) = k*tau at the interior node
    n_t, T = 4, 1.0
    tau = T / n_t
    vals = np.zeros((n_t + 1, 3))
    vals[:, 1] = tau * np.arange(n_t + 1)
    st = make_state(vals, h=0.5, T=T)
    assert discrete_norms(st)["time"] == pytest.approx(T * 0.5 * 1, rel=1e-14)


def test_single_spike_terms():
    c, n_t, T = 2.0, 4, 1.0
    tau, h = T / n_t, 0.25
    vals = np.zeros((n_t + 1, 5))
    vals[2, 2] = c
    norms = discrete_norms(make_state(vals, h=h, T=T))
    assert norms["l2"] ** 2 == pytest.approx(tau * h * c * c, rel=1e-14)
    assert norms["time"] == pytest.approx(2 * tau * h * (c / tau) ** 2, rel=1e-14)
    assert energy_left(norms) == norms["time"] + norms["gradient"] + norms["mixed"]


def test_mismatch_gap_closed_form():
    c, h = 0.8, 0.25
    vals = np.zeros((2, 5))
    vals[:, 1:4] = c
    st = make_state(vals, h=h)
    # ramps on the first and last prism each contribute c^2 h / 3
    assert l2_mismatch_gap(st) == pytest.approx(math.sqrt(2 * c * c * h / 3), rel=1e-14)
    assert l2_mismatch_gap(make_state(np.zeros((2, 5)), h=h)) == 0.0
    assert l2_mismatch_gap(st, gamma=np.full(4, c)) == pytest.approx(math.sqrt(2 * c * c * h / 3), rel=1e-14)


def test_mismatch_gap_shrinks_under_refinement():
    exact, build = sine_product_case(1)
    gaps = [l2_mismatch_gap(row["state"]) for row in
            manufactured_solution_study(exact, build, [(1 / 8, 8), (1 / 16, 8), (1 / 32, 8)])]
    assert gaps[0] > gaps[1] > gaps[2]


def test_multilinear_l2_exact():
    disc = Discretization(Domain(((0.0, 1.0),), 1.0), 0.5, 1)
    # hat function peaked at 1/2: integral of its square is 1/3
    assert multilinear_l2_sq(disc, np.array([0.0, 1.0, 0.0])) == pytest.approx(1 / 3, rel=1e-14)


def test_interpolant_bounds_on_random_states():
    for seed in range(6):
        inst = random_instance(seed)
        coeffs, mg = prepare(inst)
        st = solve_state(coeffs, mg)
        for left, right in interpolant_bounds(st).values():
            assert left <= right


def test_step_linear_gap_shrinks_with_tau():
    exact, build = sine_product_case(1)
    rows = manufactured_solution_study(exact, build, [(1 / 16, 8), (1 / 16, 32), (1 / 16, 128)])
    gaps = [step_linear_gap(r["state"]) for r in rows]
    assert gaps[0] > gaps[1] > gaps[2]


def test_l2_error_zero_on_representable_field():
    # v = x t is bilinear in (x, t); node values must be exact away from the boundary condition,
    # so compare on a state that carries x t on every node (no boundary forcing involved)
    disc = Discretization(Domain(((0.0, 1.0),), 1.0), 0.25, 4)
    vals = np.outer(disc.times, disc.coords(0))
    st = DiscreteState(disc, vals, 4)
    assert l2_error(st, lambda x, t: x[0] * t) < 1e-14


def test_interface_position_linear_profile():
    vals = np.array([[1.0, 0.5, -0.5, -1.0, 0.0]])
    disc = Discretization(Domain(((0.0, 1.0),), 1.0), 0.25, 1)
    st = DiscreteState(disc, np.vstack([vals, vals]), 1)
    assert interface_position(st) == pytest.approx(0.375)


def test_derivative_pairings_shrink():
    exact, build = sine_product_case(1)
    rows = manufactured_solution_study(exact, build, [(1 / 8, 16), (1 / 16, 64)])
    tests = [lambda x, t: np.ones_like(x[0]), lambda x, t: np.cos(np.pi * x[0]) * t]
    p = [np.abs(derivative_pairings(r["state"], tests)) for r in rows]
    # the constant test function pairs to round-off on both levels
    assert p[0][0] < 1e-12 and p[1][0] < 1e-12
    assert p[1][1] < p[0][1]


def test_export_samples(tmp_path):
    st = make_state(np.zeros((2, 3)))
    path = tmp_path / "s.csv"
    export_samples(path, st, points_per_cell=2)
    lines = path.read_text().splitlines()
    assert lines[0] == "x1,t,value"
    assert len(lines) == 1 + 2 * 5

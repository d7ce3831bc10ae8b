import numpy as np
import pytest

from stefanctl.control import (
    ControlProblem, ControlVector, cost_continuous_reference, cost_discrete, discretize_Q, lift_P,
    project, read_control_csv, write_control_csv, zero_control,
)
from stefanctl.graph import identity_graph, two_phase_graph
from stefanctl.grid import Discretization, Domain, ProblemData, build_coefficient_grid
from stefanctl.solver import DiscreteState


def disc_for(d=1, h=0.25, n_t=4, T=1.0):
    return Discretization(Domain(((0.0, 1.0),) * d, T), h, n_t)


def test_round_trip_Q_of_P_is_bitwise(rng):
    disc = disc_for(d=2)
    cv = ControlVector(disc, rng.normal(size=disc.control_shape), R=10.0)
    back = discretize_Q(lift_P(cv), disc)
    np.testing.assert_array_equal(back.values, cv.values)


def test_constant_field_maps_to_constant():
    disc = disc_for(d=2)
    q = discretize_Q(lambda x, t: 0.3 + 0 * x[0], disc)
    assert np.all(q.values == 0.3)


def test_ess_sup_equals_linf(rng):
    disc = disc_for(d=2)
    cv = ControlVector(disc, rng.normal(size=disc.control_shape))
    assert lift_P(cv).ess_sup() == cv.linf


def test_Q_of_linear_in_time_is_midpoint_value():
    disc = disc_for(n_t=4, T=1.0)
    q = discretize_Q(lambda x, t: t + 0 * x[0], disc)
    expected = (np.arange(4) + 0.5) * disc.tau
    np.testing.assert_allclose(q.values, np.broadcast_to(expected, disc.control_shape), atol=1e-15)


def test_lift_is_zero_outside_and_piecewise_constant(rng):
    disc = disc_for()
    cv = ControlVector(disc, rng.normal(size=disc.control_shape))
    P = lift_P(cv)
    assert P([np.array(0.1)], 0.1) == cv.values[0, 0]
    assert P([np.array(0.9)], 0.9) == cv.values[3, 3]
    assert P([np.array(1.5)], 0.5) == 0.0


def test_projection_is_idempotent_and_feasible(rng):
    vals = rng.normal(scale=3, size=20)
    p = project(vals, 1.0)
    assert np.max(np.abs(p)) <= 1.0
    np.testing.assert_array_equal(project(p, 1.0), p)
    assert ControlVector(disc_for(), np.full((4, 4), 2.0), 1.0).projected().feasible()


def test_control_shape_and_bound_validation():
    disc = disc_for()
    with pytest.raises(ValueError):
        ControlVector(disc, np.zeros((3, 4)))
    with pytest.raises(ValueError):
        ControlVector(disc, np.zeros((4, 4)), R=-1.0)
    assert zero_control(disc).linf == 0.0


def test_cost_hand_sums(rng):
    disc = disc_for(h=0.25, n_t=1)
    c = 0.7
    values = np.zeros((2, 5))
    values[1] = c
    state = DiscreteState(disc, values, 1)
    # prisms are nodes 0..3 with zero target
    assert cost_discrete(state, np.zeros(5)).value == pytest.approx(4 * 0.25 * c * c, rel=1e-15)
    target = rng.normal(size=5)
    expected = 0.25 * np.sum((c - target[:4]) ** 2)
    assert cost_discrete(state, target).value == pytest.approx(expected, rel=1e-14)
    assert cost_discrete(state, target[:4]).value == cost_discrete(state, target).value


def test_zero_problem_has_zero_cost():
    disc = disc_for()
    coeffs = build_coefficient_grid(disc, ProblemData(disc.domain))
    prob = ControlProblem(coeffs, two_phase_graph(0.0, 1.0, 1.0, 1.0))
    assert prob.cost(np.zeros(disc.control_shape)) == 0.0


def test_csv_round_trip(tmp_path, rng):
    disc = disc_for(d=2)
    cv = ControlVector(disc, rng.normal(size=disc.control_shape), R=5.0)
    path = tmp_path / "control.csv"
    write_control_csv(path, cv, header="# {}\n")
    back = read_control_csv(path, disc, R=5.0)
    np.testing.assert_array_equal(back.values, cv.values)


def test_incomplete_csv_rejected(tmp_path):
    disc = disc_for()
    path = tmp_path / "c.csv"
    path.write_text("g1,k,value\n0,1,0.5\n")
    with pytest.raises(ValueError):
        read_control_csv(path, disc)


def test_surrogate_matches_direct_fine_solve():
    dom = Domain(((0.0, 1.0),), 0.25)
    fine = Discretization(dom, 1 / 16, 16)
    data = ProblemData(dom, phi=lambda x: np.sin(np.pi * x[0]), gamma=0.1)
    f = lambda x, t: np.cos(np.pi * x[0]) * (1 + t)
    value, used = cost_continuous_reference(f, data, fine, identity_graph())
    assert used is fine
    coeffs = build_coefficient_grid(fine, data)
    direct = ControlProblem(coeffs, identity_graph()).cost(discretize_Q(f, fine).values)
    assert value == direct

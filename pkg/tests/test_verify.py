import math

import numpy as np
import pytest

from stefanctl.graph import identity_graph
from stefanctl.grid import Discretization, Domain, ProblemData, build_coefficient_grid
from stefanctl.solver import mollified_for, solve_state
from stefanctl.verify import (
    BoundReport, NeumannParams, StefanStudySetup, check_energy, check_max_principle, energy_chain,
    max_principle_lambda, neumann_lambda, neumann_oracle, newton_oracle_sweep, phi_gradient_l2_sq,
    random_max_principle_sweep, write_table_csv,
)

# mpmath root of the interface equation at 40 digits, frozen
NEUMANN_STUDY_LAMBDA = 0.1452202843112045172


def setup_1d(h=0.125, n_t=8, T=0.5, **data):
    dom = Domain(((0.0, 1.0),), T)
    disc = Discretization(dom, h, n_t)
    return disc, build_coefficient_grid(disc, ProblemData(dom, **data))


def test_lambda_reduces_to_two_over_bbar():
    _, coeffs = setup_1d(b=0.7)
    assert max_principle_lambda(coeffs, 0.5) == pytest.approx(4.0, rel=1e-15)


def test_lambda_picks_up_b_gradient_and_r():
    _, coeffs = setup_1d(b=lambda x, t: x[0], r=0.25)
    # b_x = 1 exactly on cell averages of a linear function
    assert max_principle_lambda(coeffs, 1.0) == pytest.approx(2 * (1 + 1 + 0.25), rel=1e-12)


def test_zero_data_max_principle_passes():
    disc, coeffs = setup_1d()
    state = solve_state(coeffs, mollified_for(disc, identity_graph()))
    rep = check_max_principle(state, coeffs, 1.0)
    assert rep.left == rep.right == 0.0 and rep.passed


def test_bound_report_slack():
    assert BoundReport("x", 1.05, 1.0, 0.1).passed
    assert not BoundReport("x", 1.2, 1.0, 0.1).passed
    assert BoundReport("x", 0.0, 1.0).margin == 1.0


def test_energy_chain_running_max():
    assert all(r.passed for r in energy_chain([1.0, 1.05, 1.1]))
    reps = energy_chain([1.0, 1.05, 1.2])
    assert [r.passed for r in reps] == [True, True, False]
    assert reps[2].right == 1.05


def test_energy_constant_invariant_under_scaling_for_linear_problem():
    phi = lambda x: np.sin(np.pi * x[0])
    consts = []
    for s in (1.0, 3.0):
        disc, coeffs = setup_1d(phi=lambda x, s=s: s * phi(x), f=s * 0.5)
        state = solve_state(coeffs, mollified_for(disc, identity_graph()))
        consts.append(check_energy(state, coeffs, lambda x, s=s: s * phi(x)).left)
    assert consts[1] == pytest.approx(consts[0], rel=1e-8)


def test_phi_gradient_quadrature():
    dom = Domain(((0.0, 1.0),), 1.0)
    assert phi_gradient_l2_sq(lambda x: np.sin(np.pi * x[0]), dom) == pytest.approx(math.pi**2 / 2, rel=1e-8)
    assert phi_gradient_l2_sq(0.3, dom) == 0.0


def test_neumann_lambda_frozen_value():
    lam = neumann_lambda(StefanStudySetup().params)
    assert lam == pytest.approx(NEUMANN_STUDY_LAMBDA, abs=1e-14)


def test_neumann_symmetric_case_is_stationary():
    assert neumann_lambda(NeumannParams()) == pytest.approx(0.0, abs=1e-12)


def test_neumann_lambda_decreases_with_latent_heat():
    lams = [neumann_lambda(NeumannParams(latent=nu, v_solid=-0.5)) for nu in (0.5, 1, 4, 16, 64)]
    assert all(b < a for a, b in zip(lams, lams[1:]))
    assert lams[-1] < 0.01


def test_neumann_rejects_bad_parameters():
    with pytest.raises(ValueError):
        neumann_lambda(NeumannParams(latent=0.0))
    with pytest.raises(ValueError):
        neumann_lambda(NeumannParams(v_liquid=-1.0))


def test_neumann_solution_satisfies_pde_and_interface_conditions():
    p = NeumannParams(conductivity=1.3, c_liquid=2.0, c_solid=0.8, latent=1.5, v_liquid=1.0, v_solid=-0.5)
    sol = neumann_oracle(p)
    t, e = 0.4, 1e-4
    s = float(sol.interface(t))
    assert abs(float(sol(s, t))) < 1e-10
    for x, c in ((s - 0.3, p.c_liquid), (s + 0.3, p.c_solid)):
        vt = (sol(x, t + e) - sol(x, t - e)) / (2 * e)
        vxx = (sol(x + e, t) - 2 * sol(x, t) + sol(x - e, t)) / e**2
        assert abs(c * vt - p.conductivity * vxx) < 1e-5
        vx_fd = (sol(x + e, t) - sol(x - e, t)) / (2 * e)
        assert float(sol.dx(x, t)) == pytest.approx(float(vx_fd), rel=1e-6)
    jump = p.conductivity * (sol.dx(s - 1e-12, t) - sol.dx(s + 1e-12, t))
    # energy balance: conductive flux jump feeds latent heat at speed s'(t) = lambda / sqrt(t)
    assert float(jump) == pytest.approx(-p.latent * sol.lam / math.sqrt(t), rel=1e-8)


def test_stefan_setup_exact_solution_matches_oracle_in_core():
    setup = StefanStudySetup()
    v, sol = setup.exact(), setup.oracle()
    x = np.linspace(-0.9, 0.9, 7)
    np.testing.assert_allclose(v([x], 0.1), sol(x, 0.1 + setup.t0), atol=1e-15)
    assert np.all(v([np.array([-2.0, 2.0])], 0.1) == 0.0)
    with pytest.raises(ValueError):
        StefanStudySetup(inner=0.05, outer=2.0).problem()


def test_small_random_sweeps():
    reps = random_max_principle_sweep(3, seed=11)
    assert all(r.passed for r in reps)
    rows = newton_oracle_sweep(2, seed=5, max_nodes=9, max_steps=4)
    assert all(r["max_error"] <= 1e-8 and r["max_ratio"] <= r["delta"] < 1 for r in rows)


def test_write_table_csv(tmp_path):
    path = tmp_path / "t.csv"
    write_table_csv(path, [{"h": 0.5, "ratio": None, "n": 3, "state": object()}], header="# x\n")
    assert path.read_text() == "# x\nh,ratio,n\n0.5,,3\n"

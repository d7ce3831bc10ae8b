"""What the a priori bounds look like on real runs.

The discrete state obeys two estimates:

* a maximum principle, ``max |v| <= exp(lambda T) max(|f|, |Phi|)``
* an energy bound whose implied constant should not grow under refinement

This script solves a few random problems and a 2-D two-phase instance and
prints how much room each bound leaves.

Run:  python3 demos/bounds_in_practice.py
"""
import numpy as np

from stefanctl.graph import two_phase_graph
from stefanctl.grid import Discretization, Domain, ProblemData, build_coefficient_grid
from stefanctl.solver import mollified_for, solve_state
from stefanctl.verify import check_energy, random_max_principle_sweep

print("maximum principle on random instances")
for rep in random_max_principle_sweep(6, seed=100):
    d = rep.descriptor
    print(f"  seed {rep.seed:3d}  d={d['d']}  max|v| = {rep.left:7.4f}  bound = {rep.right:9.4f}  "
          f"lambda*T = {d['lambda'] * d['T']:.3f}")

print("\nenergy constant under refinement (2-D, liquid twice as capacitive as solid)")
dom = Domain(((0.0, 1.0), (0.0, 1.0)), 0.25)
# initial data vanishes on the boundary, matching the homogeneous Dirichlet condition
data = ProblemData(
    dom, a=(0.1, 0.1),
    phi=lambda x: np.sin(np.pi * x[0]) * np.sin(np.pi * x[1]) - 0.3 * np.sin(2 * np.pi * x[0]) * np.sin(np.pi * x[1]),
    f=lambda x, t: 2 * np.cos(np.pi * x[0]) * np.exp(-t),
)
graph = two_phase_graph(0.0, 1.0, 1.0, 2.0)
for h, n_t in ((1 / 8, 16), (1 / 16, 64), (1 / 32, 256)):
    disc = Discretization(dom, h, n_t)
    coeffs = build_coefficient_grid(disc, data)
    state = solve_state(coeffs, mollified_for(disc, graph))
    rep = check_energy(state, coeffs, data.phi)
    print(f"  h = {h:.4f}: constant = {rep.left:.4f}")

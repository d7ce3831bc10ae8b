import json

import numpy as np
import pytest

from stefanctl.config import build_graph, default_chain, field_from_spec, load_config
from stefanctl.errors import ConfigError
from stefanctl.grid import Discretization, Domain

BASE = {
    "domain": {"box": [[0.0, 1.0]], "T": 0.25},
    "grid": {"h": 0.125, "n_t": 4},
    "graph": {"kind": "two_phase", "latent": 1.0},
}


def problems_of(raw, mode="solve"):
    with pytest.raises(ConfigError) as exc:
        load_config(raw, mode)
    return exc.value.problems


def test_defaults_are_filled_and_seed_override():
    cfg = load_config(dict(BASE), "solve", seed=9)
    assert cfg.seed == 9
    assert cfg.resolved["coefficients"]["a"] == 1.0
    assert cfg.discretization().n_t == 4
    assert cfg.solver_config(3).workers == 3


def test_htau_violation_names_min_ratio():
    raw = dict(BASE, grid={"h": 0.125, "n_t": 1})
    probs = problems_of(raw)
    ht = [p for p in probs if p["code"] == "htau"]
    assert len(ht) == 1
    assert ht[0]["min_ratio"] == pytest.approx(1.0)
    assert ht[0]["ratio"] == pytest.approx(0.5)
    assert "htau" in ht[0]["message"]


def test_htau_uses_drift_sup():
    raw = dict(BASE, grid={"h": 0.125, "n_t": 2}, coefficients={"b": "2*x1"})
    (p,) = [p for p in problems_of(raw) if p["code"] == "htau"]
    assert p["min_ratio"] == pytest.approx(5.0)


def test_every_problem_is_reported_at_once():
    raw = dict(BASE, bogus=1, solver={"tol_fp": -1.0}, data={"phi": "sin(", "f": 0.0, "gamma": 0.0})
    codes = {p["code"] for p in problems_of(raw)}
    assert {"unknown_key", "solver", "expression"} <= codes


def test_missing_blocks_reported():
    codes = [p["code"] for p in problems_of({})]
    assert codes.count("missing") == 3


def test_optimize_checks_radius_and_manufactured_target():
    probs = problems_of(dict(BASE, control={"R": 0.5}, target={"manufacture": "2"}), "optimize")
    assert any(p["code"] == "R" for p in probs)
    assert any(p["code"] == "R" for p in problems_of(dict(BASE, control={"R": -1}), "optimize"))


def test_verify_and_converge_validation():
    assert any(p["code"] == "verify" for p in problems_of({"verify": {"checks": ["nope"]}}, "verify"))
    load_config({"verify": {"checks": ["random_max_principle"]}}, "verify")
    assert any(p["code"] == "converge" for p in problems_of({"converge": {"study": "other"}}, "converge"))
    assert any(p["code"] == "converge" for p in problems_of({"converge": {"chain": [[0.1]]}}, "converge"))


def test_file_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert problems_of(str(bad))[0]["code"] == "json"
    assert problems_of(str(tmp_path / "missing.json"))[0]["code"] == "io"
    good = tmp_path / "good.json"
    good.write_text(json.dumps(BASE))
    assert load_config(str(good), "solve").d == 1


def test_build_graph_kinds():
    assert build_graph({"kind": "identity"}).slope_floor == 1.0
    g = build_graph({"kind": "two_phase", "latent": 2.0, "c_solid": 0.5, "c_liquid": 3.0})
    assert g.slope_floor == 0.5
    gen = build_graph({"kind": "general", "breakpoints": [0.0], "jumps": [1.0], "slope_floor": 1.0,
                       "branches": [{"knots": [-1.0, 0.0], "values": [-1.0, 0.0]},
                                    {"knots": [0.0, 1.0], "values": [0.0, 1.0]}]})
    assert gen.slope_floor == 1.0
    with pytest.raises(Exception):
        build_graph({"kind": "cubic"})


def test_field_from_spec_forms():
    disc = Discretization(Domain(((0.0, 1.0),), 1.0), 0.5, 2)
    assert field_from_spec(1.5, 1) == 1.5
    tab = field_from_spec({"cells": [1, 2, 3, 4]}, 1, disc)
    assert tab([np.array(0.75)], 0.25) == 3.0
    sp = field_from_spec({"cells": [5, 6]}, 1, disc, spatial=True)
    assert sp([np.array(0.25)]) == 5.0
    with pytest.raises(ValueError):
        field_from_spec({"cells": [1]}, 1, disc)


def test_default_chain_is_dyadic():
    assert [h for h, _ in default_chain("stefan", 3)] == [1 / 8, 1 / 16, 1 / 32]
    assert default_chain("manufactured", 2, d=2)[0][0] == 0.25

import json
import math

import pytest

import ddpb


def test_binary_kl_and_inverse():
    assert ddpb.binary_kl(0.1, 0.5) == pytest.approx(0.36806420716849707, abs=1e-12)
    assert ddpb.kl_inverse(0.2, 0.05) == pytest.approx(0.34353570348609454, abs=1e-10)
    with pytest.raises(ValueError):
        ddpb.kl_inverse(1.5, 0.1)


def test_bound_helpers():
    b = ddpb.maurer_b_term(0.0, 10000, 0.05)
    assert b == pytest.approx(math.log(2 * 100 / 0.05) / 10000)
    rep = ddpb.variational_kl_bound(0.1, 0.05)
    assert rep["final_bound"] == pytest.approx(min(rep["moment_value"], rep["pinsker_value"]))
    assert ddpb.optimal_beta_bound(0.1, 0.0) == pytest.approx(0.1)
    full = ddpb.evaluate_bound(0.05, 3.0, 1000, 0.05)
    assert 0.05 < full["final_bound"] <= 1.0
    assert ddpb.kl_diag([0.0], [1.0], [0.0], [1.0]) == 0.0
    assert ddpb.union_adjusted_delta(0.05, 10) == pytest.approx(0.005)


def test_toy_sweep_argmin():
    rows, best = ddpb.toy_sweep("calibrated", 0.01)
    assert len(rows) == 100
    assert rows[best]["m"] == 24
    assert rows[0]["lower"] > 1.0
    with pytest.raises(ValueError):
        ddpb.toy_sweep("nope")


def test_get_bound_small():
    cfg = {
        "dataset": {"n": 500, "n_test": 200, "n_ghost": 500},
        "layer_sizes": [20, 8, 2],
        "sigma_p_grid": [1e-3, 1e-2],
        "mc_samples": 50,
        "test_mc_samples": 3,
    }
    r = ddpb.get_bound(json.dumps(cfg), alpha=0.2, seed=0)
    assert r["prior_source"] == "prefix"
    assert r["m"] == 100
    assert r["sigma_p"] in (1e-3, 1e-2)
    assert r["gibbs_risk_upper"] <= r["final_bound"] <= 1.0
    with pytest.raises(ValueError):
        ddpb.get_bound(json.dumps({"bogus": 1}))


def test_run_cli_invert():
    assert ddpb.run_cli(["invert-kl", "--q", "0.1", "--b", "0.368074"]) == 0
    assert ddpb.run_cli(["invert-kl", "--q", "2", "--b", "0.1"]) == 1

"""Markov-switched environments: stationary laws, limits, simulation."""

import numpy as np
import pytest

from digrowth import stochastic as S
from digrowth.spectral import spectral_abscissa

L_SYM = [[-1.0, 1.0], [1.0, -1.0]]


def pm1_twin(eps: float = 0.5) -> S.MarkovEnvironment:
    a, b = 1.0 - eps, -1.0 - eps
    return S.environment([([a, b], L_SYM), ([b, a], L_SYM)],
                         [[-1.0, 1.0], [1.0, -1.0]])


def test_stationary_symmetric():
    env = pm1_twin()
    assert np.allclose(S.stationary_distribution(env), [0.5, 0.5], atol=1e-12)


def test_stationary_two_state_asymmetric():
    env = S.environment([([0.0, 0.0], L_SYM), ([0.0, 0.0], L_SYM)],
                        [[-2.0, 2.0], [1.0, -1.0]])
    assert np.allclose(S.stationary_distribution(env),
                       [1.0 / 3.0, 2.0 / 3.0], atol=1e-12)


def test_stationary_cycle_uniform():
    Q = [[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [1.0, 0.0, -1.0]]
    states = [([0.0, 0.0], L_SYM)] * 3
    env = S.environment(states, Q)
    assert np.allclose(S.stationary_distribution(env), np.full(3, 1 / 3),
                       atol=1e-12)


def test_stationary_reducible_raises():
    Q = [[0.0, 0.0], [1.0, -1.0]]  # absorbing first state
    env = S.environment([([0.0, 0.0], L_SYM)] * 2, Q)
    with pytest.raises(S.ReducibleChain):
        S.stationary_distribution(env)


def test_environment_validation():
    with pytest.raises(S.StochasticError):
        S.environment([([0.0, 0.0], [[-1.0, -1.0], [1.0, 1.0]])], [[0.0]])
    with pytest.raises(S.StochasticError):
        S.environment([([0.0, 0.0], L_SYM)], [[1.0]])  # bad row sum


def test_single_state_collapse():
    env = S.environment([([0.5, -1.5], [[-1.0, 2.0], [1.0, -2.0]])], [[0.0]])
    m = 1.3
    exact = spectral_abscissa(env.matrix(0, m))
    est = S.simulate_lyapunov(env, m, 1.0, 100.0, seed=5)
    assert est.lambda_hat == exact
    lims = S.stochastic_limits(env, m)
    assert lims["T0"] == pytest.approx(exact, abs=1e-12)
    assert lims["Tinf"] == pytest.approx(exact, abs=1e-12)


def test_limits_pm1_twin():
    env = pm1_twin(0.5)
    lims = S.stochastic_limits(env, 1.0)
    assert lims["T0"] == pytest.approx(-0.5, abs=1e-10)
    assert lims["Tinf"] == pytest.approx(-0.5 + np.sqrt(2.0) - 1.0, abs=1e-10)
    assert lims["chi"] == pytest.approx(0.5, abs=1e-14)
    assert lims["corners"]["lambda_0T"] == pytest.approx(-0.5, abs=1e-14)
    assert lims["corners"]["lambda_infT"] == pytest.approx(-0.5, abs=1e-12)
    assert lims["corners"]["sup"] == lims["chi"]


def test_seed_determinism():
    env = pm1_twin()
    a = S.simulate_lyapunov(env, 1.0, 0.5, 300.0, seed=42)
    b = S.simulate_lyapunov(env, 1.0, 0.5, 300.0, seed=42)
    assert a.lambda_hat == b.lambda_hat and a.stderr == b.stderr
    c = S.simulate_lyapunov(env, 1.0, 0.5, 300.0, seed=43)
    assert c.lambda_hat != a.lambda_hat


def test_degenerate_horizon_raises():
    env = pm1_twin()
    with pytest.raises(S.DegenerateHorizon):
        S.simulate_lyapunov(env, 1.0, 10.0, 50.0, seed=0)


def test_estimator_consistency_across_horizons():
    env = pm1_twin()
    a = S.simulate_lyapunov(env, 1.0, 0.5, 2000.0, seed=3)
    b = S.simulate_lyapunov(env, 1.0, 0.5, 20000.0, seed=4)
    combined = np.hypot(a.stderr, b.stderr)
    assert abs(a.lambda_hat - b.lambda_hat) <= 4.0 * combined


def test_chi_bound_on_estimates():
    env = pm1_twin()
    lims = S.stochastic_limits(env, 1.0)
    for T in (0.1, 1.0, 10.0):
        est = S.simulate_lyapunov(env, 1.0, T, 3000.0 * max(T, 1.0), seed=11)
        assert est.lambda_hat <= lims["chi"] + 3.0 * est.stderr


def test_long_dwell_no_overflow():
    # dwell times of order 1e4 with positive top rate: needs the factored
    # exponent path to stay finite
    env = pm1_twin()
    est = S.simulate_lyapunov(env, 1.0, 1e4, 2e6, seed=9)
    assert np.isfinite(est.lambda_hat)


def test_env_json_round_trip(tmp_path):
    import json
    doc = {"states": [{"R": [0.5, -1.5], "L": L_SYM},
                      {"R": [-1.5, 0.5], "L": L_SYM}],
           "Q": [[-1.0, 1.0], [1.0, -1.0]]}
    path = tmp_path / "env.json"
    path.write_text(json.dumps(doc))
    env = S.load(path)
    assert env.n_states == 2 and env.n_patches == 2
    with pytest.raises(S.StochasticError):
        S.from_dict({"states": []})

"""Sweeps, critical curves, classification, monotonicity evidence."""

import numpy as np
import pytest

from digrowth import asymptotics, explorer, model as M
from digrowth.dynamics import growth_rate
from digrowth.model import ModelParameters


def test_sweep_basic_and_chi_bound():
    grid = explorer.sweep(M.builtin("ab1"), (0.01, 3.0), (0.1, 100.0), 32)
    assert grid.lam.shape == (32, 32)
    assert np.all(grid.status == "ok")
    assert np.nanmax(grid.lam) <= grid.chi + 1e-9
    # growth region nonempty below m* for large T
    assert np.nanmax(grid.lam) > 0.0


def test_sweep_determinism_and_jobs_independence():
    mdl = M.builtin("ab1")
    g1 = explorer.sweep(mdl, (0.1, 2.0), (0.5, 50.0), 16)
    g2 = explorer.sweep(mdl, (0.1, 2.0), (0.5, 50.0), 16, jobs=4)
    assert np.array_equal(g1.lam, g2.lam)


def test_sweep_equal_rates_constant():
    growth = M.PeriodicMatrixFunction.from_segments(
        [0.0, 0.5], [np.diag([0.4, 0.4]), np.diag([-0.6, -0.6])])
    migration = M.PeriodicMatrixFunction.constant([[-1.0, 1.0], [1.0, -1.0]])
    mdl = M.validated(M.PatchModel(2, growth, migration))
    grid = explorer.sweep(mdl, (0.1, 10.0), (0.1, 10.0), 8)
    assert np.abs(grid.lam + 0.1).max() <= 1e-9


def test_sweep_marks_nonpositive_cells():
    grid = explorer.sweep(M.builtin("fainshil(0,0)"), (0.5, 2.0),
                          (0.5, 5.0), 8)
    assert np.all(grid.status == "non_positive_monodromy")


def test_critical_curve_ab1_single_branch():
    mdl = M.builtin("ab1")
    curve = explorer.critical_curve(mdl, (0.01, 3.0), (0.1, 200.0), 48)
    assert curve.n_branches == 1
    verts = curve.vertices()
    assert verts[:, 0].max() < 5.0 / 9.0  # no crossing beyond m*
    # every vertex is a genuine zero
    for mval, Tval in verts[::5]:
        res = growth_rate(mdl, ModelParameters(float(mval), float(Tval))).lam
        assert abs(res) <= 1e-8


def test_critical_curve_sign_correctness():
    mdl = M.builtin("ab1")
    grid = explorer.sweep(mdl, (0.01, 3.0), (0.1, 200.0), 32)
    curve = explorer.critical_curve(mdl, grid=grid)
    # inside the growth region (small m, huge T) Lambda > 0; outside < 0
    assert growth_rate(mdl, ModelParameters(0.2, 150.0)).lam > 0.0
    assert growth_rate(mdl, ModelParameters(2.0, 150.0)).lam < 0.0


def test_critical_curve_no_crossing():
    growth = M.PeriodicMatrixFunction.constant(np.diag([-0.4, -0.6]))
    migration = M.PeriodicMatrixFunction.constant([[-1.0, 1.0], [1.0, -1.0]])
    mdl = M.validated(M.PatchModel(2, growth, migration))
    with pytest.raises(explorer.NoZeroCrossing):
        explorer.critical_curve(mdl, (0.1, 2.0), (0.5, 20.0), 8)


def test_critical_period_matches_curve():
    mdl = M.builtin("ab1")
    Tc = explorer.critical_period(mdl, 0.3, (0.1, 1e4))
    assert abs(growth_rate(mdl, ModelParameters(0.3, Tc)).lam) <= 1e-8


def test_classify_case1():
    verdict = explorer.classify_dig(M.builtin("ab1"))
    assert verdict.case == "Case1"
    assert verdict.dig_possible and verdict.all_sinks
    assert verdict.m_star == pytest.approx(5.0 / 9.0, abs=1e-8)


def test_classify_case2():
    verdict = explorer.classify_dig(M.builtin("ab_mstar_inf"))
    assert verdict.case == "Case2"
    assert verdict.dig_possible


def test_classify_not_all_sinks():
    growth = M.PeriodicMatrixFunction.constant(np.diag([0.2, -0.5]))
    migration = M.PeriodicMatrixFunction.constant([[-1.0, 1.0], [1.0, -1.0]])
    mdl = M.validated(M.PatchModel(2, growth, migration))
    verdict = explorer.classify_dig(mdl)
    assert verdict.case == "NotAllSinks"
    assert not verdict.dig_possible


def test_classify_chi_nonpositive():
    growth = M.PeriodicMatrixFunction.constant(np.diag([-0.4, -0.6]))
    migration = M.PeriodicMatrixFunction.constant([[-1.0, 1.0], [1.0, -1.0]])
    mdl = M.validated(M.PatchModel(2, growth, migration))
    verdict = explorer.classify_dig(mdl)
    assert not verdict.dig_possible
    assert verdict.case == "ChiNonpositive"


def test_classify_reducible_empirical():
    verdict = explorer.classify_dig(M.builtin("unidir_favorable"),
                                    sweep_resolution=24)
    assert verdict.case == "ReducibleUnknown"
    assert verdict.empirical["growth_found"]


def test_monotonicity_ab1_increasing():
    report = explorer.monotonicity_scan(M.builtin("ab1"), [0.1, 0.3, 0.5],
                                        np.geomspace(0.5, 200.0, 8))
    assert all(entry["monotone_increasing"] for entry in report.values())


def test_monotonicity_ab2s_large_m_decreasing():
    report = explorer.monotonicity_scan(M.builtin("ab2s"), [3.0],
                                        np.geomspace(0.5, 200.0, 8))
    assert report[3.0]["monotone_decreasing"]
    assert not report[3.0]["monotone_increasing"]


def test_monotonicity_fainshil_non_monotone():
    report = explorer.monotonicity_scan(M.builtin("fainshil(0.1,0.1)"),
                                        [1.0], [0.2, 1.0, 50.0])
    entry = report[1.0]
    assert not entry["monotone_increasing"]
    assert not entry["monotone_decreasing"]
    # rises to a positive hump then falls back below zero
    assert entry["lambda"][1] > max(entry["lambda"][0], entry["lambda"][2])


def test_max_lambda_over_T_matches_limit_for_monotone_model():
    mdl = M.builtin("ab1")
    best = explorer.max_lambda_over_T(mdl, 0.3, (0.5, 2000.0), samples=100)
    assert best == pytest.approx(asymptotics.limit_Tinf(mdl, 0.3), abs=1e-3)

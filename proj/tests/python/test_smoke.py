"""Smoke tests for the python module: shapes, oracles, error mapping.

Plain asserts on purpose — the suite runs under ctest with no test framework
on the python side.
"""

import math

import numpy as np

import bsvie


def test_grid_and_paths():
    grid = bsvie.TimeGrid(1.0, 8)
    assert grid.steps == 8
    assert grid.dt == 0.125
    assert grid.time(4) == 0.5
    assert len(grid.times()) == 9

    ens = bsvie.PathEnsemble.sample(grid, 64, 2, 7)
    assert ens.paths == 64 and ens.dim == 2 and ens.steps == 8 and ens.seed == 7

    states = ens.states()
    incs = ens.increments()
    assert states.shape == (64, 9, 2)
    assert incs.shape == (64, 8, 2)
    # States start at zero and telescope the stored increments exactly.
    assert np.all(states[:, 0, :] == 0.0)
    assert np.array_equal(states[:, 1:, :], np.cumsum(incs, axis=1))

    again = bsvie.sample_paths(grid, 64, 2, 7)
    assert np.array_equal(again.states(), states)
    other = bsvie.sample_paths(grid, 64, 2, 8)
    assert not np.array_equal(other.states(), states)


def test_solver_constant_claim():
    grid = bsvie.TimeGrid(1.0, 8)
    ens = bsvie.PathEnsemble.sample(grid, 256, 1, 1)
    est = bsvie.picard_solve(
        bsvie.GeneratorSpec.zero(), bsvie.TerminalSpec.constant(5.0), ens, bsvie.BasisSpec()
    )
    assert est.y.shape == (256, 9)
    assert est.z.shape == (256, 9, 8, 1)
    assert np.max(np.abs(est.y - 5.0)) <= 1e-12
    assert abs(est.y0 - 5.0) <= 1e-12
    assert est.report.converged and est.report.iterations <= 2

    residuals = bsvie.m_condition_residuals(est, ens)
    assert len(residuals) == 9 and residuals[0] == 0.0

    cal = bsvie.martingale_calibration(ens, bsvie.BasisSpec())
    assert 0.0 < cal["rmse_y"] < 0.5 and 0.0 < cal["rmse_z"] < 2.0


def test_solver_linear_oracle():
    grid = bsvie.TimeGrid(1.0, 32)
    ens = bsvie.PathEnsemble.sample(grid, 512, 1, 102)
    opts = bsvie.PicardOptions()
    opts.tol = 1e-10
    opts.max_iter = 60
    est = bsvie.picard_solve(
        bsvie.GeneratorSpec.linear(0.1, 0.0),
        bsvie.TerminalSpec.constant(1.0),
        ens,
        bsvie.BasisSpec(),
        opts,
    )
    assert est.report.converged
    assert abs(est.y0 - math.exp(0.1)) <= 5e-3
    assert est.report.lipschitz.within_y and est.report.lipschitz.within_z


def test_error_mapping():
    grid = bsvie.TimeGrid(1.0, 8)
    ens = bsvie.PathEnsemble.sample(grid, 64, 1, 1)

    try:
        bad = bsvie.PicardOptions()
        bad.tol = 0.0
        bsvie.picard_solve(
            bsvie.GeneratorSpec.zero(), bsvie.TerminalSpec.constant(1.0), ens, bsvie.BasisSpec(), bad
        )
        raise AssertionError("tol = 0 must be rejected")
    except ValueError:
        pass

    try:
        diverge = bsvie.PicardOptions()
        diverge.beta = 0.0
        diverge.max_iter = 25
        bsvie.picard_solve(
            bsvie.GeneratorSpec.linear(6.0, 0.0),
            bsvie.TerminalSpec.constant(1.0),
            ens,
            bsvie.BasisSpec(),
            diverge,
        )
        raise AssertionError("sustained growth must be rejected")
    except RuntimeError:
        pass

    try:
        bsvie.TimeGrid(1.0, 0)
        raise AssertionError("empty grid must be rejected")
    except ValueError:
        pass


def test_bvie():
    table = bsvie.solve_bvie(bsvie.KernelSpec.constant(1.0), 1.0, bsvie.TimeGrid(1.0, 64))
    assert len(table) == 65
    assert abs(table[0] + math.e) <= 1e-3
    assert table[64] == -1.0

    # Python callables are accepted as kernels.
    general = bsvie.solve_bvie(
        bsvie.KernelSpec.general(lambda t, s: 0.8 * t * s + 0.1), 1.0, bsvie.TimeGrid(1.0, 32)
    )
    assert len(general) == 33 and all(v < 0.0 for v in general)

    d = bsvie.closed_form_translation(lambda u: 1.0, 1.0, 0.0, 1.0)
    assert abs(d + math.e) <= 1e-12


def test_risk_and_battery():
    grid = bsvie.TimeGrid(1.0, 16)
    ens = bsvie.PathEnsemble.sample(grid, 2000, 1, 11)
    basis = bsvie.BasisSpec()

    risk = bsvie.RiskGenerator.linear_form(0.1, 0.0)
    est = bsvie.rho(risk, bsvie.TerminalSpec.constant(1.0), ens, basis)
    assert abs(est.y0 + math.exp(0.1)) <= 5e-3  # positions are charged, so the sign flips

    rep = bsvie.coherence_report(bsvie.RiskGenerator.linear_form(0.1, 0.2), ens, basis)
    assert rep["all_pass"], rep
    assert {c["axiom"] for c in rep["checks"]} == {
        "past_independence",
        "monotonicity",
        "positive_homogeneity",
        "subadditivity",
        "translation",
    }
    assert rep["translation"]["compared_to_kernel"]

    tol = bsvie.default_axiom_tolerance(ens, basis)
    tc = bsvie.check_translation(risk, bsvie.TerminalSpec.constant(0.0), 1.0, ens, basis, tol)
    assert tc["check"]["pass"]
    assert abs(tc["shift_curve"][0] + math.exp(0.1)) <= 5e-3


def test_counterexample():
    grid = bsvie.TimeGrid(1.0, 16)
    ens = bsvie.PathEnsemble.sample(grid, 2000, 1, 11)
    basis = bsvie.BasisSpec()

    random_case = bsvie.sin_counterexample(1.0, ens, basis)
    assert random_case["random_at_mid"] and not random_case["certain_at_mid"]
    assert random_case["mid_variance"] > 5.0 * random_case["mid_standard_error"]
    assert random_case["z_proxy"] > 0.0
    assert random_case["variance"][-1] == 0.0

    sure_case = bsvie.sin_counterexample(0.0, ens, basis)
    assert sure_case["certain_at_mid"] and not sure_case["random_at_mid"]
    assert sure_case["mid_variance"] == 0.0


def test_threads_do_not_change_results():
    grid = bsvie.TimeGrid(1.0, 8)
    ens = bsvie.PathEnsemble.sample(grid, 512, 1, 3)
    args = (
        bsvie.GeneratorSpec.linear(0.2, 0.1),
        bsvie.TerminalSpec.call_on_w(0.0),
        ens,
        bsvie.BasisSpec(),
    )
    bsvie.set_thread_count(1)
    serial = bsvie.picard_solve(*args)
    bsvie.set_thread_count(8)
    threaded = bsvie.picard_solve(*args)
    bsvie.set_thread_count(1)
    assert np.array_equal(serial.y, threaded.y)
    assert np.array_equal(serial.z, threaded.z)


def main():
    tests = [
        test_grid_and_paths,
        test_solver_constant_claim,
        test_solver_linear_oracle,
        test_error_mapping,
        test_bvie,
        test_risk_and_battery,
        test_counterexample,
        test_threads_do_not_change_results,
    ]
    for fn in tests:
        fn()
        print(f"ok: {fn.__name__}")
    print(f"{len(tests)} python smoke tests passed")


if __name__ == "__main__":
    main()

"""Tests for the backward-induction solver and the tree variant."""

import math

import numpy as np
import pytest

from bsdelab.errors import (ParameterError, PicardDivergenceError,
                            UnsupportedDimensionError)
from bsdelab.genmodel import GeneratorModel, example_26, linear_drift_model, zero_model
from bsdelab.lattice import expectation_process
from bsdelab.solver import (BsdeProblem, SolverConfig, Terminal,
                            picard_residual_history, solve, solve_tree,
                            terminal_from_config)


def problem(terminal="b", model=None, horizon=1.0):
    return BsdeProblem(terminal_from_config(terminal, horizon),
                       model or zero_model(), horizon)


class TestTerminalBuilders:
    def test_known_kinds(self):
        b = np.array([-1.0, 0.0, 2.0])
        assert list(terminal_from_config("abs_b", 1.0)(b)) == [1.0, 0.0, 2.0]
        assert list(terminal_from_config({"kind": "b_plus", "value": 2.0}, 1.0)(b)) == \
            [1.0, 2.0, 4.0]

    def test_heavy_tail_truncation_recorded(self):
        term = terminal_from_config({"kind": "exp_sq", "delta": 0.5, "cap": 100.0}, 1.0)
        vals = term(np.array([0.0, 10.0]))
        assert vals[0] == 1.0 and vals[1] == 100.0
        assert term.meta == {"cap": 100.0, "delta": 0.5}
        sol = solve(BsdeProblem(term, zero_model(), 1.0), SolverConfig(steps=30))
        assert sol.diagnostics["terminal_truncation"] == {"cap": 100.0, "delta": 0.5}

    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            terminal_from_config("nope", 1.0)

    def test_exp_sq_needs_positive_delta(self):
        with pytest.raises(ParameterError):
            terminal_from_config({"kind": "exp_sq", "delta": 0.0}, 1.0)


class TestSolveOracles:
    def test_terminal_layer_bitwise(self):
        sol = solve(problem("sin_b"), SolverConfig(steps=17))
        lat = sol.lattice
        np.testing.assert_array_equal(sol.Y.layer(17), np.sin(lat.node_values(17)))

    def test_zero_generator_reduces_to_conditional_expectation(self):
        # adding the exactly-zero drift must reproduce the averaging operator
        sol = solve(problem("b_squared"), SolverConfig(steps=12))
        ref = expectation_process(sol.lattice,
                                  sol.lattice.node_values(12) ** 2)
        for i in range(13):
            np.testing.assert_array_equal(sol.Y.layer(i), ref.layer(i))

    @pytest.mark.parametrize("N", [1, 10, 37, 64, 100])
    def test_martingale_square_root_value(self, N):
        sol = solve(problem("b_squared"), SolverConfig(steps=N))
        assert sol.root == pytest.approx(1.0, abs=1e-13)

    def test_brownian_terminal_slope(self):
        sol = solve(problem("b"), SolverConfig(steps=9))
        assert sol.root == pytest.approx(0.0, abs=1e-14)
        for i in range(9):
            np.testing.assert_allclose(sol.Z.layer(i), 1.0, rtol=1e-12)

    def test_linear_drift_closed_form(self):
        pr = problem("const:1", model=linear_drift_model(0.5))
        got = solve(pr, SolverConfig(steps=200)).root
        assert got == pytest.approx(math.exp(0.5), rel=2e-3)

    def test_linearity_superposition(self):
        model = GeneratorModel(
            "linear_yz", lambda t, b, y, z: 0.3 * y + 0.2 * z,
            lambda t, b: np.zeros_like(b), z_dependent=True)
        cfg = SolverConfig(steps=40, picard_tol=1e-14, picard_max_iter=200)

        def run(terminal):
            return solve(BsdeProblem(Terminal(terminal, "t"), model, 1.0), cfg)

        s1, s2 = run(lambda b: b), run(lambda b: b * b)
        s12 = run(lambda b: b + b * b)
        scale = max(np.max(np.abs(v)) for v in s12.Y.values)
        for i in range(41):
            gap = s12.Y.layer(i) - s1.Y.layer(i) - s2.Y.layer(i)
            assert np.max(np.abs(gap)) <= 1e-12 * max(scale, 1.0)

    def test_monotone_backward_step_explicit_exact(self):
        cfg = SolverConfig(steps=60, scheme="explicit")
        lo = solve(problem("b", model=linear_drift_model(0.2)), cfg)
        hi = solve(BsdeProblem(terminal_from_config({"kind": "b_plus", "value": 0.5}, 1.0),
                               linear_drift_model(0.2).shifted(0.1), 1.0), cfg)
        for i in range(61):
            assert np.all(hi.Y.layer(i) - lo.Y.layer(i) >= 0.0)

    def test_monotone_backward_step_implicit_within_picard_tolerance(self):
        cfg = SolverConfig(steps=60, picard_tol=1e-12)
        lo = solve(problem("b", model=linear_drift_model(0.2)), cfg)
        hi = solve(BsdeProblem(terminal_from_config({"kind": "b_plus", "value": 0.5}, 1.0),
                               linear_drift_model(0.2).shifted(0.1), 1.0), cfg)
        for i in range(61):
            assert np.all(hi.Y.layer(i) - lo.Y.layer(i) >= -2e-12)


class TestPicard:
    def test_zero_generator_single_iteration(self):
        hist = picard_residual_history(problem("b_squared"), SolverConfig(steps=10))
        assert all(len(h["residuals"]) == 1 for h in hist)
        assert all(h["residuals"][0] == 0.0 for h in hist)

    def test_contraction_factor_tracks_lipschitz_dt(self):
        # residuals decay geometrically at about L * dt
        model = linear_drift_model(2.0)
        hist = picard_residual_history(problem("const:1", model=model),
                                       SolverConfig(steps=20, picard_tol=1e-13,
                                                    picard_max_iter=100))
        res = hist[0]["residuals"]
        ratios = [b / a for a, b in zip(res, res[1:]) if a > 1e-300 and b > 1e-300]
        assert ratios, "expected at least two iterations"
        for r in ratios[:-1]:
            assert r == pytest.approx(2.0 * 0.05, rel=0.2)

    def test_divergence_error(self):
        with pytest.raises(PicardDivergenceError):
            solve(problem("const:1", model=linear_drift_model(50.0)),
                  SolverConfig(steps=10))

    def test_history_preserved_in_step_order(self):
        hist = picard_residual_history(problem("b"), SolverConfig(steps=5))
        assert [h["step"] for h in hist] == [0, 1, 2, 3, 4]


class TestGuards:
    def test_dimension_guard(self):
        pr = BsdeProblem(terminal_from_config("b", 1.0), zero_model(), 1.0, dim=2)
        with pytest.raises(UnsupportedDimensionError):
            solve(pr, SolverConfig(steps=4))
        with pytest.raises(UnsupportedDimensionError):
            solve_tree(pr, SolverConfig(steps=4))

    def test_path_terminal_rejected_by_lattice_solver(self):
        pr = BsdeProblem(Terminal(lambda paths: paths[:, -1], "path", kind="path"),
                         zero_model(), 1.0)
        with pytest.raises(ParameterError):
            solve(pr, SolverConfig(steps=4))

    def test_tree_size_guard(self):
        with pytest.raises(ParameterError):
            solve_tree(problem("b"), SolverConfig(steps=21))

    def test_nonfinite_terminal_rejected(self):
        pr = BsdeProblem(Terminal(lambda b: np.where(b > 0, np.inf, 0.0), "blow"),
                         zero_model(), 1.0)
        with pytest.raises(ParameterError):
            solve(pr, SolverConfig(steps=8))


class TestTreeSolver:
    def test_matches_lattice_for_markov_terminal(self):
        pr = problem("b_squared", model=linear_drift_model(0.3))
        a = solve(pr, SolverConfig(steps=10)).root
        b = solve_tree(pr, SolverConfig(steps=10)).root
        assert b == pytest.approx(a, rel=1e-12)

    def test_running_max_path_functional(self):
        # E[max_i B_i] by direct enumeration over signed steps
        import itertools

        N = 8
        term = Terminal(lambda paths: np.max(paths, axis=1), "running max", kind="path")
        got = solve_tree(BsdeProblem(term, zero_model(), 1.0), SolverConfig(steps=N)).root
        s = math.sqrt(1.0 / N)
        acc = 0.0
        for path in itertools.product((-1, 1), repeat=N):
            walk, here = 0.0, 0.0
            for st_ in path:
                here += st_ * s
                walk = max(walk, here)
            acc += walk
        assert got == pytest.approx(acc / 2.0**N, rel=1e-12)

    def test_example_model_runs_on_tree(self):
        pr = BsdeProblem(terminal_from_config("sin_b", 1.0), example_26(), 1.0)
        st_ = solve_tree(pr, SolverConfig(steps=10))
        lt = solve(pr, SolverConfig(steps=10))
        assert st_.root == pytest.approx(lt.root, rel=1e-12)


class TestSolutionReports:
    def test_summary_fields(self):
        sol = solve(problem("sin_b", model=example_26()), SolverConfig(steps=30))
        s = sol.summary(p=0.5)
        assert s["model"] == "example26"
        assert s["terminal"] == "sin(B_T)"
        assert s["norms"]["p"] == 0.5
        assert s["norms"]["Y_sp_norm"] > 0
        assert s["config"]["steps"] == 30

    def test_f_integral_forward_average(self):
        # f == 1: the conditional integral is exactly t at every node
        sol = solve(problem("b", model=GeneratorModel(
            "zero_f1", lambda t, b, y, z: np.zeros_like(y),
            lambda t, b: np.ones_like(b), z_dependent=False)), SolverConfig(steps=20))
        for i in range(21):
            np.testing.assert_allclose(sol.f_integral.layer(i), i * sol.lattice.dt,
                                       rtol=1e-12, atol=1e-15)

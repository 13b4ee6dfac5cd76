from __future__ import annotations

import csv

import numpy as np
import pytest

from conftest import brute_cond_expect, lattice_backend
from mfbsde import generators as G
from mfbsde import terminals
from mfbsde.condexp import RegressionBackend
from mfbsde.errors import ConfigurationError, InvalidArgument
from mfbsde.generators import evaluate
from mfbsde.kernel import build_grid, simulate_paths
from mfbsde.picard import (
    gamma_step,
    iterate_distance,
    make_solution,
    picard_solve,
    shift_terminal,
    write_solution_csv,
    zero_solution,
)
from mfbsde.terminals import TerminalValue


def identity_terminal(bound=10.0):
    return TerminalValue(lambda s: s[:, :1].copy(), bound, 1, "identity")


def test_zero_drift_leaves_terminal_unchanged():
    b = lattice_backend(8)
    xi = terminals.make_tanh(0.01)
    shifted = shift_terminal(xi, G.make_quadratic_z(c=1.0), b.grid)
    s = b.state(8)
    np.testing.assert_array_equal(shifted.evaluate(s), xi.evaluate(s))


def test_constant_zero_drift_adds_its_integral():
    b = lattice_backend(4, T=2.0)
    gen = G.make_quadratic_z(c=1.0, offset=0.25, zero_drift_integral_bound=0.5)
    shifted = shift_terminal(terminals.make_constant(0.0), gen, b.grid)
    np.testing.assert_allclose(shifted.evaluate(b.state(4)), 0.5, rtol=1e-15)
    assert shifted.bound == 0.5


def test_zero_data_gives_zero_shift():
    b = lattice_backend(4)
    shifted = shift_terminal(terminals.make_constant(0.0), G.make_zero(), b.grid)
    assert np.all(shifted.evaluate(b.state(4)) == 0.0)


def test_gamma_of_constant_terminal():
    b = lattice_backend(8)
    xi = terminals.make_constant(0.3)
    out = gamma_step(zero_solution(b, 1, 1), shift_terminal(xi, G.make_zero(), b.grid), G.make_zero())
    for k in range(9):
        assert np.all(out.Y[b.mask(k), k] == 0.3)
    assert np.all(out.Z == 0.0)


def test_gamma_of_brownian_terminal():
    b = lattice_backend(8)
    out = gamma_step(zero_solution(b, 1, 1), identity_terminal(), G.make_zero())
    for k in range(9):
        m = b.mask(k)
        np.testing.assert_allclose(out.Y[m, k, 0], b.state(k)[m, 0], atol=1e-15)
    for k in range(8):
        np.testing.assert_allclose(out.Z[b.mask(k), k, 0, 0], 1.0, rtol=1e-13)


def test_gamma_from_zero_is_plain_conditional_expectation():
    # with zero input only f(t,0,0,0,0) enters, and it cancels against the shift
    N = 6
    b = lattice_backend(N)
    g = lambda x: np.sin(2 * x) + 0.1 * x**2
    xi = TerminalValue(lambda s: g(s[:, :1]), 2.0, 1, "custom")
    gen = G.make_signed_quadratic(cz=1.0, offset=0.01, zero_drift_integral_bound=0.01)
    out = gamma_step(zero_solution(b, 1, 1), shift_terminal(xi, gen, b.grid), gen)
    for k in range(N + 1):
        brute = brute_cond_expect(N, k, lambda w: g(w[-1]) + 0.01)
        m = b.mask(k)
        expected = [brute[round(float(w), 9)] - 0.01 * b.grid.nodes[k] for w in b.state(k)[m, 0]]
        np.testing.assert_allclose(out.Y[m, k, 0], expected, atol=1e-15)
        np.testing.assert_allclose(out.Y_shifted[m, k, 0], np.array(expected) + 0.01 * b.grid.nodes[k], atol=1e-15)


def test_distance_examples():
    b = lattice_backend(4)
    a = zero_solution(b, 1, 1)
    assert iterate_distance(a, a) == 0.0
    Y = np.zeros_like(a.Y)
    Y[:] = 0.2
    shifted = make_solution(b, Y, a.Z)
    assert iterate_distance(shifted, a) == pytest.approx(0.04, rel=1e-15)
    Z = np.full_like(a.Z, 0.5)
    moved = make_solution(b, a.Y, Z)
    # |Z|^2 integrated over the whole horizon, T = 1
    assert iterate_distance(moved, a) == pytest.approx(0.25, rel=1e-14)


def test_distance_shape_check():
    with pytest.raises(InvalidArgument):
        iterate_distance(zero_solution(lattice_backend(4), 1, 1), zero_solution(lattice_backend(5), 1, 1))


def test_zero_generator_constant_terminal_one_iteration():
    b = lattice_backend(32)
    sol, rep = picard_solve(terminals.make_constant(0.005), G.make_zero(), b)
    assert rep.converged and rep.iterations == 1 and rep.applications == 2
    assert rep.final_residual == 0.0
    assert np.all(sol.Y[b.weights > 0] == 0.005)
    assert np.all(sol.Z == 0.0)


@pytest.mark.parametrize("N", [1, 4, 32])
def test_zero_generator_matches_enumeration(N):
    b = lattice_backend(N)
    gx = lambda x: np.cos(x) * 0.01
    xi = TerminalValue(lambda s: gx(s[:, :1]), 0.01, 1, "custom")
    sol, rep = picard_solve(xi, G.make_zero(), b)
    assert rep.converged
    if N <= 4:
        for k in range(N + 1):
            brute = brute_cond_expect(N, k, lambda w: gx(w[-1]))
            m = b.mask(k)
            np.testing.assert_allclose(sol.Y[m, k, 0], [brute[round(float(w), 9)] for w in b.state(k)[m, 0]], atol=1e-16)
    # E_t[cos W_T] = cos(W_t) exp(-(T - t)/2) on the limit; at t = 0 the lattice value is cos(h)^N
    assert sol.Y0[0] == pytest.approx(0.01 * np.cos(np.sqrt(1.0 / N)) ** N, rel=1e-12)


def test_terminal_slice_is_exact():
    b = lattice_backend(16)
    xi = terminals.make_tanh(0.004)
    gen = G.make_signed_quadratic(cy=-0.5, cz=1.0, offset=0.002, zero_drift_integral_bound=0.002)
    sol, _ = picard_solve(xi, gen, b)
    m = b.mask(16)
    np.testing.assert_array_equal(sol.Y[m, 16], xi.evaluate(b.state(16)[m]))


@pytest.mark.parametrize(
    "gen",
    [
        G.make_sum_of_squares(C=2.0),
        G.make_signed_quadratic(cy=-0.5, cybar=0.5, cz=1.0, offset=0.002, zero_drift_integral_bound=0.002),
        G.make_linear_mean_field(a=0.5),
    ],
    ids=lambda g: g.name,
)
def test_fixed_point_solves_discrete_equation(gen):
    b = lattice_backend(32)
    sol, rep = picard_solve(terminals.make_tanh(0.004), gen, b, tol=1e-26)
    assert rep.converged
    dt = b.grid.dt
    for k in range(32):
        m = b.mask(k)
        f = evaluate(gen, b.grid.nodes[k], sol.Y[:, k], sol.meanY[k], sol.Z[:, k], sol.meanZ[k])
        resid = sol.Y[:, k] - b.cond_expect(sol.Y[:, k + 1], k) - f * dt
        assert np.abs(resid[m]).max() < 1e-13
    # one more application is within tolerance of the returned iterate
    again = gamma_step(sol, shift_terminal(terminals.make_tanh(0.004), gen, b.grid), gen)
    assert iterate_distance(again, sol) <= 1e-26


def test_mean_field_linear_matches_closed_form():
    b = lattice_backend(64)
    sol, _ = picard_solve(terminals.make_constant(0.01), G.make_linear_mean_field(a=0.5), b)
    assert sol.Y0[0] == pytest.approx(0.01 * np.exp(0.5), rel=1e-2)
    # exact discrete value of the implicit recursion, once iterated to rounding level
    sol, _ = picard_solve(terminals.make_constant(0.01), G.make_linear_mean_field(a=0.5), b, tol=1e-26)
    assert sol.Y0[0] == pytest.approx(0.01 * (1 - 0.5 / 64) ** -64, rel=1e-9)


def test_cole_hopf_matches_closed_form():
    b = lattice_backend(64)
    xi = terminals.make_digital(0.01)
    sol, _ = picard_solve(xi, G.make_quadratic_z(c=1.0), b, tol=1e-20)
    exact = 0.5 * np.log(0.5 + 0.5 * np.exp(0.02))
    assert sol.Y0[0] == pytest.approx(exact, rel=1e-2)


def test_grid_refinement_order():
    errs = []
    Ns = [8, 16, 32, 64, 128]
    for N in Ns:
        sol, _ = picard_solve(terminals.make_constant(0.01), G.make_linear_mean_field(a=0.5), lattice_backend(N), tol=1e-24)
        errs.append(abs(sol.Y0[0] - 0.01 * np.exp(0.5)))
    slope = -np.polyfit(np.log(Ns), np.log(errs), 1)[0]
    assert slope >= 0.8


def test_bad_solver_arguments():
    b = lattice_backend(4)
    xi, gen = terminals.make_constant(0.0), G.make_zero()
    with pytest.raises(InvalidArgument):
        picard_solve(xi, gen, b, tol=0.0)
    with pytest.raises(InvalidArgument):
        picard_solve(xi, gen, b, max_iter=0)
    with pytest.raises(InvalidArgument):
        picard_solve(terminals.make_constant(0.0, m=2), gen, b)
    with pytest.raises(InvalidArgument):
        picard_solve(xi, G.make_zero(d=2), b)


def test_understated_terminal_bound():
    b = lattice_backend(4)
    xi = terminals.make_constant(0.002, bound=0.001)
    with pytest.raises(ConfigurationError):
        picard_solve(xi, G.make_zero(), b)


def test_non_convergence_is_reported_not_raised():
    b = lattice_backend(16)
    sol, rep = picard_solve(terminals.make_tanh(2.0), G.make_sum_of_squares(), b, max_iter=3, tol=1e-30)
    assert not rep.converged
    assert rep.status in ("max-iter", "diverged")
    assert rep.applications <= 3
    assert sol is not None


def test_divergence_detected():
    b = lattice_backend(16)
    _, rep = picard_solve(terminals.make_constant(30.0), G.make_sum_of_squares(), b, max_iter=50)
    assert rep.status == "diverged" and not rep.converged


def test_ratios_skip_vanishing_steps():
    b = lattice_backend(8)
    _, rep = picard_solve(terminals.make_tanh(0.004), G.make_quadratic_z(c=1.0), b, tol=1e-40, max_iter=40)
    for j, r in enumerate(rep.ratios):
        if rep.distances[j] <= 1e-30:
            assert r is None


def test_regression_backend_multidimensional():
    grid = build_grid(1.0, 8)
    b = RegressionBackend(simulate_paths(grid, 3000, 2, seed=3), degree=2)
    gen = G.make_sum_of_squares(m=2, d=2, C=2.0)
    sol, rep = picard_solve(terminals.make_tanh(0.002, m=2), gen, b, tol=1e-12)
    assert rep.converged
    assert sol.Y.shape == (3000, 9, 2) and sol.Z.shape == (3000, 8, 2, 2)
    assert sol.meanZ.shape == (8, 2, 2)
    assert sol.y0_stderr > 0


def test_regression_results_ignore_thread_count():
    grid = build_grid(1.0, 8)
    runs = []
    for threads in (1, 4):
        b = RegressionBackend(simulate_paths(grid, 2000, 1, seed=8, threads=threads))
        sol, _ = picard_solve(terminals.make_tanh(0.004), G.make_quadratic_z(c=1.0), b, tol=1e-14)
        runs.append(sol.Y.tobytes() + sol.Z.tobytes())
    assert runs[0] == runs[1]


def test_solution_csv(tmp_path):
    b = lattice_backend(4)
    sol, _ = picard_solve(terminals.make_constant(0.005), G.make_zero(), b)
    path = tmp_path / "s.csv"
    write_solution_csv(sol, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["time", "meanY0", "meanZ0_0", "supY_running"]
    assert len(rows) == 6
    assert float(rows[1][1]) == 0.005 and rows[-1][2] == ""
    assert float(rows[-1][0]) == 1.0

import math
import random

import pytest

from issgd.exceptions import ConvergenceError, InputError, StabilityError
from issgd.linalg import Matrix, frobenius_norm, symmetric_eigenvalues
from issgd.lyapunov import (
    expm,
    integral_lyapunov,
    kleinman_newton,
    solve_dual_lyapunov,
    solve_lyapunov,
)
from support import mat, rand_hurwitz, rand_mat, rand_sym


class TestSolveLyapunov:
    def test_scalar(self):
        sol = solve_lyapunov(mat([[-1.0]]), mat([[2.0]]))
        assert sol.P[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert sol.residual_norm <= 1e-10

    def test_diagonal_identity(self):
        sol = solve_lyapunov(Matrix.identity(3) * -1.0, Matrix.identity(3))
        for i in range(3):
            for j in range(3):
                want = 0.5 if i == j else 0.0
                assert sol.P[i, j] == pytest.approx(want, abs=1e-12)

    def test_not_hurwitz(self):
        with pytest.raises(StabilityError):
            solve_lyapunov(mat([[0.0]]), mat([[1.0]]))

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            solve_lyapunov(Matrix.identity(2) * -1.0, Matrix.identity(3))

    def test_asymmetric_q_rejected(self):
        with pytest.raises(InputError):
            solve_lyapunov(Matrix.identity(2) * -1.0, mat([[0.0, 1.0], [0.0, 0.0]]))

    def test_matches_quadrature_oracle(self):
        rng = random.Random(23)
        for _ in range(12):
            n = rng.randint(2, 4)
            a = rand_hurwitz(rng, n)
            q = rand_sym(rng, n)
            sol = solve_lyapunov(a, q)
            assert sol.residual_norm <= 1e-8 * (1.0 + frobenius_norm(q))
            assert frobenius_norm(sol.P - sol.P.T) <= 1e-10
            oracle = integral_lyapunov(a, q)
            assert frobenius_norm(sol.P - oracle) <= 1e-6

    def test_psd_forcing_gives_psd_solution(self):
        rng = random.Random(29)
        for _ in range(20):
            n = rng.randint(2, 5)
            a = rand_hurwitz(rng, n)
            g = rand_mat(rng, n, n)
            q = (g @ g.T).symmetrized()
            p = solve_lyapunov(a, q).P
            assert symmetric_eigenvalues(p)[0] >= -1e-10


class TestDualLyapunov:
    def test_scalar_gramian(self):
        # closed loop -K with K = 2: Y = 1/(2K) = 0.25
        sol = solve_dual_lyapunov(mat([[-2.0]]), Matrix.identity(1))
        assert sol.P[0, 0] == pytest.approx(0.25, abs=1e-14)

    def test_diagonal(self):
        sol = solve_dual_lyapunov(Matrix.identity(3) * -2.0, Matrix.identity(3))
        assert sol.P[0, 0] == pytest.approx(0.25, abs=1e-13)

    def test_trace_duality(self):
        # Tr(M Y_N) == Tr(N P_M) across both orientations
        rng = random.Random(31)
        for _ in range(500):
            n = rng.randint(1, 6)
            a = rand_hurwitz(rng, n)
            m = rand_sym(rng, n)
            nn = rand_sym(rng, n)
            p = solve_lyapunov(a, m, assume_hurwitz=True).P
            y = solve_dual_lyapunov(a, nn, assume_hurwitz=True).P
            assert abs((m @ y).trace() - (nn @ p).trace()) <= 1e-8

    def test_monotonicity_in_forcing(self):
        # Q1 >= Q2 implies P1 >= P2
        rng = random.Random(37)
        for _ in range(50):
            n = rng.randint(2, 5)
            a = rand_hurwitz(rng, n)
            q2 = rand_sym(rng, n)
            g = rand_mat(rng, n, n)
            q1 = (q2 + g @ g.T).symmetrized()
            p1 = solve_lyapunov(a, q1).P
            p2 = solve_lyapunov(a, q2).P
            assert symmetric_eigenvalues(p1 - p2)[0] >= -1e-9


class TestExpm:
    def test_zero(self):
        e = expm(Matrix.zeros(3, 3))
        assert frobenius_norm(e - Matrix.identity(3)) <= 1e-15

    def test_diagonal(self):
        e = expm(Matrix.diag([1.0, -2.0]))
        assert e[0, 0] == pytest.approx(math.e, rel=1e-13)
        assert e[1, 1] == pytest.approx(math.exp(-2.0), rel=1e-13)

    def test_additivity_on_commuting(self):
        rng = random.Random(41)
        a = rand_mat(rng, 3, 3)
        e1 = expm(a * 0.7) @ expm(a * 0.3)
        e2 = expm(a)
        assert frobenius_norm(e1 - e2) <= 1e-12


class TestKleinmanNewton:
    def test_scalar_example(self, one_d):
        plant, _ = one_d
        sol = kleinman_newton(plant.A, plant.B, plant.Q, plant.R, mat([[2.0]]))
        assert sol.K_star[0, 0] == pytest.approx(1.0, abs=1e-10)
        assert sol.P_star[0, 0] == pytest.approx(1.0, abs=1e-10)
        assert sol.final_residual <= 1e-8

    def test_scalar_closed_form(self):
        sol = kleinman_newton(
            mat([[1.0]]), mat([[1.0]]), Matrix.identity(1), Matrix.identity(1), mat([[3.0]])
        )
        root = 1.0 + math.sqrt(2.0)
        assert sol.P_star[0, 0] == pytest.approx(root, abs=1e-9)
        assert sol.K_star[0, 0] == pytest.approx(root, abs=1e-9)

    def test_optimal_start_fixed_point(self, one_d):
        plant, _ = one_d
        first = kleinman_newton(plant.A, plant.B, plant.Q, plant.R, mat([[2.0]]))
        again = kleinman_newton(plant.A, plant.B, plant.Q, plant.R, first.K_star)
        assert again.iterations <= 1
        assert abs(again.K_star[0, 0] - first.K_star[0, 0]) <= 1e-10

    def test_costs_nonincreasing(self):
        rng = random.Random(43)
        from issgd import problems

        for seed in range(5):
            sample = problems.random_plant(rng.randint(2, 4), 1, seed)
            are = sample.opt.are
            for earlier, later in zip(are.costs, are.costs[1:]):
                assert later <= earlier + 1e-9

    def test_gain_consistent_with_value(self, small_plant):
        # the returned gain is exactly R^-1 B^T P_star
        from issgd.linalg import solve_linear

        plant = small_plant.plant
        are = small_plant.opt.are
        want = solve_linear(plant.R, plant.B.T @ are.P_star)
        assert frobenius_norm(are.K_star - want) <= 1e-10
        assert symmetric_eigenvalues(are.P_star)[0] > 0.0

    def test_not_stabilizing_start(self):
        with pytest.raises(StabilityError):
            kleinman_newton(
                mat([[1.0]]), mat([[1.0]]), Matrix.identity(1), Matrix.identity(1), mat([[0.5]])
            )

    def test_iteration_budget(self):
        with pytest.raises(ConvergenceError) as err:
            kleinman_newton(
                mat([[1.0]]),
                mat([[1.0]]),
                Matrix.identity(1),
                Matrix.identity(1),
                mat([[50.0]]),
                max_iter=2,
            )
        assert err.value.last_residual is not None

import math
import random

import pytest

from issgd import lqr, problems
from issgd.exceptions import DomainError, InputError, StabilityError, StabilizabilityError
from issgd.linalg import Matrix, frobenius_norm, spectral_norm, symmetric_eigenvalues
from support import mat, rand_mat


K2 = Matrix.from_rows([[2.0]])


@pytest.fixture(scope="module")
def plant_1d(one_d):
    return one_d[0]


@pytest.fixture(scope="module")
def opt_1d(plant_1d):
    return lqr.optimal_solution(plant_1d, K2)


class TestPlantAndGain:
    def test_plant_validation(self):
        ident = Matrix.identity(2)
        with pytest.raises(InputError):
            lqr.Plant(A=Matrix.zeros(2, 3), B=ident, Q=ident, R=ident)
        with pytest.raises(InputError):
            lqr.Plant(A=ident, B=ident, Q=mat([[1.0, 0.2], [0.0, 1.0]]), R=ident)
        with pytest.raises(InputError):
            lqr.Plant(A=ident, B=ident, Q=Matrix.diag([1.0, -0.5]), R=ident)

    def test_gain_margin(self, plant_1d):
        g = lqr.Gain.for_plant(plant_1d, K2)
        assert g.hurwitz_margin == pytest.approx(2.0, abs=1e-12)
        assert g.is_admissible()
        assert not lqr.Gain.for_plant(plant_1d, mat([[-1.0]])).is_admissible()


class TestClosedFormsOneD:
    def test_lyapunov_pair(self, plant_1d):
        pair = lqr.lyapunov_pair(plant_1d, K2)
        assert pair.P_K[0, 0] == pytest.approx(1.25, abs=1e-12)
        assert pair.Y_K[0, 0] == pytest.approx(0.25, abs=1e-12)

    def test_pair_at_optimum(self, plant_1d, opt_1d):
        pair = lqr.lyapunov_pair(plant_1d, opt_1d.K_star)
        assert pair.P_K[0, 0] == pytest.approx(1.0, abs=1e-10)
        assert pair.Y_K[0, 0] == pytest.approx(0.5, abs=1e-10)

    def test_cost_gradients(self, plant_1d, opt_1d):
        assert lqr.cost(plant_1d, K2) == pytest.approx(1.25, abs=1e-12)
        assert lqr.gradient(plant_1d, K2)[0, 0] == pytest.approx(0.375, abs=1e-12)
        assert lqr.natural_gradient(plant_1d, K2)[0, 0] == pytest.approx(1.5, abs=1e-12)
        assert lqr.gauss_newton_direction(plant_1d, K2)[0, 0] == pytest.approx(-0.75, abs=1e-12)
        assert abs(lqr.gradient(plant_1d, opt_1d.K_star)[0, 0]) <= 1e-8
        assert abs(lqr.natural_gradient(plant_1d, opt_1d.K_star)[0, 0]) <= 1e-8
        assert abs(lqr.gauss_newton_direction(plant_1d, opt_1d.K_star)[0, 0]) <= 1e-8

    def test_lipschitz_value(self, plant_1d, opt_1d):
        assert lqr.lipschitz_bound(plant_1d, 1.25, opt_1d) == pytest.approx(
            49.375, abs=1e-10
        )

    def test_lipschitz_domain_error(self, plant_1d, opt_1d):
        with pytest.raises(DomainError):
            lqr.lipschitz_bound(plant_1d, 0.5, opt_1d)

    def test_lipschitz_monotone(self, plant_1d, opt_1d):
        hs = [1.0, 1.25, 2.0, 5.0, 20.0]
        vals = [lqr.lipschitz_bound(plant_1d, h, opt_1d) for h in hs]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_gain_norm_bound(self, plant_1d):
        assert lqr.gain_norm_bound(plant_1d, 1.25) == pytest.approx(2.5, abs=1e-12)
        assert lqr.gain_norm_bound(plant_1d, 1e-12) <= 1e-10

    def test_certificate_values(self, plant_1d, opt_1d):
        cert = lqr.pl_certificate(plant_1d, opt_1d)
        assert cert.b1 == pytest.approx(2.0, abs=1e-9)
        assert cert.b2 == pytest.approx(0.5, abs=1e-9)
        assert cert.disturbance_sup == pytest.approx(0.5, abs=1e-9)
        assert cert.a1 == pytest.approx(2.0, abs=1e-12)
        assert cert.a2 == 0.0
        assert cert.c1 == pytest.approx(1.25, abs=1e-9)
        assert cert.c2 == pytest.approx(1.5, abs=1e-12)
        # spot check the K-PL inequality at K = 2
        alpha_val = 0.25 / (cert.b1 * 0.25 + cert.b2)
        assert alpha_val == pytest.approx(0.25, abs=1e-9)
        assert alpha_val <= 0.375

    def test_c_of_k(self, plant_1d, opt_1d):
        assert lqr.c_of_K(plant_1d, K2, opt_1d) == pytest.approx(1.625, abs=1e-9)

    def test_non_stabilizing_rejected(self, plant_1d):
        for op in (lqr.cost, lqr.gradient, lqr.natural_gradient, lqr.gauss_newton_direction):
            with pytest.raises(StabilityError):
                op(plant_1d, mat([[-0.5]]))


class TestHessian:
    def test_at_optimum_reduces(self, plant_1d, opt_1d):
        dk = mat([[1.3]])
        h = lqr.hessian_action(plant_1d, opt_1d.K_star, dk)
        want = 2.0 * 1.3 * 0.5  # 2 R dK Y*
        assert h[0, 0] == pytest.approx(want, abs=1e-8)

    def test_linearity(self, small_plant):
        plant, k = small_plant.plant, small_plant.K0.K
        rng = random.Random(3)
        dk = rand_mat(rng, plant.m, plant.n)
        h1 = lqr.hessian_action(plant, k, dk)
        h2 = lqr.hessian_action(plant, k, dk * 2.0)
        assert frobenius_norm(h2 - h1 * 2.0) <= 1e-10

    def test_symmetric_bilinear_form(self, small_plant):
        plant, k = small_plant.plant, small_plant.K0.K
        rng = random.Random(5)
        d1 = rand_mat(rng, plant.m, plant.n)
        d2 = rand_mat(rng, plant.m, plant.n)
        lhs = (d1 @ lqr.hessian_action(plant, k, d2).T).trace()
        rhs = (d2 @ lqr.hessian_action(plant, k, d1).T).trace()
        assert abs(lhs - rhs) <= 1e-7 * (1.0 + abs(lhs) + abs(rhs))

    def test_matches_directional_difference(self, small_plant):
        plant, k = small_plant.plant, small_plant.K0.K
        rng = random.Random(7)
        dk = rand_mat(rng, plant.m, plant.n)
        h = lqr.hessian_action(plant, k, dk)
        t = 1e-5
        gp = lqr.gradient(plant, k + dk * t)
        gm = lqr.gradient(plant, k - dk * t)
        fd = (gp - gm) * (1.0 / (2.0 * t))
        assert frobenius_norm(h - fd) / frobenius_norm(h) <= 1e-4


class TestGradientOracle:
    def test_finite_difference_small_plants(self):
        for seed, (n, m) in zip(range(5), [(2, 1), (3, 2), (4, 2), (2, 2), (4, 1)]):
            sample = problems.random_plant(n, m, seed)
            plant, k = sample.plant, sample.K0.K
            g = lqr.gradient(plant, k)
            t = 1e-5
            worst = 0.0
            for i in range(m):
                for j in range(n):
                    bump = Matrix.zeros(m, n) + Matrix.from_rows(
                        [[t if (r == i and c == j) else 0.0 for c in range(n)] for r in range(m)]
                    )
                    fd = (lqr.cost(plant, k + bump) - lqr.cost(plant, k - bump)) / (2.0 * t)
                    worst = max(worst, abs(fd - g[i, j]))
            assert worst / max(frobenius_norm(g), 1e-9) <= 1e-4


class TestLandscapeInvariants:
    def test_identities_on_random_gains(self, small_plant):
        plant, opt = small_plant.plant, small_plant.opt
        rng = random.Random(11)
        gains = problems.sample_admissible_gains(plant, opt, 25, rng)
        r_inv_bt = None
        for gain in gains:
            k = gain.K
            pair = lqr.lyapunov_pair(plant, k)
            j = pair.P_K.trace()
            grad = lqr.gradient(plant, k)
            nat = lqr.natural_gradient(plant, k)
            gn = lqr.gauss_newton_direction(plant, k)
            # Gramian floor
            acl = plant.A - plant.B @ k
            assert symmetric_eigenvalues(pair.Y_K)[0] >= 1.0 / (
                2.0 * spectral_norm(acl)
            ) - 1e-9
            # cost-trace floor
            assert j >= symmetric_eigenvalues(plant.Q)[0] * pair.Y_K.trace() - 1e-9
            # consistency of the two cost expressions
            qk = plant.Q + k.T @ (plant.R @ k)
            assert abs(j - (qk @ pair.Y_K).trace()) <= 1e-7 * (1.0 + abs(j))
            # natural gradient is gradient deconditioned by Y_K
            assert frobenius_norm(nat @ pair.Y_K - grad) <= 1e-8
            # Gauss-Newton direction recomposes from the natural gradient
            from issgd.linalg import solve_linear

            if r_inv_bt is None:
                r_inv_bt = solve_linear(plant.R, Matrix.identity(plant.m))
            assert frobenius_norm(gn - (r_inv_bt @ nat) * -0.5) <= 1e-12
            # cost optimality
            assert j >= opt.J_star - 1e-9
            # Riemannian expression of the cost gap
            dk = k - opt.K_star
            gap = j - opt.J_star
            riem = lqr.weighted_inner(dk, plant.R @ dk, pair.Y_K)
            assert abs(gap - riem) <= 1e-7 * (1.0 + abs(gap))
            # geometric identity linking K+ to the cost gap
            kplus = r_inv_bt @ (plant.B.T @ pair.P_K)
            lhs = 2.0 * lqr.weighted_inner(dk, plant.R @ (k - kplus), opt.Y_star)
            rhs = (pair.P_K - opt.P_star).trace() + lqr.weighted_inner(
                dk, plant.R @ dk, opt.Y_star
            )
            assert abs(lhs - rhs) <= 1e-7 * (1.0 + abs(lhs) + abs(rhs))
            # c(K) bound on the Gauss-Newton displacement
            dplus = k - kplus
            lhs2 = lqr.weighted_inner(dplus, plant.R @ dplus, opt.Y_star)
            c_k = lqr.c_of_K(plant, k, opt)
            assert c_k >= 1.0
            rhs2 = c_k * (pair.P_K - opt.P_star).trace()
            assert lhs2 <= rhs2 + 1e-9 * (1.0 + abs(lhs2) + abs(rhs2))

    def test_k_pl_inequality(self, small_plant):
        plant, opt = small_plant.plant, small_plant.opt
        cert = lqr.pl_certificate(plant, opt)
        rng = random.Random(13)
        for gain in problems.sample_admissible_gains(plant, opt, 25, rng):
            gap = lqr.cost(plant, gain.K) - opt.J_star
            alpha = gap / (cert.b1 * gap + cert.b2)
            assert frobenius_norm(lqr.gradient(plant, gain.K)) >= alpha - 1e-9

    def test_gain_norm_bound_sampled(self, small_plant):
        plant, opt = small_plant.plant, small_plant.opt
        rng = random.Random(17)
        for gain in problems.sample_admissible_gains(plant, opt, 25, rng):
            j = lqr.cost(plant, gain.K)
            assert spectral_norm(gain.K) <= lqr.gain_norm_bound(plant, j) + 1e-9

    def test_empirical_lipschitz(self, small_plant):
        plant, opt = small_plant.plant, small_plant.opt
        h = opt.J_star + 2.0
        bound = lqr.lipschitz_bound(plant, h, opt)
        rng = random.Random(19)
        gains = problems.sample_admissible_gains(plant, opt, 40, rng, max_cost=h)
        grads = [lqr.gradient(plant, g.K) for g in gains]
        checked = 0
        for i in range(len(gains)):
            for j in range(i + 1, len(gains)):
                num = frobenius_norm(grads[i] - grads[j])
                den = frobenius_norm(gains[i].K - gains[j].K)
                if den > 1e-12:
                    assert num <= bound * den * (1.0 + 1e-9)
                    checked += 1
                if checked >= 200:
                    return


class TestCertificateEdge:
    def test_zero_b_rejected(self):
        plant = lqr.Plant(
            A=Matrix.identity(2) * -1.0,
            B=Matrix.zeros(2, 1),
            Q=Matrix.identity(2),
            R=Matrix.identity(1),
        )
        with pytest.raises(StabilizabilityError):
            lqr.pl_certificate(plant)

    def test_unstable_without_k0(self):
        plant = lqr.Plant(
            A=Matrix.identity(2),
            B=Matrix.identity(2),
            Q=Matrix.identity(2),
            R=Matrix.identity(2),
        )
        with pytest.raises(StabilizabilityError):
            lqr.optimal_solution(plant)

import json
import math

import pytest

from issgd import descent, problems, verify
from issgd.descent import DescentTrajectory, IterateRecord
from issgd.exceptions import (
    DisturbanceTooLargeError,
    InputError,
    NoUltimateBoundError,
)
from issgd.linalg import Matrix
from support import mat


ZERO = descent.PerturbationModel(kind="zero")
STD = descent.Method(kind="standard")


def _toy_trajectory(costs, steps=None, perts=None, optimum=0.0, kind="standard", lyap=None):
    steps = steps or [0.1] * len(costs)
    perts = perts or [0.0] * len(costs)
    lyap = lyap or [{} for _ in costs]
    records = [
        IterateRecord(k, None, c, 0.0, s, p, lv)
        for k, (c, s, p, lv) in enumerate(zip(costs, steps, perts, lyap))
    ]
    return DescentTrajectory(
        records=records,
        terminated_reason="max_iter",
        meta={"optimum_cost": optimum, "method_kind": kind},
    )


class TestComparisonFunctions:
    def test_k_pl_shape(self):
        alpha = verify.ComparisonFunction.k_pl(2.0, 0.5)
        assert alpha.value(0.0) == 0.0
        assert alpha.value(0.25) == pytest.approx(0.25, abs=1e-15)
        assert alpha.sup() == 0.5
        grid = [alpha.value(0.1 * i) for i in range(1, 50)]
        assert all(b > a for a, b in zip(grid, grid[1:]))

    def test_power_inverse(self):
        alpha = verify.ComparisonFunction.power(4.0**0.75, 0.75)
        for r in (0.01, 0.25, 3.0):
            assert alpha.inverse(alpha.value(r)) == pytest.approx(r, rel=1e-12)

    def test_saturating(self):
        alpha = verify.ComparisonFunction.rational_saturating(2.0)
        assert alpha.sup() == 2.0
        assert alpha.inverse(1.0) == pytest.approx(1.0, abs=1e-15)

    def test_pd_has_no_inverse(self):
        alpha = verify.ComparisonFunction.pd_custom(lambda r: r * math.exp(-r), 1.0)
        with pytest.raises(NoUltimateBoundError):
            alpha.inverse(0.1)


class TestUltimateBound:
    def test_worked_example(self):
        alpha = verify.ComparisonFunction.k_pl(2.0, 0.5)
        assert verify.ultimate_bound(alpha, 0.05) == pytest.approx(0.0625, abs=1e-12)

    def test_zero_budget(self):
        alpha = verify.ComparisonFunction.k_pl(2.0, 0.5)
        assert verify.ultimate_bound(alpha, 0.0) == 0.0

    def test_budget_at_supremum(self):
        alpha = verify.ComparisonFunction.k_pl(2.0, 0.5)
        with pytest.raises(DisturbanceTooLargeError):
            verify.ultimate_bound(alpha, 0.25)

    def test_certificate_accepted(self, one_d_problem):
        assert verify.ultimate_bound(one_d_problem.cert, 0.05) == pytest.approx(
            0.0625, abs=1e-9
        )

    def test_roundtrip(self, one_d_problem):
        cert = one_d_problem.cert
        alpha = verify.alpha6_from_certificate(cert)
        for frac in (0.01, 0.1, 0.4):
            s = frac / cert.b1
            bound = verify.ultimate_bound(cert, s / 2.0)
            assert alpha.value(bound) == pytest.approx(s, abs=1e-12)

    def test_k_infinity_always_bounded(self):
        alpha = verify.ComparisonFunction.power(4.0**0.75, 0.75)
        for e in (0.1, 1.0, 10.0):
            assert math.isfinite(verify.ultimate_bound(alpha, e))

    def test_pd_regime_unavailable(self):
        sp = [p for p in problems.scalar_examples() if p.regime == "pd_pl"][0]
        with pytest.raises(NoUltimateBoundError):
            verify.ultimate_bound(sp.pl_fn, 0.05)


class TestGatedDecrease:
    def test_zero_perturbation_run_all_gated(self, one_d_problem, k_start):
        traj = descent.run(one_d_problem, STD, ZERO, k_start, stop_tol=1e-8)
        report = verify.check_gated_decrease(traj, one_d_problem.pl_function)
        assert report.per_step
        assert all(v.gate_active for v in report.per_step)
        assert report.all_gated_ok

    def test_gate_excludes_oversized_kick(self, one_d_problem, k_start):
        seq = [Matrix.zeros(1, 1)] * 10
        seq[4] = mat([[2.0]])  # far beyond alpha6(gap)/2 ~ 0.18
        model = descent.PerturbationModel(kind="replay", sequence=tuple(seq))
        traj = descent.run(one_d_problem, STD, model, k_start, max_iter=10, stop_tol=0.0)
        report = verify.check_gated_decrease(traj, one_d_problem.pl_function)
        flags = {v.k: v.gate_active for v in report.per_step}
        assert flags[4] is False
        assert all(flags[k] for k in flags if k != 4)
        assert report.all_gated_ok

    def test_handbuilt_violation(self):
        alpha = verify.ComparisonFunction.k_pl(2.0, 0.5)
        traj = _toy_trajectory([2.0, 2.5], optimum=1.0)
        report = verify.check_gated_decrease(traj, alpha)
        verdict = report.per_step[0]
        assert verdict.gate_active
        assert not verdict.decrease_ok
        assert verdict.slack < 0.0
        assert not report.all_gated_ok

    def test_missing_fields_rejected(self):
        traj = _toy_trajectory([2.0, 1.5])
        traj.meta.pop("optimum_cost")
        with pytest.raises(InputError):
            verify.check_gated_decrease(traj, verify.ComparisonFunction.k_pl(1.0, 1.0))


class TestLyapunovDecrease:
    def test_v5_values_one_d(self, one_d_problem):
        ev = one_d_problem.evaluate(mat([[2.0]]), "natural_lqr")
        assert ev.lyapunov_values["v5"] == pytest.approx(0.75, abs=1e-9)
        assert ev.lyapunov_values["v6"] == pytest.approx(0.5, abs=1e-9)
        ev_star = one_d_problem.evaluate(one_d_problem.opt.K_star, "natural_lqr")
        assert abs(ev_star.lyapunov_values["v5"]) <= 1e-12
        assert abs(ev_star.lyapunov_values["v6"]) <= 1e-12

    def test_v5_zero_perturbation(self, one_d_problem, k_start):
        traj = descent.run(
            one_d_problem, descent.Method(kind="natural_lqr"), ZERO, k_start, stop_tol=1e-10
        )
        report = verify.check_v5_decrease(
            one_d_problem.plant, one_d_problem.opt, traj, one_d_problem.cert
        )
        assert all(v.gate_active for v in report.per_step)
        assert report.all_gated_ok
        v5s = [r.lyapunov_values["v5"] for r in traj.records]
        assert all(b < a for a, b in zip(v5s, v5s[1:]) if a > 1e-12)

    def test_v6_zero_perturbation(self, one_d_problem, k_start):
        traj = descent.run(
            one_d_problem, descent.Method(kind="gauss_newton_lqr"), ZERO, k_start, stop_tol=1e-10
        )
        report = verify.check_v6_decrease(
            one_d_problem.plant, one_d_problem.opt, traj, one_d_problem.cert
        )
        assert report.all_gated_ok
        assert report.meta["derived_gate"] is True
        v6s = [r.lyapunov_values["v6"] for r in traj.records]
        assert all(b < a for a, b in zip(v6s, v6s[1:]) if a > 1e-12)

    def test_method_kind_enforced(self, one_d_problem, k_start):
        traj = descent.run(one_d_problem, STD, ZERO, k_start, max_iter=5, stop_tol=0.0)
        with pytest.raises(InputError):
            verify.check_v5_decrease(
                one_d_problem.plant, one_d_problem.opt, traj, one_d_problem.cert
            )
        with pytest.raises(InputError):
            verify.check_v6_decrease(
                one_d_problem.plant, one_d_problem.opt, traj, one_d_problem.cert
            )

    def test_sigma1_monotone_and_capped(self, one_d_problem):
        cert = one_d_problem.cert
        rate, s1, _ = verify.v5_gate_constants(cert)
        cap = cert.lam_min_R / (2.0 * cert.c2)
        grid = [s1 * v / (1.0 + v) for v in [0.1 * i for i in range(1, 200)]]
        assert all(b > a for a, b in zip(grid, grid[1:]))
        assert grid[-1] < cap


class TestInvariance:
    def test_gated_run_invariant(self, one_d_problem, k_start):
        gap0 = one_d_problem.cost(k_start) - one_d_problem.optimum_cost
        eps = 0.25 * one_d_problem.pl_function.value(gap0)
        bound = verify.ultimate_bound(one_d_problem.cert, eps)
        model = descent.PerturbationModel(kind="iid_ball", epsilon=eps, seed=5)
        traj = descent.run(one_d_problem, STD, model, k_start, max_iter=20000, stop_tol=bound)
        report = verify.invariance_check(traj, bound)
        assert report.entered_bound_at is not None
        assert report.invariant_after_entry

    def test_zero_perturbation_entry(self, one_d_problem, k_start):
        traj = descent.run(one_d_problem, STD, ZERO, k_start, stop_tol=1e-6)
        report = verify.invariance_check(traj, 1e-3)
        assert report.entered_bound_at is not None
        assert report.entered_bound_at <= traj.records[-1].k

    def test_adversarial_breakout_reported(self, one_d_problem):
        # drive near the optimum, then kick the gradient hard
        seq = [Matrix.zeros(1, 1)] * 60
        seq[50] = mat([[-40.0]])
        model = descent.PerturbationModel(kind="replay", sequence=tuple(seq))
        traj = descent.run(
            one_d_problem, STD, model, mat([[1.5]]), max_iter=60, stop_tol=0.0
        )
        report = verify.invariance_check(traj, 0.05)
        assert report.entered_bound_at is not None
        assert report.invariant_after_entry is False

    def test_bound_must_be_positive(self, one_d_problem, k_start):
        traj = descent.run(one_d_problem, STD, ZERO, k_start, max_iter=3, stop_tol=0.0)
        with pytest.raises(InputError):
            verify.invariance_check(traj, 0.0)


class TestReportSerialization:
    def test_stable_fields(self, one_d_problem, k_start):
        traj = descent.run(one_d_problem, STD, ZERO, k_start, max_iter=5, stop_tol=0.0)
        report = verify.check_gated_decrease(traj, one_d_problem.pl_function)
        payload = json.loads(report.to_json())
        assert set(payload) == {
            "check",
            "per_step",
            "ultimate_bound",
            "entered_bound_at",
            "invariant_after_entry",
            "meta",
        }
        assert set(payload["per_step"][0]) == {"k", "gate_active", "decrease_ok", "slack"}


class TestEnvelope:
    def test_descriptive_envelope(self, one_d_problem, k_start):
        trajs = [
            descent.run(
                one_d_problem,
                STD,
                descent.PerturbationModel(kind="iid_ball", epsilon=0.02, seed=s),
                k_start,
                max_iter=50,
                stop_tol=0.0,
            )
            for s in (1, 2)
        ]
        env = verify.empirical_envelope(trajs)
        assert len(env["final_gaps"]) == 2
        assert env["max_gap_by_step"][0] >= env["final_gaps"][0]

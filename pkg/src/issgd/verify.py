"""Trajectory certification.

Checks, along recorded descent trajectories, the inequalities the
robustness theory asserts: the gated cost decrease of the standard
method, the gated decreases of the two composite Lyapunov functions for
the natural-gradient and Gauss-Newton methods, sublevel invariance, and
the ultimate-bound neighborhood.  All checks work on the numeric series
stored in a trajectory (cost, step size, perturbation norm, v5, v6), so
a reloaded CSV verifies exactly like an in-memory run.
"""

import json
import math
from dataclasses import dataclass, field

from .exceptions import (
    DisturbanceTooLargeError,
    InputError,
    NoUltimateBoundError,
)
from .settings import DEFAULT, NumericSettings

K_PL = "k_pl"
POWER = "power"
SATURATING = "rational_saturating"
PD = "pd_custom"


@dataclass(frozen=True)
class ComparisonFunction:
    """Scalar comparison function used in gates and bounds.

    ``k_pl(b1, b2)``:  r / (b1 r + b2), strictly increasing, sup 1/b1.
    ``power(c, p)``:   c r^p, unbounded (class K-infinity).
    ``rational_saturating(c)``: c r / (1 + r), sup c.
    ``pd_custom``:     positive definite only; strictly increasing just on
                       [0, increasing_until), no inverse, no ultimate bound.
    """

    kind: str
    b1: float = 0.0
    b2: float = 0.0
    c: float = 0.0
    p: float = 1.0
    fn: object = None
    increasing_until: float = math.inf

    @classmethod
    def k_pl(cls, b1, b2):
        if b1 <= 0.0 or b2 <= 0.0:
            raise InputError("k_pl needs positive b1, b2")
        return cls(kind=K_PL, b1=b1, b2=b2)

    @classmethod
    def power(cls, c, p):
        if c <= 0.0 or p <= 0.0:
            raise InputError("power needs positive c, p")
        return cls(kind=POWER, c=c, p=p)

    @classmethod
    def rational_saturating(cls, c):
        if c <= 0.0:
            raise InputError("rational_saturating needs positive c")
        return cls(kind=SATURATING, c=c)

    @classmethod
    def pd_custom(cls, fn, increasing_until):
        return cls(kind=PD, fn=fn, increasing_until=increasing_until)

    def value(self, r):
        if r < 0.0:
            raise InputError("comparison functions are defined on r >= 0")
        if self.kind == K_PL:
            return r / (self.b1 * r + self.b2)
        if self.kind == POWER:
            return self.c * r**self.p
        if self.kind == SATURATING:
            return self.c * r / (1.0 + r)
        return self.fn(r)

    __call__ = value

    def sup(self):
        """Supremum of the range (the disturbance-budget ceiling is sup/2)."""
        if self.kind == K_PL:
            return 1.0 / self.b1
        if self.kind == POWER:
            return math.inf
        if self.kind == SATURATING:
            return self.c
        return None

    def inverse(self, s):
        if s < 0.0:
            raise InputError("inverse needs s >= 0")
        if s == 0.0:
            return 0.0
        if self.kind == K_PL:
            if s >= 1.0 / self.b1:
                raise DomainErrorForInverse(s, 1.0 / self.b1)
            return self.b2 * s / (1.0 - self.b1 * s)
        if self.kind == POWER:
            return (s / self.c) ** (1.0 / self.p)
        if self.kind == SATURATING:
            if s >= self.c:
                raise DomainErrorForInverse(s, self.c)
            return s / (self.c - s)
        raise NoUltimateBoundError(
            "positive-definite comparison function has no inverse"
        )


class DomainErrorForInverse(DisturbanceTooLargeError):
    def __init__(self, s, sup):
        super().__init__(
            f"value {s} reaches or exceeds the comparison-function supremum {sup}"
        )


def alpha6_from_certificate(cert) -> ComparisonFunction:
    """K-PL comparison function r / (b1 r + b2) of a landscape certificate."""
    return ComparisonFunction.k_pl(cert.b1, cert.b2)


def ultimate_bound(cert_or_alpha, e_sup: float) -> float:
    """Radius alpha^-1(2 e_sup) of the neighborhood gated trajectories enter.

    Raises DisturbanceTooLargeError when 2 e_sup reaches the supremum of
    the comparison function (the small-disturbance regime boundary) and
    NoUltimateBoundError for positive-definite-only comparison functions.
    """
    alpha = cert_or_alpha
    if not isinstance(alpha, ComparisonFunction):
        alpha = alpha6_from_certificate(alpha)
    if e_sup < 0.0:
        raise InputError("disturbance budget must be nonnegative")
    if alpha.kind == PD:
        raise NoUltimateBoundError(
            "no ultimate bound in the positive-definite PL regime"
        )
    if e_sup == 0.0:
        return 0.0
    return alpha.inverse(2.0 * e_sup)


@dataclass(frozen=True)
class StepVerdict:
    k: int
    gate_active: bool
    decrease_ok: bool
    slack: float


@dataclass
class IssReport:
    """Per-step gate/decrease verdicts plus the neighborhood summary."""

    check: str
    per_step: list = field(default_factory=list)
    ultimate_bound: float = None
    entered_bound_at: int = None
    invariant_after_entry: bool = None
    meta: dict = field(default_factory=dict)

    @property
    def all_gated_ok(self):
        return all(v.decrease_ok for v in self.per_step if v.gate_active)

    @property
    def violations(self):
        return [v for v in self.per_step if v.gate_active and not v.decrease_ok]

    def to_json_dict(self):
        return {
            "check": self.check,
            "per_step": [
                {
                    "k": v.k,
                    "gate_active": v.gate_active,
                    "decrease_ok": v.decrease_ok,
                    "slack": v.slack,
                }
                for v in self.per_step
            ],
            "ultimate_bound": self.ultimate_bound,
            "entered_bound_at": self.entered_bound_at,
            "invariant_after_entry": self.invariant_after_entry,
            "meta": self.meta,
        }

    def to_json(self, indent=None):
        return json.dumps(self.to_json_dict(), indent=indent)


def _series(traj):
    """(costs, steps, perts, lyap dicts, optimum) pulled from a trajectory."""
    recs = traj.records
    if not recs:
        raise InputError("empty trajectory")
    for r in recs:
        for name in ("cost", "step_size", "perturbation_norm"):
            if getattr(r, name, None) is None:
                raise InputError(f"trajectory record missing {name}")
    optimum = traj.meta.get("optimum_cost")
    if optimum is None:
        raise InputError("trajectory meta lacks optimum_cost")
    return recs, optimum


def _slack_tol(lhs, rhs, settings):
    return settings.verify_slack * (1.0 + abs(lhs) + abs(rhs))


def check_gated_decrease(
    traj, alpha5: ComparisonFunction, settings: NumericSettings = DEFAULT
) -> IssReport:
    """Certify J(k+1) - J(k) <= -(3 eta/8) alpha5(gap)^2 wherever the
    perturbation is inside the gate ||e(k)|| <= alpha5(gap)/2."""
    recs, optimum = _series(traj)
    report = IssReport(check="gated_decrease", meta={"optimum_cost": optimum})
    for i in range(len(recs) - 1):
        rec, nxt = recs[i], recs[i + 1]
        gap = rec.cost - optimum
        if gap < 0.0:
            gap = 0.0
        gate = rec.perturbation_norm <= 0.5 * alpha5.value(gap)
        lhs = nxt.cost - rec.cost
        rhs = -(3.0 * rec.step_size / 8.0) * alpha5.value(gap) ** 2
        slack = rhs - lhs
        ok = (not gate) or lhs <= rhs + _slack_tol(lhs, rhs, settings)
        report.per_step.append(
            StepVerdict(k=rec.k, gate_active=gate, decrease_ok=ok, slack=slack)
        )
    return report


def _check_lyap_decrease(traj, name, rate, sigma1_scale, sigma2_scale, settings):
    recs, _ = _series(traj)
    report = IssReport(check=name)
    for i in range(len(recs) - 1):
        rec, nxt = recs[i], recs[i + 1]
        v = rec.lyapunov_values.get(name)
        v_next = nxt.lyapunov_values.get(name)
        if v is None or v_next is None:
            raise InputError(f"trajectory records lack {name} values")
        sigma = min(sigma1_scale * v / (1.0 + v), sigma2_scale * v)
        gate = rec.perturbation_norm**2 <= sigma
        lhs = v_next - v
        rhs = -(rate * rec.step_size / 4.0) * v
        slack = rhs - lhs
        ok = (not gate) or lhs <= rhs + _slack_tol(lhs, rhs, settings)
        report.per_step.append(
            StepVerdict(k=rec.k, gate_active=gate, decrease_ok=ok, slack=slack)
        )
    return report


def v5_gate_constants(cert):
    """(rate, sigma1 scale, sigma2 scale) for the natural-gradient check.

    rate is clamped to min(lam_min_R, 1): the decrease argument folds the
    unweighted distance term and the cost term together, which is only
    tight when lam_min_R <= 1.
    """
    rate = min(cert.lam_min_R, 1.0)
    sigma1 = rate / (2.0 * cert.c2)
    sigma2 = rate / (4.0 * (cert.c1 + cert.c2 * cert.j_star))
    return rate, sigma1, sigma2


def v6_gate_constants(cert):
    """(rate, sigma1 scale, sigma2 scale) for the Gauss-Newton check.

    Derived, not quoted: with eta <= min(1, 1/(4 c(K))) the composite
    function V6 = (J - J*) + <K-K*, R (K-K*)>_{Y*}/2 obeys
    dV6 <= -(eta/4)(V4 + V3R) + eta (c1 + c2 J(K+)) ||W||_F^2 with
    c1 = (5/4)||R|| ||Y*|| and c2 = (5/2)||R||/lam_min(Q); closing the
    recursion like the V5 case needs the rate constant <= 1/4.
    """
    rate = min(cert.lam_min_R, 0.25)
    c1 = 1.25 * cert.norm_R * cert.lam_max_Y
    c2 = 2.5 * cert.norm_R / cert.lam_min_Q
    sigma1 = rate / (2.0 * c2)
    sigma2 = rate / (4.0 * (c1 + c2 * cert.j_star))
    return rate, sigma1, sigma2


def check_v5_decrease(plant, opt, traj, cert, settings: NumericSettings = DEFAULT) -> IssReport:
    """Gated decrease of V5 = <K-K*, K-K*>_{Y*} + J(K) - J* along a
    natural-gradient trajectory."""
    if traj.meta.get("method_kind") != "natural_lqr":
        raise InputError(
            f"check_v5_decrease needs a natural_lqr trajectory, "
            f"got {traj.meta.get('method_kind')!r}"
        )
    rate, s1, s2 = v5_gate_constants(cert)
    report = _check_lyap_decrease(traj, "v5", rate, s1, s2, settings)
    report.meta.update({"rate": rate, "sigma1_scale": s1, "sigma2_scale": s2})
    return report


def check_v6_decrease(plant, opt, traj, cert, settings: NumericSettings = DEFAULT) -> IssReport:
    """Gated decrease of V6 = J(K) - J* + <K-K*, R(K-K*)>_{Y*}/2 along a
    Gauss-Newton trajectory.  The gate/rate pair is derived by analogy
    (see v6_gate_constants) and flagged as such in the report."""
    if traj.meta.get("method_kind") != "gauss_newton_lqr":
        raise InputError(
            f"check_v6_decrease needs a gauss_newton_lqr trajectory, "
            f"got {traj.meta.get('method_kind')!r}"
        )
    rate, s1, s2 = v6_gate_constants(cert)
    report = _check_lyap_decrease(traj, "v6", rate, s1, s2, settings)
    report.meta.update(
        {"rate": rate, "sigma1_scale": s1, "sigma2_scale": s2, "derived_gate": True}
    )
    return report


def invariance_check(traj, bound: float, settings: NumericSettings = DEFAULT) -> IssReport:
    """First entry into {gap <= bound} and whether the sublevel set stays
    invariant afterwards."""
    if bound <= 0.0:
        raise InputError("bound must be positive")
    recs, optimum = _series(traj)
    report = IssReport(check="invariance", ultimate_bound=bound)
    entered = None
    invariant = None
    for rec in recs:
        gap = rec.cost - optimum
        if entered is None:
            if gap <= bound:
                entered = rec.k
                invariant = True
        elif gap > bound + _slack_tol(gap, bound, settings):
            invariant = False
    report.entered_bound_at = entered
    report.invariant_after_entry = invariant
    return report


def empirical_envelope(trajectories):
    """Descriptive (never asserted) max-over-runs gap envelope by step."""
    env = []
    finals = []
    for traj in trajectories:
        recs, optimum = _series(traj)
        for i, rec in enumerate(recs):
            gap = rec.cost - optimum
            if i == len(env):
                env.append(gap)
            elif gap > env[i]:
                env[i] = gap
        finals.append(recs[-1].cost - optimum)
    return {"max_gap_by_step": env, "final_gaps": finals}

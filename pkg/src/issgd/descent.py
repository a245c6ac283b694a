"""Perturbed gradient-descent engine.

One iteration map covers all methods: z(k+1) = z(k) - eta(k) (d(z(k)) + e(k)),
where d is the method's update direction (the plain gradient for the
standard method, the Gramian-preconditioned gradient for natural_lqr,
K - R^-1 B^T P_K for gauss_newton_lqr) and e(k) is drawn from a pluggable
perturbation model.  Step sizes follow the certified rules unless the
caller fixes or scales them.  Runs are deterministic given the seed.
"""

import random
from dataclasses import dataclass, field
from math import sqrt

from . import lqr
from .exceptions import EscapeError, InputError, StabilityError
from .linalg import Matrix, frobenius_norm, solve_linear
from .settings import DEFAULT, NumericSettings
from .verify import ComparisonFunction, alpha6_from_certificate

STANDARD = "standard"
NATURAL = "natural_lqr"
GAUSS_NEWTON = "gauss_newton_lqr"
METHOD_KINDS = (STANDARD, NATURAL, GAUSS_NEWTON)

PAPER_RULE = "paper"
FIXED = "fixed"
SCALED_PAPER = "scaled_paper"


@dataclass(frozen=True)
class Method:
    """Update-map kind plus the step-size rule."""

    kind: str = STANDARD
    step_rule: str = PAPER_RULE
    eta: float = None
    fraction: float = None

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise InputError(f"unknown method kind {self.kind!r}")
        if self.step_rule == FIXED:
            if self.eta is None or self.eta <= 0.0:
                raise InputError("fixed step rule needs eta > 0")
        elif self.step_rule == SCALED_PAPER:
            if self.fraction is None or not 0.0 < self.fraction <= 1.0:
                raise InputError("scaled rule needs fraction in (0, 1]")
        elif self.step_rule != PAPER_RULE:
            raise InputError(f"unknown step rule {self.step_rule!r}")


@dataclass(frozen=True)
class Evaluation:
    cost: float
    direction: object
    direction_norm: float
    lyapunov_values: dict


def _norm_of(v):
    return frobenius_norm(v) if isinstance(v, Matrix) else abs(float(v))


class Problem:
    """Anything the engine can descend on: cost/gradient/Lipschitz/PL hooks.

    ``pl_function`` maps a cost gap to the certified gradient-norm lower
    bound; ``lipschitz_on_sublevel`` maps a sublevel height to a gradient
    Lipschitz constant.  The base class supports the standard method only.
    """

    def __init__(
        self,
        name,
        cost,
        gradient,
        lipschitz_on_sublevel,
        pl_function,
        optimum_cost,
        admissibility,
    ):
        self.name = name
        self.cost = cost
        self.gradient = gradient
        self.lipschitz_on_sublevel = lipschitz_on_sublevel
        self.pl_function = pl_function
        self.optimum_cost = optimum_cost
        self.admissibility = admissibility

    def supports(self, kind):
        return kind == STANDARD

    def evaluate(self, point, kind) -> Evaluation:
        if kind != STANDARD:
            raise InputError(f"problem {self.name!r} supports only the standard method")
        g = self.gradient(point)
        return Evaluation(
            cost=self.cost(point),
            direction=g,
            direction_norm=_norm_of(g),
            lyapunov_values={},
        )

    def paper_step_size(self, ev: Evaluation, kind) -> float:
        if kind != STANDARD:
            raise InputError(f"problem {self.name!r} supports only the standard method")
        return 1.0 / self.lipschitz_on_sublevel(ev.cost)


class LqrProblem(Problem):
    """LQR policy optimization exposed to the engine.

    The optimum and the landscape certificate are computed once; each
    evaluation solves the closed-loop Lyapunov pair and derives cost,
    the method's direction, the composite Lyapunov values v5/v6, and the
    step-rule constant c(K).
    """

    def __init__(self, plant, k0=None, opt=None, name="lqr", settings: NumericSettings = DEFAULT):
        self.plant = plant
        self.settings = settings
        self.opt = opt if opt is not None else lqr.optimal_solution(plant, k0, settings)
        self.cert = lqr.pl_certificate(plant, self.opt, settings=settings)
        self._r_inv_bt = solve_linear(plant.R, plant.B.T, settings)
        self._brb_norm = None  # lazy; only c(K) needs it
        cert = self.cert

        def cost_fn(k):
            return lqr.cost(plant, k, settings)

        def grad_fn(k):
            return lqr.gradient(plant, k, settings)

        def lips(h):
            return (
                (2.0 * cert.norm_R / cert.lam_min_Q) * h
                + (8.0 * cert.a2 * cert.norm_B * cert.norm_R / cert.lam_min_Q**2) * h**2.5
                + (8.0 * cert.norm_B * (cert.a1 * cert.norm_R + cert.norm_B) / cert.lam_min_Q**2)
                * h**3
            )

        def admissible(k):
            return lqr.Gain.for_plant(plant, k, settings).is_admissible(settings)

        super().__init__(
            name=name,
            cost=cost_fn,
            gradient=grad_fn,
            lipschitz_on_sublevel=lips,
            pl_function=alpha6_from_certificate(cert),
            optimum_cost=self.opt.J_star,
            admissibility=admissible,
        )

    def supports(self, kind):
        return kind in METHOD_KINDS

    def _c_norm(self):
        if self._brb_norm is None:
            from .linalg import spectral_norm

            self._brb_norm = spectral_norm(self.plant.B @ self._r_inv_bt)
        return self._brb_norm

    def evaluate(self, point, kind) -> Evaluation:
        plant = self.plant
        pair = lqr.lyapunov_pair(plant, point, self.settings)
        cost = pair.P_K.trace()
        e = plant.R @ point - plant.B.T @ pair.P_K
        if kind == STANDARD:
            direction = (e @ pair.Y_K) * 2.0
        elif kind == NATURAL:
            direction = e * 2.0
        else:
            direction = point - self._r_inv_bt @ pair.P_K
        dk = point - self.opt.K_star
        v5 = lqr.weighted_inner(dk, dk, self.opt.Y_star) + cost - self.opt.J_star
        v6 = (cost - self.opt.J_star) + 0.5 * lqr.weighted_inner(
            dk, plant.R @ dk, self.opt.Y_star
        )
        c_k = 1.0 + self.cert.lam_max_Y * self._c_norm() * cost
        return Evaluation(
            cost=cost,
            direction=direction,
            direction_norm=frobenius_norm(direction),
            lyapunov_values={"v5": v5, "v6": v6, "c_of_k": c_k},
        )

    def paper_step_size(self, ev: Evaluation, kind) -> float:
        if kind == STANDARD:
            return 1.0 / self.lipschitz_on_sublevel(ev.cost)
        c_k = ev.lyapunov_values["c_of_k"]
        if kind == NATURAL:
            return min(
                1.0 / (2.0 * self.cert.norm_R),
                1.0 / (6.0 * self.cert.norm_R * c_k),
            )
        return min(1.0, 1.0 / (4.0 * c_k))


ZERO = "zero"
IID_BALL = "iid_ball"
CONSTANT_DIRECTION = "constant_direction"
ANTI_DESCENT = "anti_descent"
REPLAY = "replay"


@dataclass(frozen=True)
class PerturbationModel:
    """Gradient-perturbation source; every emitted e(k) has Frobenius norm
    at most epsilon (replay sequences are taken as-is)."""

    kind: str = ZERO
    epsilon: float = 0.0
    seed: int = 0
    direction: object = None  # constant_direction only
    sequence: tuple = None  # replay only

    def __post_init__(self):
        if self.kind not in (ZERO, IID_BALL, CONSTANT_DIRECTION, ANTI_DESCENT, REPLAY):
            raise InputError(f"unknown perturbation kind {self.kind!r}")
        if self.kind in (IID_BALL, CONSTANT_DIRECTION, ANTI_DESCENT) and self.epsilon < 0.0:
            raise InputError("epsilon must be nonnegative")
        if self.kind == CONSTANT_DIRECTION and self.direction is None:
            raise InputError("constant_direction needs a direction")
        if self.kind == REPLAY and self.sequence is None:
            raise InputError("replay needs a sequence")

    def start(self):
        return _PerturbationState(self)


class _PerturbationState:
    def __init__(self, model):
        self.model = model
        self.rng = random.Random(model.seed) if model.kind == IID_BALL else None
        if model.kind == CONSTANT_DIRECTION:
            d = model.direction
            nrm = _norm_of(d)
            if nrm == 0.0:
                raise InputError("constant_direction needs a nonzero direction")
            scale = model.epsilon / nrm
            self.constant = d * scale if isinstance(d, Matrix) else float(d) * scale
        else:
            self.constant = None

    def emit(self, k, direction):
        model = self.model
        if model.kind == ZERO:
            return 0.0 if not isinstance(direction, Matrix) else Matrix.zeros(
                direction.rows, direction.cols
            )
        if model.kind == REPLAY:
            seq = model.sequence
            if k < len(seq):
                return seq[k]
            return 0.0 if not isinstance(direction, Matrix) else Matrix.zeros(
                direction.rows, direction.cols
            )
        if model.kind == CONSTANT_DIRECTION:
            return self.constant
        if model.kind == ANTI_DESCENT:
            nrm = _norm_of(direction)
            if nrm == 0.0:
                return 0.0 if not isinstance(direction, Matrix) else Matrix.zeros(
                    direction.rows, direction.cols
                )
            return direction * (-model.epsilon / nrm)
        # iid_ball: uniform direction, radius scaled for ball uniformity
        rng = self.rng
        if isinstance(direction, Matrix):
            dim = direction.rows * direction.cols
            entries = [rng.gauss(0.0, 1.0) for _ in range(dim)]
            nrm = sqrt(sum(v * v for v in entries))
            if nrm == 0.0:
                return Matrix.zeros(direction.rows, direction.cols)
            radius = model.epsilon * rng.random() ** (1.0 / dim)
            scale = radius / nrm
            return Matrix(direction.rows, direction.cols, [v * scale for v in entries])
        g = rng.gauss(0.0, 1.0)
        sign = 1.0 if g >= 0.0 else -1.0
        return sign * model.epsilon * rng.random()


@dataclass(frozen=True)
class IterateRecord:
    k: int
    point: object
    cost: float
    grad_norm: float
    step_size: float
    perturbation_norm: float
    lyapunov_values: dict


MAX_ITER = "max_iter"
CONVERGED = "converged"
ESCAPED = "left_admissible_set"


@dataclass
class DescentTrajectory:
    """Ordered iterate records; the terminal record carries zero step data."""

    records: list = field(default_factory=list)
    terminated_reason: str = MAX_ITER
    meta: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.records[-1]

    def cost_gap(self, i=-1):
        return self.records[i].cost - self.meta["optimum_cost"]


def step_size(problem: Problem, method: Method, point, ev: Evaluation = None) -> float:
    """Step size at a point under the method's rule."""
    if not problem.supports(method.kind):
        raise InputError(f"problem {problem.name!r} does not support {method.kind}")
    if ev is None:
        ev = problem.evaluate(point, method.kind)
    if method.step_rule == FIXED:
        return method.eta
    eta = problem.paper_step_size(ev, method.kind)
    if method.step_rule == SCALED_PAPER:
        eta *= method.fraction
    return eta


def step(problem: Problem, method: Method, point, e) -> object:
    """One update z - eta (d(z) + e); raises EscapeError if the result
    leaves the admissible set."""
    ev = problem.evaluate(point, method.kind)
    eta = step_size(problem, method, point, ev)
    nxt = point - eta * (ev.direction + e)
    if not problem.admissibility(nxt):
        raise EscapeError(
            "step left the admissible set (perturbation beyond the certified gate?)",
            iterate=nxt,
        )
    return nxt


def run(
    problem: Problem,
    method: Method,
    perturbation: PerturbationModel,
    start,
    max_iter: int = None,
    stop_tol: float = None,
    settings: NumericSettings = DEFAULT,
) -> DescentTrajectory:
    """Iterate the perturbed update from ``start``.

    Stops on cost gap <= stop_tol, on the iteration cap, or on escape
    from the admissible set (recorded, not raised; the trajectory prefix
    is preserved and the offending iterate lands in ``meta``).
    """
    if max_iter is None:
        max_iter = settings.max_iter
    if stop_tol is None:
        stop_tol = settings.stop_tol
    if not problem.supports(method.kind):
        raise InputError(f"problem {problem.name!r} does not support {method.kind}")
    if not problem.admissibility(start):
        raise StabilityError("start point is not admissible")
    traj = DescentTrajectory(
        meta={
            "problem": problem.name,
            "method_kind": method.kind,
            "step_rule": method.step_rule,
            "perturbation_kind": perturbation.kind,
            "perturbation_epsilon": perturbation.epsilon,
            "seed": perturbation.seed,
            "optimum_cost": problem.optimum_cost,
            "stop_tol": stop_tol,
            "max_iter": max_iter,
        }
    )
    state = perturbation.start()
    point = start
    ev = problem.evaluate(point, method.kind)
    k = 0
    while True:
        gap = ev.cost - problem.optimum_cost
        if gap <= stop_tol:
            traj.records.append(
                IterateRecord(k, point, ev.cost, ev.direction_norm, 0.0, 0.0, ev.lyapunov_values)
            )
            traj.terminated_reason = CONVERGED
            break
        if k >= max_iter:
            traj.records.append(
                IterateRecord(k, point, ev.cost, ev.direction_norm, 0.0, 0.0, ev.lyapunov_values)
            )
            traj.terminated_reason = MAX_ITER
            break
        eta = step_size(problem, method, point, ev)
        e = state.emit(k, ev.direction)
        pert_norm = _norm_of(e)
        nxt = point - eta * (ev.direction + e)
        if not problem.admissibility(nxt):
            traj.records.append(
                IterateRecord(
                    k, point, ev.cost, ev.direction_norm, eta, pert_norm, ev.lyapunov_values
                )
            )
            traj.terminated_reason = ESCAPED
            traj.meta["escape_iterate"] = nxt
            break
        traj.records.append(
            IterateRecord(k, point, ev.cost, ev.direction_norm, eta, pert_norm, ev.lyapunov_values)
        )
        point = nxt
        ev = problem.evaluate(point, method.kind)
        k += 1
    return traj

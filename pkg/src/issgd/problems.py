"""Worked example problems and the random plant generator.

Three scalar objectives exercise the three PL regimes (saturating
K-function, K-infinity, positive-definite-only), the one-dimensional
LQR instance comes with closed forms for every landscape quantity, and
``random_plant`` builds seeded stabilizable plants with a stabilizing
initial gain for property tests and sweeps.
"""

import json
import math
import random
from dataclasses import dataclass

from . import descent, lqr
from .exceptions import GenerationError, InputError, StabilizabilityError
from .linalg import Matrix, solve_linear, symmetric_eigenvalues
from .lyapunov import solve_dual_lyapunov
from .settings import DEFAULT, NumericSettings
from .verify import ComparisonFunction

K_PL_REGIME = "k_pl"
K_INF_REGIME = "k_inf_pl"
PD_REGIME = "pd_pl"


@dataclass(frozen=True)
class ScalarProblem:
    """Scalar objective with its certified PL comparison function."""

    name: str
    domain: tuple  # open interval (left, right); infinities allowed
    cost: object
    gradient: object
    pl_fn: ComparisonFunction
    optimum: float
    regime: str
    lipschitz_on_sublevel: object

    def contains(self, z):
        return self.domain[0] < z < self.domain[1]

    def sample_points(self, count, rng):
        """Log-uniform samples clear of the domain boundary singularities."""
        left = self.domain[0]
        pts = []
        for _ in range(count):
            offset = 10.0 ** rng.uniform(-2.0, 2.0)
            if math.isinf(left):
                z = offset if rng.random() < 0.5 else -offset
            else:
                z = left + offset
            pts.append(z)
        return pts

    def to_problem(self) -> descent.Problem:
        return descent.Problem(
            name=self.name,
            cost=self.cost,
            gradient=self.gradient,
            lipschitz_on_sublevel=self.lipschitz_on_sublevel,
            pl_function=self.pl_fn,
            optimum_cost=self.cost(self.optimum),
            admissibility=self.contains,
        )


def _numeric_sublevel_lipschitz(cost, gradient, domain, optimum, safety=1.02):
    """Gradient Lipschitz constant over {J <= h}, sampled numerically.

    Bisects for the sublevel interval around the optimum, then takes the
    grid max of the gradient's difference quotient, inflated a little so
    1/L stays on the certified side of the true constant.
    """

    def edge(h, left_side):
        # expand away from the optimum until outside the sublevel set,
        # then bisect back to the J = h boundary
        sign = -1.0 if left_side else 1.0
        left = domain[0]
        width = 1.0
        if left_side and not math.isinf(left):
            inner = optimum
            outer = left
            for _ in range(200):
                mid = 0.5 * (inner + outer)
                if mid <= left or not math.isfinite(cost(mid)) or cost(mid) > h:
                    outer = mid
                else:
                    inner = mid
            return inner
        while cost(optimum + sign * width) < h and width < 1e12:
            width *= 2.0
        inner, outer = optimum, optimum + sign * width
        for _ in range(200):
            mid = 0.5 * (inner + outer)
            if cost(mid) > h:
                outer = mid
            else:
                inner = mid
        return inner

    def lips(h):
        if h <= cost(optimum):
            raise InputError("sublevel height below the optimum cost")
        left = domain[0]
        lo = edge(h, left_side=True)
        hi = edge(h, left_side=False)
        span = hi - lo
        d = max(span * 1e-6, 1e-9)
        worst = 0.0
        for i in range(257):
            z = lo + span * i / 256.0
            zl, zr = z - d, z + d
            if zl <= left:
                zl = z
            slope = abs(gradient(zr) - gradient(zl)) / (zr - zl)
            if slope > worst:
                worst = slope
        return safety * worst

    return lips


def scalar_examples():
    """The three scalar fixtures, one per PL regime."""
    root2 = math.sqrt(2.0)
    z_star1 = 1.0 + root2

    def cost1(z):
        return (z - z_star1) ** 2 / (2.0 * (z - 1.0))

    def grad1(z):
        w = z - 1.0
        return 0.5 - 1.0 / w**2

    rational = ScalarProblem(
        name="scalar_rational",
        domain=(1.0, math.inf),
        cost=cost1,
        gradient=grad1,
        pl_fn=ComparisonFunction.k_pl(2.0, root2 / 2.0),
        optimum=z_star1,
        regime=K_PL_REGIME,
        lipschitz_on_sublevel=_numeric_sublevel_lipschitz(
            cost1, grad1, (1.0, math.inf), z_star1
        ),
    )

    quartic = ScalarProblem(
        name="scalar_quartic",
        domain=(-math.inf, math.inf),
        cost=lambda z: 0.25 * z**4,
        gradient=lambda z: z**3,
        pl_fn=ComparisonFunction.power(4.0**0.75, 0.75),
        optimum=0.0,
        regime=K_INF_REGIME,
        # |J''| = 3 z^2 and z^2 <= 2 sqrt(h) on the sublevel set
        lipschitz_on_sublevel=lambda h: 6.0 * math.sqrt(h),
    )

    def pl_log(r):
        # gradient-norm floor at cost gap r: 2 sqrt(e^r - 1) / e^r
        u = math.exp(r)
        return 2.0 * math.sqrt(u - 1.0) / u

    log_flat = ScalarProblem(
        name="scalar_log",
        domain=(-math.inf, math.inf),
        cost=lambda z: math.log(z**2 + 1.0),
        gradient=lambda z: 2.0 * z / (z**2 + 1.0),
        pl_fn=ComparisonFunction.pd_custom(pl_log, increasing_until=math.log(2.0)),
        optimum=0.0,
        regime=PD_REGIME,
        # |J''| = 2 |1 - z^2| / (1 + z^2)^2 peaks at 2
        lipschitz_on_sublevel=lambda h: 2.0,
    )

    return [rational, quartic, log_flat]


@dataclass(frozen=True)
class OneDimensionalClosedForms:
    """Closed forms for the scalar LQR instance A=0, B=Q=R=1."""

    cost: object
    gradient: object
    natural_gradient: object
    value: object  # P_K
    gramian: object  # Y_K
    m1: object  # standard-update decrease factor
    m2: object  # natural-update decrease factor
    k_star: float = 1.0
    j_star: float = 1.0


def one_d_lqr():
    """The scalar LQR fixture and its closed forms."""
    plant = lqr.Plant(
        A=Matrix.from_rows([[0.0]]),
        B=Matrix.from_rows([[1.0]]),
        Q=Matrix.identity(1),
        R=Matrix.identity(1),
    )
    forms = OneDimensionalClosedForms(
        cost=lambda k: (k * k + 1.0) / (2.0 * k),
        gradient=lambda k: (k * k - 1.0) / (2.0 * k * k),
        natural_gradient=lambda k: (k * k - 1.0) / k,
        value=lambda k: (k * k + 1.0) / (2.0 * k),
        gramian=lambda k: 1.0 / (2.0 * k),
        m1=lambda k, eta: (2.0 * k - eta)
        * (k + 1.0) ** 2
        / (4.0 * k**4 - 2.0 * eta * k**3 + 2.0 * eta * k),
        m2=lambda k, eta: (1.0 - eta)
        * (k + 1.0) ** 2
        / ((1.0 - eta) * k**2 + eta),
    )
    return plant, forms


def initial_stabilizing_gain(plant: lqr.Plant, settings: NumericSettings = DEFAULT) -> Matrix:
    """Constructive stabilizer B^T Z^-1 from a shifted controllability
    Gramian; needs (A, B) controllable (holds a.s. for random draws)."""
    from .linalg import frobenius_norm

    n = plant.n
    beta = frobenius_norm(plant.A) + 0.5
    shifted = (plant.A + Matrix.identity(n) * beta) * -1.0
    bbt2 = (plant.B @ plant.B.T) * 2.0
    z = solve_dual_lyapunov(shifted, bbt2, settings, assume_hurwitz=True).P
    if symmetric_eigenvalues(z)[0] <= 1e-12:
        raise StabilizabilityError(
            "shifted Gramian is singular; (A, B) looks uncontrollable"
        )
    k0 = solve_linear(z, plant.B, settings).T
    if not lqr.Gain.for_plant(plant, k0, settings).is_admissible(settings):
        raise StabilizabilityError("constructed gain failed to stabilize")
    return k0


def _random_orthogonal(rng, n):
    for _attempt in range(50):
        cols = []
        degenerate = False
        for _ in range(n):
            v = [rng.gauss(0.0, 1.0) for _ in range(n)]
            for u in cols:
                dot = sum(a * b for a, b in zip(v, u))
                v = [a - dot * b for a, b in zip(v, u)]
            nrm = math.sqrt(sum(a * a for a in v))
            if nrm < 1e-8:
                degenerate = True
                break
            cols.append([a / nrm for a in v])
        if not degenerate:
            return Matrix.from_rows([[cols[j][i] for j in range(n)] for i in range(n)])
    raise GenerationError("could not draw an orthogonal matrix")


def random_spd(rng, n, lo=0.5, hi=2.0):
    """Random SPD matrix with eigenvalues uniform in [lo, hi]."""
    v = _random_orthogonal(rng, n)
    d = Matrix.diag([rng.uniform(lo, hi) for _ in range(n)])
    return (v @ d @ v.T).symmetrized()


@dataclass(frozen=True)
class PlantSample:
    plant: lqr.Plant
    K0: lqr.Gain
    seed: int
    opt: lqr.OptimalSolution = None


def random_plant(n, m, seed, settings: NumericSettings = DEFAULT) -> PlantSample:
    """Seeded stabilizable plant with a stabilizing start gain.

    A, B entries are uniform in [-1, 1]; Q, R are random SPD with
    eigenvalues in [0.5, 2]; stabilizability is certified by actually
    solving the ARE; K0 = K* + Delta with Delta halved until the closed
    loop has margin >= 1e-3.
    """
    if not (1 <= m <= n <= 8):
        raise InputError("random_plant needs 1 <= m <= n <= 8")
    rng = random.Random(f"{seed}:{n}:{m}")
    for _attempt in range(100):
        a = Matrix.from_rows([[rng.uniform(-1, 1) for _ in range(n)] for _ in range(n)])
        b = Matrix.from_rows([[rng.uniform(-1, 1) for _ in range(m)] for _ in range(n)])
        q = random_spd(rng, n)
        r = random_spd(rng, m)
        try:
            plant = lqr.Plant(A=a, B=b, Q=q, R=r)
            k_seed = initial_stabilizing_gain(plant, settings)
            opt = lqr.optimal_solution(plant, k_seed, settings)
        except Exception:
            continue
        delta = Matrix.from_rows(
            [[rng.uniform(-1, 1) for _ in range(n)] for _ in range(m)]
        )
        for _halving in range(60):
            k0 = opt.K_star + delta
            gain = lqr.Gain.for_plant(plant, k0, settings)
            if gain.hurwitz_margin >= 1e-3:
                return PlantSample(plant=plant, K0=gain, seed=seed, opt=opt)
            delta = delta * 0.5
    raise GenerationError(f"no stabilizable sample for (n={n}, m={m}, seed={seed})")


def sample_admissible_gains(plant, opt, count, rng, max_cost=None, settings=DEFAULT):
    """Random admissible gains around K* (optionally inside a cost sublevel)."""
    gains = []
    guard = 0
    while len(gains) < count:
        guard += 1
        if guard > 200 * count:
            raise GenerationError("admissible-gain sampling stalled")
        delta = Matrix.from_rows(
            [[rng.uniform(-1, 1) for _ in range(plant.n)] for _ in range(plant.m)]
        )
        delta = delta * rng.uniform(0.05, 2.0)
        for _ in range(40):
            k = opt.K_star + delta
            gain = lqr.Gain.for_plant(plant, k, settings)
            if gain.is_admissible(settings):
                if max_cost is None or lqr.cost(plant, gain, settings) <= max_cost:
                    gains.append(gain)
                    break
            delta = delta * 0.5
    return gains


def make_problem(name, settings: NumericSettings = DEFAULT):
    """Builtin problem registry used by the CLI: lqr_1d or a scalar example."""
    if name == "lqr_1d":
        plant, _forms = one_d_lqr()
        k0 = Matrix.from_rows([[2.0]])
        return descent.LqrProblem(plant, k0=k0, name="lqr_1d", settings=settings)
    for sp in scalar_examples():
        if sp.name == name:
            return sp.to_problem()
    raise InputError(f"unknown builtin problem {name!r}")


def export_fixtures(path, seeds=(1, 2)):
    """Regression baseline: sampled scalar values and small plant samples."""
    data = {"scalar": [], "plants": []}
    for sp in scalar_examples():
        rng = random.Random(sp.name)
        pts = sp.sample_points(9, rng)
        data["scalar"].append(
            {
                "name": sp.name,
                "regime": sp.regime,
                "optimum": sp.optimum,
                "samples": [
                    {"z": z, "cost": sp.cost(z), "gradient": sp.gradient(z)}
                    for z in pts
                ],
            }
        )
    for seed in seeds:
        sample = random_plant(3, 2, seed)
        data["plants"].append(
            {
                "seed": seed,
                "A": sample.plant.A.to_rows(),
                "B": sample.plant.B.to_rows(),
                "Q": sample.plant.Q.to_rows(),
                "R": sample.plant.R.to_rows(),
                "K0": sample.K0.K.to_rows(),
                "K_star": sample.opt.K_star.to_rows(),
                "J_star": sample.opt.J_star,
            }
        )
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
    return data

"""The LQR policy-optimization landscape.

Cost, exact gradient, natural gradient, Gauss-Newton direction, Hessian
action, and the explicit constants (gain bound, sublevel Lipschitz
constant, K-PL certificate) that the robustness theory needs.  All
quantities follow the continuous-time formulation: the cost of a
stabilizing gain K is Tr(P_K) with P_K the closed-loop Lyapunov solution
for weight Q + K^T R K, and Y_K is the closed-loop Gramian with unit
forcing.
"""

from dataclasses import dataclass
from math import sqrt

from .exceptions import DomainError, InputError, StabilityError, StabilizabilityError
from .linalg import (
    Matrix,
    eig_real_parts,
    frobenius_norm,
    solve_linear,
    spectral_norm,
    symmetric_eigenvalues,
)
from .lyapunov import AreSolution, kleinman_newton, solve_dual_lyapunov, solve_lyapunov
from .settings import DEFAULT, NumericSettings


@dataclass(frozen=True)
class Plant:
    """LQR instance (A, B, Q, R) with Q, R symmetric positive definite."""

    A: Matrix
    B: Matrix
    Q: Matrix
    R: Matrix

    def __post_init__(self):
        n = self.A.rows
        if self.A.cols != n:
            raise InputError("A must be square")
        if self.B.rows != n:
            raise InputError("B row count must match A")
        if self.Q.rows != n or self.Q.cols != n:
            raise InputError("Q must be n x n")
        m = self.B.cols
        if self.R.rows != m or self.R.cols != m:
            raise InputError("R must be m x m")
        for name in ("Q", "R"):
            mat = getattr(self, name)
            if frobenius_norm(mat - mat.T) > 1e-8 * (1.0 + frobenius_norm(mat)):
                raise InputError(f"{name} must be symmetric")
            if symmetric_eigenvalues(mat)[0] <= DEFAULT.spd_min_eig:
                raise InputError(f"{name} must be positive definite")

    @property
    def n(self):
        return self.A.rows

    @property
    def m(self):
        return self.B.cols


@dataclass(frozen=True)
class Gain:
    """Feedback gain with its closed-loop stability margin."""

    K: Matrix
    hurwitz_margin: float

    @classmethod
    def for_plant(cls, plant: Plant, k: Matrix, settings: NumericSettings = DEFAULT):
        if k.rows != plant.m or k.cols != plant.n:
            raise InputError(
                f"gain must be {plant.m}x{plant.n}, got {k.rows}x{k.cols}"
            )
        margin = -eig_real_parts(plant.A - plant.B @ k, settings).max_real_part
        return cls(K=k, hurwitz_margin=margin)

    def is_admissible(self, settings: NumericSettings = DEFAULT) -> bool:
        return self.hurwitz_margin >= settings.hurwitz_margin


@dataclass(frozen=True)
class LyapunovPair:
    P_K: Matrix
    Y_K: Matrix


@dataclass(frozen=True)
class OptimalSolution:
    K_star: Matrix
    P_star: Matrix
    Y_star: Matrix
    J_star: float
    are: AreSolution = None


@dataclass(frozen=True)
class LandscapeCertificate:
    """All plant-level constants used by the robustness theorems.

    a1/a2 bound the gain norm by the cost, b1/b2 define the K-PL
    comparison function r -> r/(b1 r + b2) whose supremum 1/b1 is the
    disturbance budget, and c1/c2 enter the perturbed natural-gradient
    decrease.  Plant norms are cached so step rules need no repeated
    eigen-decompositions.
    """

    a1: float
    a2: float
    b1: float
    b2: float
    disturbance_sup: float
    c1: float
    c2: float
    norm_A: float
    norm_B: float
    norm_Q: float
    norm_R: float
    lam_min_Q: float
    lam_min_R: float
    lam_min_Y: float
    lam_max_Y: float
    acl_fro: float
    j_star: float


def _as_gain(plant, k, settings):
    if isinstance(k, Gain):
        return k
    return Gain.for_plant(plant, k, settings)


def _require_admissible(plant, k, settings):
    g = _as_gain(plant, k, settings)
    if not g.is_admissible(settings):
        raise StabilityError(
            f"gain does not stabilize the plant (margin {g.hurwitz_margin:.3e})"
        )
    return g


def weighted_inner(k1: Matrix, k2: Matrix, y: Matrix) -> float:
    """<K1, K2>_Y = Tr(K1 Y K2^T)."""
    return (k1 @ y @ k2.T).trace()


def lyapunov_pair(plant: Plant, k, settings: NumericSettings = DEFAULT) -> LyapunovPair:
    """Value matrix P_K and unit-forcing Gramian Y_K of a stabilizing K."""
    g = _require_admissible(plant, k, settings)
    a_cl = plant.A - plant.B @ g.K
    p = solve_lyapunov(
        a_cl, plant.Q + g.K.T @ (plant.R @ g.K), settings, assume_hurwitz=True
    ).P
    y = solve_dual_lyapunov(
        a_cl, Matrix.identity(plant.n), settings, assume_hurwitz=True
    ).P
    return LyapunovPair(P_K=p, Y_K=y)


def cost(plant: Plant, k, settings: NumericSettings = DEFAULT) -> float:
    """J2(K) = Tr(P_K); raises StabilityError off the admissible set."""
    return lyapunov_pair(plant, k, settings).P_K.trace()


def gradient(plant: Plant, k, settings: NumericSettings = DEFAULT) -> Matrix:
    """Exact cost gradient 2 (R K - B^T P_K) Y_K."""
    g = _require_admissible(plant, k, settings)
    pair = lyapunov_pair(plant, g, settings)
    return ((plant.R @ g.K - plant.B.T @ pair.P_K) @ pair.Y_K) * 2.0


def natural_gradient(plant: Plant, k, settings: NumericSettings = DEFAULT) -> Matrix:
    """Gradient under the Gramian-weighted metric: 2 (R K - B^T P_K)."""
    g = _require_admissible(plant, k, settings)
    pair = lyapunov_pair(plant, g, settings)
    return (plant.R @ g.K - plant.B.T @ pair.P_K) * 2.0


def gauss_newton_direction(plant: Plant, k, settings: NumericSettings = DEFAULT) -> Matrix:
    """Hessian-approximation update direction -(K - R^-1 B^T P_K)."""
    g = _require_admissible(plant, k, settings)
    pair = lyapunov_pair(plant, g, settings)
    return (g.K - solve_linear(plant.R, plant.B.T @ pair.P_K, settings)) * -1.0


def hessian_action(plant: Plant, k, dk: Matrix, settings: NumericSettings = DEFAULT) -> Matrix:
    """Action of the cost Hessian at K on a direction dK.

    Differentiates the Lyapunov pair: dP_K solves the closed-loop
    equation forced by dK^T E + E^T dK with E = R K - B^T P_K, and dY_K
    solves the dual equation forced by -(B dK Y_K + Y_K dK^T B^T).
    """
    g = _require_admissible(plant, k, settings)
    if dk.rows != plant.m or dk.cols != plant.n:
        raise InputError("dK shape must match the gain")
    a_cl = plant.A - plant.B @ g.K
    pair = lyapunov_pair(plant, g, settings)
    e = plant.R @ g.K - plant.B.T @ pair.P_K
    forcing_p = dk.T @ e + e.T @ dk
    dp = solve_lyapunov(a_cl, forcing_p, settings, assume_hurwitz=True).P
    bdky = plant.B @ dk @ pair.Y_K
    dy = solve_dual_lyapunov(
        a_cl, (bdky + bdky.T) * -1.0, settings, assume_hurwitz=True
    ).P
    return ((plant.R @ dk - plant.B.T @ dp) @ pair.Y_K) * 2.0 + (e @ dy) * 2.0


def optimal_solution(
    plant: Plant, k0: Matrix = None, settings: NumericSettings = DEFAULT
) -> OptimalSolution:
    """Optimum (K*, P*, Y*, J*) via Kleinman-Newton.

    A stabilizing k0 is required unless A itself is Hurwitz (then the
    zero gain seeds the iteration); see the plant generator for a
    constructive initializer.
    """
    if k0 is None:
        zero = Matrix.zeros(plant.m, plant.n)
        g = Gain.for_plant(plant, zero, settings)
        if not g.is_admissible(settings):
            raise StabilizabilityError(
                "A is not Hurwitz: supply a stabilizing k0 to solve the ARE"
            )
        k0 = zero
    are = kleinman_newton(
        plant.A, plant.B, plant.Q, plant.R, k0, settings=settings
    )
    y_star = solve_dual_lyapunov(
        plant.A - plant.B @ are.K_star,
        Matrix.identity(plant.n),
        settings,
        assume_hurwitz=True,
    ).P
    return OptimalSolution(
        K_star=are.K_star,
        P_star=are.P_star,
        Y_star=y_star,
        J_star=are.P_star.trace(),
        are=are,
    )


def gain_norm_bound(plant: Plant, j: float, settings: NumericSettings = DEFAULT) -> float:
    """Bound on ||K|| for any admissible K with cost at most j."""
    if j <= 0.0:
        raise InputError("cost level must be positive")
    norm_b = spectral_norm(plant.B)
    norm_a = spectral_norm(plant.A)
    lam_min_r = symmetric_eigenvalues(plant.R)[0]
    a1 = 2.0 * norm_b / lam_min_r
    a2 = sqrt(2.0 * norm_a / lam_min_r)
    return a1 * j + a2 * sqrt(j)


def lipschitz_bound(
    plant: Plant,
    h: float,
    opt: OptimalSolution = None,
    settings: NumericSettings = DEFAULT,
) -> float:
    """Gradient Lipschitz constant over the cost sublevel set at height h."""
    if opt is not None and h < opt.J_star - 1e-12 * (1.0 + abs(opt.J_star)):
        raise DomainError(
            f"sublevel height {h} is below the optimal cost {opt.J_star}"
        )
    if h <= 0.0:
        raise DomainError("sublevel height must be positive")
    norm_b = spectral_norm(plant.B)
    norm_r = spectral_norm(plant.R)
    norm_a = spectral_norm(plant.A)
    lam_min_q = symmetric_eigenvalues(plant.Q)[0]
    lam_min_r = symmetric_eigenvalues(plant.R)[0]
    a1 = 2.0 * norm_b / lam_min_r
    a2 = sqrt(2.0 * norm_a / lam_min_r)
    return (
        (2.0 * norm_r / lam_min_q) * h
        + (8.0 * a2 * norm_b * norm_r / lam_min_q**2) * h**2.5
        + (8.0 * norm_b * (a1 * norm_r + norm_b) / lam_min_q**2) * h**3
    )


def c_of_K(
    plant: Plant, k, opt: OptimalSolution, settings: NumericSettings = DEFAULT
) -> float:
    """Step-rule constant c(K) = 1 + ||Y*|| ||B R^-1 B^T|| Tr(P_K)."""
    pair = lyapunov_pair(plant, k, settings)
    br_inv_bt = plant.B @ solve_linear(plant.R, plant.B.T, settings)
    return 1.0 + spectral_norm(opt.Y_star) * spectral_norm(br_inv_bt) * pair.P_K.trace()


def pl_certificate(
    plant: Plant,
    opt: OptimalSolution = None,
    k0: Matrix = None,
    settings: NumericSettings = DEFAULT,
) -> LandscapeCertificate:
    """Certificate of the K-PL inequality and every theorem constant.

    The comparison function alpha6(r) = r / (b1 r + b2) lower-bounds the
    gradient Frobenius norm at cost gap r over the whole admissible set;
    its supremum 1/b1 is the largest certifiable disturbance budget.
    """
    if opt is None:
        opt = optimal_solution(plant, k0, settings)
    norm_b = spectral_norm(plant.B)
    if norm_b <= 0.0:
        raise StabilizabilityError("B = 0: the K-PL certificate is undefined")
    norm_a = spectral_norm(plant.A)
    norm_q = spectral_norm(plant.Q)
    norm_r = spectral_norm(plant.R)
    lam_min_q = symmetric_eigenvalues(plant.Q)[0]
    lam_min_r = symmetric_eigenvalues(plant.R)[0]
    y_eigs = symmetric_eigenvalues(opt.Y_star)
    lam_min_y = y_eigs[0]
    lam_max_y = y_eigs[-1]
    acl_fro = frobenius_norm(plant.A - plant.B @ opt.K_star)
    a1 = 2.0 * norm_b / lam_min_r
    a2 = sqrt(2.0 * norm_a / lam_min_r)
    b1 = norm_b * sqrt(2.0 * (lam_min_y + lam_max_y)) / (lam_min_r * sqrt(lam_min_y))
    b2 = acl_fro**2 * sqrt(lam_min_y) * sqrt(lam_min_y + lam_max_y) / (sqrt(2.0) * norm_b)
    c1 = (3.0 * lam_min_r + 2.0 * norm_r) / (2.0 * norm_r * lam_min_r) * lam_max_y
    c2 = 3.0 / (2.0 * lam_min_q)
    return LandscapeCertificate(
        a1=a1,
        a2=a2,
        b1=b1,
        b2=b2,
        disturbance_sup=1.0 / b1,
        c1=c1,
        c2=c2,
        norm_A=norm_a,
        norm_B=norm_b,
        norm_Q=norm_q,
        norm_R=norm_r,
        lam_min_Q=lam_min_q,
        lam_min_R=lam_min_r,
        lam_min_Y=lam_min_y,
        lam_max_Y=lam_max_y,
        acl_fro=acl_fro,
        j_star=opt.J_star,
    )

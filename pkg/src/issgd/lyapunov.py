"""Continuous Lyapunov equations and the Riccati equation.

Both Lyapunov orientations are solved exactly by Kronecker vectorization
(fine at desk scale, n <= 16); the algebraic Riccati equation is solved
by Kleinman-Newton policy iteration.  ``integral_lyapunov`` is a slow
quadrature oracle kept for tests only: it evaluates the defining
integral of the Lyapunov solution with a matrix exponential and never
touches the Kronecker path it is used to check.
"""

from array import array
from dataclasses import dataclass
from math import inf

from .backend import kernel
from .exceptions import (
    ConditioningError,
    ConvergenceError,
    InputError,
    NumericError,
    StabilityError,
)
from .linalg import (
    Matrix,
    eig_real_parts,
    frobenius_norm,
    solve_linear,
    symmetric_eigenvalues,
)
from .settings import DEFAULT, NumericSettings


@dataclass(frozen=True)
class LyapunovSolution:
    P: Matrix
    residual_norm: float


@dataclass(frozen=True)
class AreSolution:
    P_star: Matrix
    K_star: Matrix
    iterations: int
    final_residual: float
    # iterate history, kept for diagnostics and the Newton-equivalence checks
    gains: tuple = ()
    residuals: tuple = ()
    costs: tuple = ()


def _require_square(m, name):
    if m.rows != m.cols:
        raise InputError(f"{name} must be square, got {m.rows}x{m.cols}")


def _require_symmetric(m, name):
    skew = frobenius_norm(m - m.T)
    if skew > 1e-8 * (1.0 + frobenius_norm(m)):
        raise InputError(f"{name} must be symmetric (asymmetry {skew:.3e})")


def _require_hurwitz(a, settings):
    margin = -eig_real_parts(a, settings).max_real_part
    if margin < settings.hurwitz_margin:
        raise StabilityError(
            f"matrix is not Hurwitz to margin (max Re = {-margin:.3e})"
        )


def _kron_solve(g: Matrix, q: Matrix, settings: NumericSettings) -> Matrix:
    """Solve G X + X G^T + Q = 0 via (G (x) I + I (x) G) vec(X) = -vec(Q)."""
    n = g.rows
    nn = n * n
    m = kernel.kron_sum(g.data, g.data, n)
    lu, piv, ok, min_p, max_p = kernel.lu_factor(m, nn)
    if not ok or min_p <= settings.pivot_ratio * max_p:
        cond = inf if min_p == 0.0 else max_p / min_p
        raise ConditioningError(
            "Lyapunov operator singular to tolerance "
            f"(pivot ratio {min_p:.3e}/{max_p:.3e})",
            condition_estimate=cond,
        )
    rhs = array("d", q.data)
    for i in range(nn):
        rhs[i] = -rhs[i]
    x = Matrix._wrap(n, n, kernel.lu_solve_factored(lu, piv, nn, rhs, 1))
    resid = g @ x + x @ g.T + q
    bound = settings.lyapunov_residual * (1.0 + frobenius_norm(q))
    if frobenius_norm(resid) > 0.25 * bound:
        corr = array("d", resid.data)
        for i in range(nn):
            corr[i] = -corr[i]
        dx = Matrix._wrap(n, n, kernel.lu_solve_factored(lu, piv, nn, corr, 1))
        x = x + dx
        resid = g @ x + x @ g.T + q
        if frobenius_norm(resid) > bound:
            raise NumericError(
                f"Lyapunov residual {frobenius_norm(resid):.3e} above bound {bound:.3e}"
            )
    return x


def solve_lyapunov(
    a: Matrix, q: Matrix, settings: NumericSettings = DEFAULT, assume_hurwitz=False
) -> LyapunovSolution:
    """Solve A^T P + P A + Q = 0 for symmetric Q and Hurwitz A."""
    _require_square(a, "A")
    _require_square(q, "Q")
    if a.rows != q.rows:
        raise InputError("A and Q dimensions differ")
    _require_symmetric(q, "Q")
    if not assume_hurwitz:
        _require_hurwitz(a, settings)
    p = _kron_solve(a.T, q, settings).symmetrized()
    resid = a.T @ p + p @ a + q
    return LyapunovSolution(P=p, residual_norm=frobenius_norm(resid))


def solve_dual_lyapunov(
    a: Matrix, n: Matrix, settings: NumericSettings = DEFAULT, assume_hurwitz=False
) -> LyapunovSolution:
    """Solve A Y + Y A^T + N = 0 for symmetric N and Hurwitz A."""
    _require_square(a, "A")
    _require_square(n, "N")
    if a.rows != n.rows:
        raise InputError("A and N dimensions differ")
    _require_symmetric(n, "N")
    if not assume_hurwitz:
        _require_hurwitz(a, settings)
    y = _kron_solve(a, n, settings).symmetrized()
    resid = a @ y + y @ a.T + n
    return LyapunovSolution(P=y, residual_norm=frobenius_norm(resid))


def are_residual(a, b, q, r, p, settings: NumericSettings = DEFAULT) -> float:
    """Frobenius norm of A^T P + P A + Q - P B R^-1 B^T P."""
    k = solve_linear(r, b.T @ p, settings)
    res = a.T @ p + p @ a + q - k.T @ (r @ k)
    return frobenius_norm(res)


def kleinman_newton(
    a: Matrix,
    b: Matrix,
    q: Matrix,
    r: Matrix,
    k0: Matrix,
    tol: float = None,
    max_iter: int = 60,
    settings: NumericSettings = DEFAULT,
) -> AreSolution:
    """Solve the continuous ARE by Kleinman-Newton policy iteration.

    Each sweep solves one closed-loop Lyapunov equation and re-derives the
    gain as R^-1 B^T P; iterate costs Tr(P) are nonincreasing and the ARE
    residual contracts quadratically.  Requires a stabilizing k0.
    """
    if tol is None:
        tol = settings.are_residual
    if tol <= 0.0:
        raise InputError("tol must be positive")
    n = a.rows
    if b.rows != n or q.rows != n or r.rows != b.cols or k0.rows != b.cols or k0.cols != n:
        raise InputError("inconsistent plant/gain dimensions")
    margin = -eig_real_parts(a - b @ k0, settings).max_real_part
    if margin < settings.hurwitz_margin:
        raise StabilityError(
            f"k0 is not stabilizing (closed-loop max Re = {-margin:.3e})"
        )
    k = k0
    gains = [k0]
    residuals = []
    costs = []
    p = None
    for it in range(1, max_iter + 1):
        a_cl = a - b @ k
        if it > 1:
            # Newton iterates stay stabilizing in exact arithmetic; re-check
            # cheaply so roundoff blow-ups surface as a clean error.
            _require_hurwitz(a_cl, settings)
        p = solve_lyapunov(a_cl, q + k.T @ (r @ k), settings, assume_hurwitz=True).P
        costs.append(p.trace())
        k_next = solve_linear(r, b.T @ p, settings)
        res = frobenius_norm(a.T @ p + p @ a + q - k_next.T @ (r @ k_next))
        residuals.append(res)
        if res <= tol:
            eigs = symmetric_eigenvalues(p)
            if eigs[0] <= 0.0:
                raise StabilityError(
                    f"ARE solution not positive definite (min eig {eigs[0]:.3e})"
                )
            return AreSolution(
                P_star=p,
                K_star=k_next,
                iterations=it,
                final_residual=res,
                gains=tuple(gains + [k_next]),
                residuals=tuple(residuals),
                costs=tuple(costs),
            )
        k = k_next
        gains.append(k)
    raise ConvergenceError(
        f"Kleinman-Newton did not reach residual {tol:.3e} in {max_iter} iterations",
        last_residual=residuals[-1] if residuals else None,
        iterations=max_iter,
    )


def expm(m: Matrix) -> Matrix:
    """Matrix exponential by scaling-and-squaring with a Taylor core."""
    _require_square(m, "M")
    n = m.rows
    nrm = frobenius_norm(m)
    s = 0
    while nrm > 0.25:
        nrm *= 0.5
        s += 1
    x = m * (0.5 ** s) if s else m
    total = Matrix.identity(n)
    term = Matrix.identity(n)
    for k in range(1, 40):
        term = (term @ x) * (1.0 / k)
        total = total + term
        if frobenius_norm(term) <= 1e-18 * (1.0 + frobenius_norm(total)):
            break
    for _ in range(s):
        total = total @ total
    return total


def _simpson(f, t0, f0, t1, f1, tol, depth):
    tm = 0.5 * (t0 + t1)
    fm = f(tm)
    h = t1 - t0
    whole = (f0 + 4.0 * fm + f1) * (h / 6.0)
    tl = 0.5 * (t0 + tm)
    tr = 0.5 * (tm + t1)
    fl = f(tl)
    fr = f(tr)
    left = (f0 + 4.0 * fl + fm) * (h / 12.0)
    right = (fm + 4.0 * fr + f1) * (h / 12.0)
    both = left + right
    err = frobenius_norm(both - whole)
    if err <= 15.0 * tol or depth >= 24:
        return both + (both - whole) * (1.0 / 15.0)
    half = 0.5 * tol
    return _simpson(f, t0, f0, tm, fm, half, depth + 1) + _simpson(
        f, tm, fm, t1, f1, half, depth + 1
    )


def integral_lyapunov(
    a: Matrix,
    q: Matrix,
    tol: float = 1e-9,
    horizon_cap: float = 1e4,
    integrand_floor: float = 1e-12,
) -> Matrix:
    """Quadrature oracle: integral of e^{A^T t} Q e^{A t} dt over [0, inf).

    Marches dyadic segments with adaptive Simpson until the integrand
    Frobenius norm falls below ``integrand_floor`` (horizon capped).
    Test-only; intentionally independent of the Kronecker solver.
    """

    def f(t):
        e = expm(a * t)
        return e.T @ q @ e

    total = Matrix.zeros(a.rows, a.rows)
    t0 = 0.0
    f0 = f(t0)
    seg = 1.0
    while t0 < horizon_cap:
        t1 = min(t0 + seg, horizon_cap)
        f1 = f(t1)
        total = total + _simpson(f, t0, f0, t1, f1, tol / 16.0, 0)
        if frobenius_norm(f1) < integrand_floor:
            break
        t0, f0 = t1, f1
        seg *= 2.0
    return total.symmetrized()

"""Minimal dense real-matrix layer.

Everything upstream (Lyapunov/Riccati solves, the LQR landscape, the
descent engine) works through this module; it has no dependency beyond
the twin kernel lanes in :mod:`issgd.backend`.  Sizes stay small
(n <= 16), so the kernels favor robustness over asymptotics.
"""

from array import array
from dataclasses import dataclass
from math import isfinite, sqrt

from .backend import kernel
from .exceptions import ConditioningError, InputError, NumericError
from .settings import DEFAULT, NumericSettings


class Matrix:
    """Immutable dense real matrix, row-major storage.

    Supports +, -, scalar *, @ and transpose; anything fancier lives in
    module functions so the kernel lanes stay swappable.
    """

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows, cols, entries):
        rows = int(rows)
        cols = int(cols)
        if rows <= 0 or cols <= 0:
            raise InputError(f"matrix dimensions must be positive, got {rows}x{cols}")
        data = array("d", entries)
        if len(data) != rows * cols:
            raise InputError(
                f"{rows}x{cols} matrix needs {rows * cols} entries, got {len(data)}"
            )
        for v in data:
            if not isfinite(v):
                raise InputError("matrix entries must be finite")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "data", data)

    def __setattr__(self, name, value):
        raise AttributeError("Matrix is immutable")

    @staticmethod
    def _wrap(rows, cols, data):
        m = object.__new__(Matrix)
        object.__setattr__(m, "rows", rows)
        object.__setattr__(m, "cols", cols)
        object.__setattr__(m, "data", data)
        return m

    @classmethod
    def from_rows(cls, rows):
        if not rows or not rows[0]:
            raise InputError("from_rows needs a nonempty list of nonempty rows")
        ncols = len(rows[0])
        flat = []
        for r in rows:
            if len(r) != ncols:
                raise InputError("ragged rows")
            flat.extend(float(v) for v in r)
        return cls(len(rows), ncols, flat)

    @classmethod
    def zeros(cls, rows, cols=None):
        cols = rows if cols is None else cols
        return cls._wrap(rows, cols, array("d", bytes(8 * rows * cols)))

    @classmethod
    def identity(cls, n):
        data = array("d", bytes(8 * n * n))
        for i in range(n):
            data[i * n + i] = 1.0
        return cls._wrap(n, n, data)

    @classmethod
    def diag(cls, values):
        n = len(values)
        data = array("d", bytes(8 * n * n))
        for i, v in enumerate(values):
            data[i * n + i] = float(v)
        return cls._wrap(n, n, data)

    def __getitem__(self, ij):
        i, j = ij
        return self.data[i * self.cols + j]

    def to_rows(self):
        c = self.cols
        return [list(self.data[i * c : (i + 1) * c]) for i in range(self.rows)]

    @property
    def T(self):
        r, c = self.rows, self.cols
        out = array("d", bytes(8 * r * c))
        for i in range(r):
            ic = i * c
            for j in range(c):
                out[j * r + i] = self.data[ic + j]
        return Matrix._wrap(c, r, out)

    def _same_shape(self, other):
        if self.rows != other.rows or self.cols != other.cols:
            raise InputError(
                f"shape mismatch: {self.rows}x{self.cols} vs {other.rows}x{other.cols}"
            )

    def __add__(self, other):
        self._same_shape(other)
        out = array("d", self.data)
        od = other.data
        for i in range(len(out)):
            out[i] += od[i]
        return Matrix._wrap(self.rows, self.cols, out)

    def __sub__(self, other):
        self._same_shape(other)
        out = array("d", self.data)
        od = other.data
        for i in range(len(out)):
            out[i] -= od[i]
        return Matrix._wrap(self.rows, self.cols, out)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, scalar):
        s = float(scalar)
        out = array("d", self.data)
        for i in range(len(out)):
            out[i] *= s
        return Matrix._wrap(self.rows, self.cols, out)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if self.cols != other.rows:
            raise InputError(
                f"matmul mismatch: {self.rows}x{self.cols} @ {other.rows}x{other.cols}"
            )
        data = kernel.mat_mul(self.data, other.data, self.rows, self.cols, other.cols)
        return Matrix._wrap(self.rows, other.cols, data)

    def trace(self):
        if self.rows != self.cols:
            raise InputError("trace of a non-square matrix")
        return sum(self.data[i * self.cols + i] for i in range(self.rows))

    def symmetrized(self):
        """(M + M^T)/2 for square M."""
        if self.rows != self.cols:
            raise InputError("symmetrized needs a square matrix")
        n = self.rows
        out = array("d", self.data)
        for i in range(n):
            for j in range(i + 1, n):
                v = 0.5 * (out[i * n + j] + out[j * n + i])
                out[i * n + j] = v
                out[j * n + i] = v
        return Matrix._wrap(n, n, out)

    def __repr__(self):
        return f"Matrix({self.rows}x{self.cols}, {self.to_rows()!r})"


@dataclass(frozen=True)
class SpectrumSummary:
    """Eigenvalue real parts of a square matrix, multiplicity preserved."""

    real_parts: tuple
    max_real_part: float


def frobenius_norm(m: Matrix) -> float:
    """sqrt of the sum of squared entries."""
    s = 0.0
    for v in m.data:
        s += v * v
    return sqrt(s)


def spectral_norm(m: Matrix) -> float:
    """Largest singular value, via symmetric eigenvalues of the Gram matrix."""
    # work with the smaller Gram matrix of the two orientations
    if m.rows <= m.cols:
        g = m @ m.T
        n = m.rows
    else:
        g = m.T @ m
        n = m.cols
    vals, ok = kernel.sym_eig(g.data, n)
    if not ok:
        raise NumericError("symmetric eigenvalue sweep did not converge")
    top = vals[n - 1]
    return sqrt(top) if top > 0.0 else 0.0


def symmetric_eigenvalues(m: Matrix):
    """Eigenvalues of a symmetric matrix, ascending."""
    if m.rows != m.cols:
        raise InputError("symmetric_eigenvalues needs a square matrix")
    vals, ok = kernel.sym_eig(m.data, m.rows)
    if not ok:
        raise NumericError("symmetric eigenvalue sweep did not converge")
    return list(vals)


def eig_real_parts(m: Matrix, settings: NumericSettings = DEFAULT) -> SpectrumSummary:
    """Real parts of all eigenvalues (real Schur reduction, Francis QR)."""
    if m.rows != m.cols:
        raise InputError("eig_real_parts needs a square matrix")
    n = m.rows
    max_iter = settings.eig_iter_per_dim * n
    parts, iters, ok = kernel.eig_real_parts(m.data, n, max_iter)
    if not ok:
        raise NumericError(
            f"QR eigenvalue iteration did not converge in {iters} steps",
            iterations=iters,
        )
    values = tuple(parts)
    return SpectrumSummary(real_parts=values, max_real_part=max(values))


def hurwitz_margin(m: Matrix, settings: NumericSettings = DEFAULT) -> float:
    """-max Re(lambda); positive means Hurwitz with that much margin."""
    return -eig_real_parts(m, settings).max_real_part


def is_hurwitz(m: Matrix, settings: NumericSettings = DEFAULT) -> bool:
    """Hurwitz test with the shared safety margin (max Re <= -margin)."""
    return hurwitz_margin(m, settings) >= settings.hurwitz_margin


def solve_linear(a: Matrix, b: Matrix, settings: NumericSettings = DEFAULT) -> Matrix:
    """Solve A X = B with partial pivoting plus one refinement pass.

    Raises ConditioningError (with a pivot-ratio condition estimate) when
    A is singular to tolerance.
    """
    if a.rows != a.cols:
        raise InputError("solve_linear needs a square A")
    if b.rows != a.rows:
        raise InputError("right-hand side rows must match A")
    n = a.rows
    lu, piv, ok, min_p, max_p = kernel.lu_factor(a.data, n)
    if not ok or min_p <= settings.pivot_ratio * max_p:
        cond = float("inf") if min_p == 0.0 else max_p / min_p
        raise ConditioningError(
            f"matrix singular to tolerance (pivot ratio {min_p:.3e}/{max_p:.3e})",
            condition_estimate=cond,
        )
    x = kernel.lu_solve_factored(lu, piv, n, b.data, b.cols)
    sol = Matrix._wrap(b.rows, b.cols, x)
    resid = b - a @ sol
    target = settings.solve_residual * (1.0 + frobenius_norm(b))
    if frobenius_norm(resid) > 0.25 * target:
        dx = kernel.lu_solve_factored(lu, piv, n, resid.data, resid.cols)
        sol = sol + Matrix._wrap(b.rows, b.cols, dx)
    return sol


def inverse(a: Matrix, settings: NumericSettings = DEFAULT) -> Matrix:
    return solve_linear(a, Matrix.identity(a.rows), settings)

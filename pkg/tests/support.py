"""Shared helpers for the test suite."""

import random

from issgd.linalg import Matrix, frobenius_norm


def mat(rows):
    return Matrix.from_rows(rows)


def rand_mat(rng, r, c, lo=-1.0, hi=1.0):
    return Matrix.from_rows([[rng.uniform(lo, hi) for _ in range(c)] for _ in range(r)])


def rand_sym(rng, n, lo=-1.0, hi=1.0):
    m = rand_mat(rng, n, n, lo, hi)
    return (m + m.T) * 0.5


def rand_hurwitz(rng, n, shift=0.3):
    """Random strictly stable matrix: shifted by its own Frobenius norm."""
    m = rand_mat(rng, n, n)
    return m - Matrix.identity(n) * (frobenius_norm(m) + shift)


def assert_close(a, b, tol, label=""):
    assert abs(a - b) <= tol, f"{label}: |{a} - {b}| = {abs(a - b)} > {tol}"


def mat_close(a, b, tol):
    return frobenius_norm(a - b) <= tol


def psd_floor(vals, floor):
    return vals[0] >= floor


def scalar_are_root(a, b, q, r):
    """Positive root of (b^2/r) p^2 - 2 a p - q = 0."""
    from math import sqrt

    return r * (a + sqrt(a * a + q * b * b / r)) / (b * b)

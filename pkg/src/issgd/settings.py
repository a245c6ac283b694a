"""Centralized numeric tolerances.

Every operation that needs a tolerance takes a :class:`NumericSettings`
(default :data:`DEFAULT`), so callers can override knobs in one place.
The ``ISSGD_NUMERIC_PROFILE`` environment variable selects a preset for
the CLI: ``default`` or ``strict``.
"""

import os
from dataclasses import dataclass, replace

from .exceptions import InputError


@dataclass(frozen=True)
class NumericSettings:
    # a matrix is Hurwitz iff max eigenvalue real part <= -hurwitz_margin
    hurwitz_margin: float = 1e-9
    # solve_linear residual target, scaled by (1 + ||b||_F)
    solve_residual: float = 1e-9
    # Lyapunov solution residual, scaled by (1 + ||Q||_F)
    lyapunov_residual: float = 1e-8
    # Kleinman-Newton stopping residual (absolute Frobenius)
    are_residual: float = 1e-8
    # pivot-ratio threshold below which a solve is singular-to-tolerance
    pivot_ratio: float = 1e-13
    # QR eigenvalue iteration budget per matrix dimension
    eig_iter_per_dim: int = 40
    # inequality certification slack, scaled by (1 + |lhs| + |rhs|)
    verify_slack: float = 1e-9
    # positive-definiteness floor for plant weight matrices
    spd_min_eig: float = 1e-12
    # descent loop defaults
    stop_tol: float = 1e-10
    max_iter: int = 100_000


DEFAULT = NumericSettings()

STRICT = replace(
    DEFAULT,
    solve_residual=1e-11,
    lyapunov_residual=1e-9,
    are_residual=1e-10,
    verify_slack=1e-10,
)

PROFILES = {"default": DEFAULT, "strict": STRICT}


def from_env():
    """Settings selected by ISSGD_NUMERIC_PROFILE (default when unset)."""
    name = os.environ.get("ISSGD_NUMERIC_PROFILE", "default").strip().lower()
    try:
        return PROFILES[name]
    except KeyError:
        raise InputError(
            f"ISSGD_NUMERIC_PROFILE must be one of {sorted(PROFILES)}, got {name!r}"
        ) from None

"""Harmonic trap and the open threshold potential it is quenched into.

For ``t >= 0`` the potential is the trap ``x**2 / 2`` up to ``x = 2``, a
cubic bridge ``A x^3 + B x^2 + C x + D`` on ``(2, 4)`` and the constant
threshold ``T`` beyond ``x = 4``.  The bridge matches value and slope at
both junctions.

At ``T = 0.5`` the junction constraints give ``B = -8.375`` and
``D = -21.5``; both are negative for every admissible ``T``.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UsageError

__all__ = [
    "X_C1",
    "X_C2",
    "PRE_QUENCH",
    "POST_QUENCH",
    "PotentialSpec",
    "polynomial_coefficients",
    "solve_polynomial_constraints",
    "barrier_maximum",
    "evaluate",
    "write_potential_csv",
]

X_C1 = 2.0
X_C2 = 4.0
T_MAX = 2.0
PRE_QUENCH = "pre_quench"
POST_QUENCH = "post_quench"


def _check_threshold(T):
    T = float(T)
    if not np.isfinite(T) or T >= T_MAX:
        raise DomainError(
            f"threshold T={T} must be finite and below {T_MAX}: the barrier "
            "degenerates and the trapped/free split is lost"
        )
    return T


def polynomial_coefficients(T):
    """Closed-form ``(A, B, C, D)`` of the bridge polynomial for threshold ``T``."""
    T = _check_threshold(T)
    return (1.0 - T / 4.0, 2.25 * T - 9.5, -6.0 * T + 28.0, 5.0 * T - 24.0)


def solve_polynomial_constraints(T, x_c1=X_C1, x_c2=X_C2):
    """Solve the 4x4 value/slope matching system directly.

    Independent of :func:`polynomial_coefficients`; used to cross-check it.
    """
    T = float(T)
    rows = [
        [x_c1**3, x_c1**2, x_c1, 1.0],
        [3 * x_c1**2, 2 * x_c1, 1.0, 0.0],
        [x_c2**3, x_c2**2, x_c2, 1.0],
        [3 * x_c2**2, 2 * x_c2, 1.0, 0.0],
    ]
    rhs = [0.5 * x_c1**2, x_c1, T, 0.0]
    return tuple(np.linalg.solve(np.array(rows), np.array(rhs)))


def barrier_maximum(T):
    """Position of the barrier top, ``2 + 1/(3 - 3T/4)``."""
    T = _check_threshold(T)
    return 2.0 + 1.0 / (3.0 - 0.75 * T)


@dataclass(frozen=True)
class PotentialSpec:
    threshold: float
    coefficients: tuple = field(init=False)
    barrier_position: float = field(init=False)
    x_c1: float = field(default=X_C1, init=False)
    x_c2: float = field(default=X_C2, init=False)

    def __post_init__(self):
        T = _check_threshold(self.threshold)
        object.__setattr__(self, "threshold", T)
        object.__setattr__(self, "coefficients", polynomial_coefficients(T))
        object.__setattr__(self, "barrier_position", barrier_maximum(T))

    def polynomial(self, x):
        a, b, c, d = self.coefficients
        x = np.asarray(x, dtype=float)
        return ((a * x + b) * x + c) * x + d

    def polynomial_derivative(self, x):
        a, b, c, _ = self.coefficients
        x = np.asarray(x, dtype=float)
        return (3 * a * x + 2 * b) * x + c

    @property
    def barrier_height(self):
        return float(self.polynomial(self.barrier_position))

    def __call__(self, x, phase=POST_QUENCH):
        return evaluate(x, self, phase)


def evaluate(x, spec, phase=POST_QUENCH):
    x = np.asarray(x, dtype=float)
    harmonic = 0.5 * x * x
    if phase == PRE_QUENCH:
        return harmonic
    if phase != POST_QUENCH:
        raise UsageError(f"unknown phase {phase!r}")
    out = np.where(x <= spec.x_c1, harmonic, spec.polynomial(x))
    out = np.where(x >= spec.x_c2, spec.threshold, out)
    return out if out.ndim else float(out)


def write_potential_csv(path, spec, x, phase=POST_QUENCH, comment=None):
    """Two-column ``x,V`` table for plotting."""
    x = np.asarray(x, dtype=float)
    v = evaluate(x, spec, phase)
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["x", "V"])
        for xi, vi in zip(x, np.atleast_1d(v)):
            writer.writerow([repr(float(xi)), repr(float(vi))])
    return path

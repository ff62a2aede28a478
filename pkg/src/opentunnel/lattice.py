"""Uniform periodic grid, its conjugate momentum lattice, quadrature and
the unitary position <-> momentum transform.

Units are dimensionless with hbar = m = 1.  Momentum-space arrays are
stored in ascending-k order (``Grid.k``), i.e. already fft-shifted.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, UsageError

__all__ = [
    "Grid",
    "ComplexField",
    "make_grid",
    "to_momentum",
    "to_position",
    "integrate",
    "MIN_POINTS",
]

MIN_POINTS = 8
POSITION = "position"
MOMENTUM = "momentum"


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not np.isfinite(self.x_min) or not np.isfinite(self.x_max):
            raise ConfigurationError("grid bounds must be finite")
        if self.x_max <= self.x_min:
            raise ConfigurationError(
                f"grid extent must be positive (x_min={self.x_min}, x_max={self.x_max})"
            )
        n = self.n_points
        if int(n) != n or n < MIN_POINTS or (int(n) & (int(n) - 1)) != 0:
            raise ConfigurationError(
                f"n_points must be a power of two >= {MIN_POINTS}, got {n}"
            )
        object.__setattr__(self, "n_points", int(n))

    @property
    def length(self):
        return self.x_max - self.x_min

    @property
    def dx(self):
        return self.length / self.n_points

    @property
    def dk(self):
        return 2.0 * np.pi / self.length

    @cached_property
    def x(self):
        x = self.x_min + self.dx * np.arange(self.n_points)
        x.flags.writeable = False
        return x

    @cached_property
    def k(self):
        """Ascending momentum lattice covering [-pi/dx, pi/dx)."""
        k = self.dk * (np.arange(self.n_points) - self.n_points // 2)
        k.flags.writeable = False
        return k

    @cached_property
    def k_fft(self):
        """Momentum lattice in FFT (unshifted) order."""
        k = 2.0 * np.pi * sfft.fftfreq(self.n_points, self.dx)
        k.flags.writeable = False
        return k

    @cached_property
    def _phase(self):
        # continuum-normalised amplitude: sqrt(dx/dk) e^{-ik x_min} FFT_ortho
        return np.sqrt(self.dx / self.dk) * np.exp(-1j * self.k * self.x_min)

    def index_of(self, x):
        """Index of the first grid point >= x (clipped to the grid)."""
        return int(np.clip(np.searchsorted(self.x, x), 0, self.n_points))

    def spacing(self, representation=POSITION):
        if representation == POSITION:
            return self.dx
        if representation == MOMENTUM:
            return self.dk
        raise UsageError(f"unknown representation {representation!r}")


@dataclass(frozen=True)
class ComplexField:
    """Amplitudes over the N-fold product grid in one representation."""

    values: np.ndarray
    representation: str = POSITION

    def __post_init__(self):
        if self.representation not in (POSITION, MOMENTUM):
            raise UsageError(f"unknown representation {self.representation!r}")

    @property
    def n_particles(self):
        return self.values.ndim

    def norm(self, grid):
        return integrate(np.abs(self.values) ** 2, grid, self.representation)


def make_grid(x_min, x_max, n_points):
    return Grid(float(x_min), float(x_max), n_points)


def _check_shape(values, grid):
    if any(s != grid.n_points for s in np.shape(values)):
        raise UsageError(
            f"field shape {np.shape(values)} does not match grid of {grid.n_points} points"
        )


def _transform_values(values, grid, forward):
    values = np.asarray(values)
    _check_shape(values, grid)
    axes = tuple(range(values.ndim))
    phase = grid._phase if forward else 1.0 / grid._phase
    out = values
    if not forward:
        for ax in axes:
            out = out * _along(phase, ax, values.ndim)
        out = sfft.ifftshift(out, axes=axes)
        return sfft.ifftn(out, axes=axes, norm="ortho")
    out = sfft.fftshift(sfft.fftn(out, axes=axes, norm="ortho"), axes=axes)
    for ax in axes:
        out = out * _along(phase, ax, values.ndim)
    return out


def _along(vec, axis, ndim):
    shape = [1] * ndim
    shape[axis] = vec.shape[0]
    return vec.reshape(shape)


def to_momentum(field, grid):
    """Unitary DFT on every particle coordinate.

    The result approximates the continuum transform
    (2 pi)^{-1/2} int e^{-ikx} psi(x) dx on ``grid.k``, so that
    ``integrate(|phi|^2, grid, "momentum")`` equals the position-space norm.
    """
    if field.representation != POSITION:
        raise UsageError("to_momentum expects a position-space field")
    return ComplexField(_transform_values(field.values, grid, True), MOMENTUM)


def to_position(field, grid):
    if field.representation != MOMENTUM:
        raise UsageError("to_position expects a momentum-space field")
    return ComplexField(_transform_values(field.values, grid, False), POSITION)


def integrate(field_values, grid, representation=POSITION):
    """Riemann sum over every axis (periodic convention, no end weights)."""
    values = np.asarray(field_values)
    if values.ndim == 0:
        raise UsageError("cannot integrate a scalar")
    _check_shape(values, grid)
    h = grid.spacing(representation)
    return values.sum() * h**values.ndim

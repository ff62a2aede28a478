"""Two trapped bosons with a contact (or smoothed contact) interaction,
solved through the centre-of-mass / relative-coordinate separation.

With ``X = (x1 + x2)/2`` and ``r = x1 - x2`` the harmonic two-body
Hamiltonian splits into a centre-of-mass oscillator (ground energy 1/2) and

    H_rel = -d^2/dr^2 + r^2/4 + lambda0 * delta(r)

whose spectrum is ``n + 1/2`` at zero coupling.  Bosonic states are even in
``r``; on the half line ``r > 0`` the delta term turns into the Robin
condition ``psi'(0+) = lambda0/2 * psi(0)``.  The half-line problem is
discretised with second-order finite differences on a cell-centred grid,
diagonalised as a symmetric tridiagonal matrix and extrapolated in ``h``.

None of this shares code with the product-grid solvers, so it serves as an
independent check of them.
"""
import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

__all__ = [
    "exact_pair_energy",
    "relative_ground_energy",
    "gaussian_pair_energy",
    "calibrate_gaussian_amplitude",
]

_R_MAX = 14.0
_CELLS = 4000


def _lowest_even_level(potential, robin, r_max, cells):
    h = r_max / cells
    r = (np.arange(cells) + 0.5) * h
    diag = 2.0 / h**2 + 0.25 * r**2 + potential(r)
    # ghost cell at -h/2 eliminated through the boundary condition at r=0
    diag[0] -= (1.0 - 0.5 * robin * h) / (1.0 + 0.5 * robin * h) / h**2
    off = np.full(cells - 1, -1.0 / h**2)
    w = eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 0))
    return float(w[0])


def _extrapolated(potential, robin, r_max=_R_MAX, cells=_CELLS):
    coarse = _lowest_even_level(potential, robin, r_max, cells)
    fine = _lowest_even_level(potential, robin, r_max, 2 * cells)
    return (4.0 * fine - coarse) / 3.0


def relative_ground_energy(lambda0):
    """Lowest even eigenvalue of the relative Hamiltonian with a contact term."""
    lambda0 = float(lambda0)
    if lambda0 < 0:
        raise ValueError("lambda0 must be non-negative")
    zero = lambda r: 0.0 * r
    # Robin slope lambda0/2 at the origin
    return _extrapolated(zero, 0.5 * lambda0)


def exact_pair_energy(lambda0):
    """Ground energy of two harmonically trapped bosons with contact coupling.

    Approaches the fermionised value 2 from below as ``lambda0`` grows.
    """
    return 0.5 + relative_ground_energy(lambda0)


def gaussian_pair_energy(amplitude, width):
    """Same as :func:`exact_pair_energy` for ``amplitude * N(r; 0, width)``."""
    if width <= 0:
        return exact_pair_energy(amplitude)
    norm = amplitude / (np.sqrt(2.0 * np.pi) * width)
    pot = lambda r: norm * np.exp(-0.5 * (r / width) ** 2)
    return 0.5 + _extrapolated(pot, 0.0, cells=max(_CELLS, int(40 * _R_MAX / width)))


def calibrate_gaussian_amplitude(lambda0, width):
    """Amplitude of a normalised Gaussian of ``width`` whose trapped pair
    energy equals that of the contact interaction ``lambda0``."""
    if lambda0 == 0 or width <= 0:
        return float(lambda0)
    target = exact_pair_energy(lambda0)
    f = lambda a: gaussian_pair_energy(a, width) - target
    hi = 2.0 * lambda0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("could not bracket the calibrated amplitude")
    return brentq(f, 0.0, hi, xtol=1e-12, rtol=1e-12)

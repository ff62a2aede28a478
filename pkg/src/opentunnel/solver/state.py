"""Many-boson states on the product grid, plus the lower particle-number
sectors fed by the absorber.

An ``exact`` state stores the full amplitude ``Psi(x_1, ..., x_N)`` as an
N-dimensional array.  A ``meanfield`` state stores one orbital ``phi(x)``
with ``Psi = prod phi(x_i)``.

When the absorbing boundary removes a particle, the remaining ``k`` bosons
are still physical.  They are kept as a mixed state
``rho_k = sum_j |c_j><c_j|`` whose columns ``c_j`` are symmetric k-body
amplitudes (``sectors[k]`` has shape ``(rank, n, ..., n)``).  Their traces
are probabilities, so ``sum_k k tr(rho_k) + N |Psi|^2`` counts the particles
still on the grid.
"""
from dataclasses import dataclass, field, replace
from itertools import permutations

import numpy as np

from ..errors import ConfigurationError, UsageError
from ..lattice import ComplexField, POSITION

__all__ = ["ManyBodyWavefunction", "EXACT", "MEANFIELD", "symmetrize", "MAX_EXACT_N"]

EXACT = "exact"
MEANFIELD = "meanfield"
MAX_EXACT_N = 3


def symmetrize(values):
    """Average over all permutations of the particle axes."""
    nd = values.ndim
    if nd < 2:
        return values
    acc = np.zeros_like(values)
    perms = list(permutations(range(nd)))
    for p in perms:
        acc += np.transpose(values, p)
    return acc / len(perms)


@dataclass
class ManyBodyWavefunction:
    N: int
    lambda0: float
    grid: object
    values: np.ndarray
    kind: str = EXACT
    interaction_width: float = 0.0
    sectors: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (EXACT, MEANFIELD):
            raise ConfigurationError(f"unknown solver kind {self.kind!r}")
        if self.N < 1:
            raise ConfigurationError("N must be at least 1")
        if self.lambda0 < 0:
            raise ConfigurationError("attractive interactions (lambda0 < 0) are not supported")
        n = self.grid.n_points
        want = (n,) * (self.N if self.kind == EXACT else 1)
        if self.values.shape != want:
            raise UsageError(f"amplitude shape {self.values.shape} does not match {want}")

    @property
    def field(self):
        return ComplexField(self.values, POSITION)

    @property
    def solver_kind(self):
        return self.kind

    def norm(self):
        """Quadrature of |Psi|^2 over the N-body (or orbital) grid."""
        ndim = self.values.ndim
        return float(np.sum(np.abs(self.values) ** 2).real) * self.grid.dx**ndim

    def sector_traces(self):
        """Probability held in each lower particle-number sector."""
        out = {}
        for k, cols in self.sectors.items():
            out[k] = float(np.sum(np.abs(cols) ** 2).real) * self.grid.dx**k
        return out

    def particle_fraction(self):
        """Expected particle number on the grid divided by N."""
        if self.kind == MEANFIELD:
            return self.norm()
        total = self.N * self.norm()
        for k, tr in self.sector_traces().items():
            total += k * tr
        return total / self.N

    def symmetry_error(self):
        if self.kind != EXACT or self.N < 2:
            return 0.0
        v = self.values
        err = 0.0
        for p in permutations(range(self.N)):
            err = max(err, float(np.max(np.abs(v - np.transpose(v, p)))))
        return err

    def copy(self):
        return replace(
            self,
            values=self.values.copy(),
            sectors={k: c.copy() for k, c in self.sectors.items()},
        )

"""Reduced densities, natural occupations, correlation functions, the
nonescape probability and momentum peak detection.

Conventions: the one-body density matrix is a kernel rho(x, x') normalised
to N (``trace * dx = N * surviving fraction``), so its integral operator is
the matrix ``rho * h`` with ``h = dx`` or ``dk``.  Occupations are reported
as fractions of N.  Lower particle-number sectors left behind by the
absorber contribute with their own particle count k.
"""
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.signal import find_peaks
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import ConfigurationError, DataIntegrityError, DomainError, UsageError
from .lattice import MOMENTUM, POSITION

__all__ = [
    "OneBodyDensityMatrix",
    "NaturalDecomposition",
    "TwoBodyDiagonal",
    "one_body_density_matrix",
    "natural_decomposition",
    "density",
    "momentum_density",
    "density_of_state",
    "occupation_fractions",
    "nonescape_probability",
    "g1",
    "two_body_diagonal",
    "g2",
    "detect_peaks",
    "snapshot_observables",
    "MASK_FLOOR",
]

# correlation ratios are reported only where the density exceeds this share
# of its peak; below it transform roundoff (~1e-16 / share^2) dominates
MASK_FLOOR = 1e-4
HERMITIAN_TOL = 1e-10
_DENSE_LIMIT = 512


@dataclass(frozen=True)
class OneBodyDensityMatrix:
    matrix: np.ndarray
    representation: str
    N: int
    grid: object
    trace_scale: str = "N"

    @property
    def spacing(self):
        return self.grid.spacing(self.representation)


@dataclass(frozen=True)
class NaturalDecomposition:
    occupations: np.ndarray
    eigenvalues: np.ndarray
    orbitals: np.ndarray


@dataclass(frozen=True)
class TwoBodyDiagonal:
    values: np.ndarray
    representation: str
    N: int
    grid: object


def _momentum_amplitudes(values, grid, lead=0):
    """Continuum-normalised momentum amplitudes along every particle axis."""
    axes = tuple(range(lead, values.ndim))
    out = sfft.fftshift(sfft.fftn(values, axes=axes, norm="ortho"), axes=axes)
    for ax in axes:
        shape = [1] * values.ndim
        shape[ax] = grid.n_points
        out = out * grid._phase.reshape(shape)
    return out


def _components(state, representation):
    """(k, amplitudes with shape (r, n, n^(k-1))) for every sector present."""
    grid = state.grid
    n = grid.n_points
    if representation not in (POSITION, MOMENTUM):
        raise UsageError(f"unknown representation {representation!r}")
    if state.kind == "meanfield":
        top = [(state.N, state.values[None])]
        lower = []
    else:
        top = [(state.N, state.values[None])]
        lower = [(k, c) for k, c in sorted(state.sectors.items()) if c.shape[0]]
    out = []
    for k, arr in top + lower:
        if representation == MOMENTUM:
            arr = _momentum_amplitudes(arr, grid, lead=1)
        out.append((k, arr.reshape(arr.shape[0], n, -1)))
    return out


def _weight(state, k, h):
    # mean-field orbital: rho = N phi phi*, no partial trace
    if state.kind == "meanfield":
        return float(state.N)
    return k * h ** (k - 1)


def one_body_density_matrix(state, representation=POSITION):
    """Partial trace over all but one coordinate, times the particle count.

    A mean-field state gives the rank-one kernel ``N phi(x) phi*(x')``.
    """
    h = state.grid.spacing(representation)
    n = state.grid.n_points
    rho = np.zeros((n, n), dtype=complex)
    for k, arr in _components(state, representation):
        w = _weight(state, k, h)
        for col in arr:
            rho += w * (col @ col.conj().T)
    return OneBodyDensityMatrix(rho, representation, state.N, state.grid)


def natural_decomposition(rho1):
    m = rho1.matrix
    scale = max(float(np.max(np.abs(m))), 1e-300)
    if float(np.max(np.abs(m - m.conj().T))) > HERMITIAN_TOL * scale:
        raise DataIntegrityError("one-body density matrix is not Hermitian")
    h = rho1.spacing
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T) * h)
    order = np.argsort(w)[::-1]
    w = w[order]
    orbitals = v[:, order].T / np.sqrt(h)
    return NaturalDecomposition(w / rho1.N, w, orbitals)


def density(rho1):
    if rho1.representation != POSITION:
        raise UsageError("density expects a position-space matrix")
    return np.real(np.diag(rho1.matrix)).copy()


def momentum_density(rho1):
    """Diagonal of the kernel in momentum space (transforms if needed)."""
    if rho1.representation == MOMENTUM:
        return np.real(np.diag(rho1.matrix)).copy()
    return _diag_transform(rho1)


def _diag_transform(rho1):
    # diagonal of U rho U^dagger, U the continuum-normalised transform
    grid = rho1.grid
    m = rho1.matrix
    left = sfft.fftshift(sfft.fft(m, axis=0, norm="ortho"), axes=0) * grid._phase[:, None]
    both = sfft.fftshift(sfft.fft(left.conj(), axis=1, norm="ortho"), axes=1) * grid._phase[None, :]
    return np.real(np.diag(both.conj())).copy()


def density_of_state(state, representation=POSITION):
    """One-body density straight from the amplitudes (no n x n matrix)."""
    h = state.grid.spacing(representation)
    out = np.zeros(state.grid.n_points)
    for k, arr in _components(state, representation):
        out += _weight(state, k, h) * np.sum(np.abs(arr) ** 2, axis=(0, 2))
    return out


def occupation_fractions(state, count=4):
    """Largest ``count`` natural occupations divided by N."""
    grid = state.grid
    n = grid.n_points
    h = grid.dx
    comps = [(_weight(state, k, h) * h, arr) for k, arr in _components(state, POSITION)]
    if n <= _DENSE_LIMIT:
        rho = np.zeros((n, n), dtype=complex)
        for w, arr in comps:
            for col in arr:
                rho += w * (col @ col.conj().T)
        ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[::-1][:count]
    else:
        def matvec(v):
            v = np.asarray(v).ravel()
            out = np.zeros(n, dtype=complex)
            for w, arr in comps:
                for col in arr:
                    out += w * (col @ (col.conj().T @ v))
            return out

        op = LinearOperator((n, n), matvec=matvec, dtype=complex)
        v0 = np.ones(n, dtype=complex)
        ev = np.sort(eigsh(op, k=count, which="LA", v0=v0, tol=1e-10, return_eigenvectors=False))[::-1]
    out = np.zeros(count)
    out[: len(ev)] = np.clip(ev, 0.0, None)
    return out / state.N


def nonescape_probability(rho, grid, x_m, N):
    """Share of the N particles found at x < x_m (absorbed ones count as escaped)."""
    if not (grid.x_min < x_m < grid.x_max):
        raise ConfigurationError(f"barrier position {x_m} lies outside the grid")
    inside = grid.x < x_m
    return float(np.sum(np.asarray(rho)[inside]) * grid.dx / N)


def _masked_ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return out


def g1(rho1):
    """Normalised first-order correlation; NaN where the density is below the floor."""
    d = np.real(np.diag(rho1.matrix))
    ok = d > MASK_FLOOR * d.max()
    root = np.sqrt(np.where(ok, d, np.nan))
    out = _masked_ratio(rho1.matrix, root[:, None] * root[None, :])
    out[np.diag_indices_from(out)] = np.where(ok, 1.0, np.nan)
    return out


def two_body_diagonal(state, representation=POSITION):
    """rho2(x1, x2; x1, x2) normalised to N(N-1)."""
    if state.N < 2:
        raise DomainError("two-body density needs N >= 2")
    grid = state.grid
    h = grid.spacing(representation)
    n = grid.n_points
    out = np.zeros((n, n))
    if state.kind == "meanfield":
        phi = state.values if representation == POSITION else _momentum_amplitudes(state.values, grid)
        p = np.abs(phi) ** 2
        out = state.N * (state.N - 1) * np.outer(p, p)
        return TwoBodyDiagonal(out, representation, state.N, grid)
    for k, arr in _components(state, representation):
        if k < 2:
            continue
        p = np.abs(arr.reshape((arr.shape[0], n, n, -1))) ** 2
        out += k * (k - 1) * h ** (k - 2) * p.sum(axis=(0, 3))
    return TwoBodyDiagonal(0.5 * (out + out.T), representation, state.N, grid)


def g2(two_body, rho):
    if two_body.N < 2:
        raise DomainError("g2 needs N >= 2")
    rho = np.asarray(rho, dtype=float)
    ok = rho > MASK_FLOOR * rho.max()
    r = np.where(ok, rho, np.nan)
    return _masked_ratio(two_body.values, np.outer(r, r))


def detect_peaks(momentum_density, k, k_floor=0.25, min_prominence=0.05):
    """Local maxima of rho(k) for k > k_floor, highest k first.

    ``min_prominence`` is relative to the largest value above ``k_floor``.
    Returns a list of ``(k, height)``.
    """
    values = np.asarray(momentum_density, dtype=float)
    k = np.asarray(k, dtype=float)
    sel = k > k_floor
    if sel.sum() < 3:
        return []
    kv, vv = k[sel], values[sel]
    top = vv.max()
    if not top > 0:
        return []
    idx, _ = find_peaks(vv, prominence=min_prominence * top)
    return [(float(kv[i]), float(vv[i])) for i in sorted(idx, key=lambda i: -kv[i])]


def snapshot_observables(state, t, x_m, occupations=4):
    from .solver.dynamics import Snapshot

    grid = state.grid
    rho_x = density_of_state(state, POSITION)
    rho_k = density_of_state(state, MOMENTUM)
    pnot = nonescape_probability(rho_x, grid, x_m, state.N) if np.isfinite(x_m) else float(
        np.sum(rho_x) * grid.dx / state.N
    )
    occ = occupation_fractions(state, occupations) if occupations else np.zeros(0)
    return Snapshot(
        t=float(t),
        norm=state.norm(),
        particle_fraction=float(np.sum(rho_x) * grid.dx / state.N),
        pnot=pnot,
        density=rho_x,
        momentum_density=rho_k,
        occupations=occ,
        sector_traces=state.sector_traces() if state.kind == "exact" else {},
    )

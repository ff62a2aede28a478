"""Ground states in the harmonic trap.

``relax_ground_state`` runs split-step imaginary-time propagation with
renormalisation on a compact window around the trap centre, then polishes
the result with a few Lanczos iterations of the same discrete Hamiltonian.
Split-step imaginary time converges to a state biased by O(dtau^2) and the
grid delta makes that bias large, so the Lanczos stage is what delivers the
discrete ground state.  The polished state is embedded back into the full
grid.
"""
from math import factorial

import numpy as np
import scipy.fft as sfft
from scipy.special import eval_hermite
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from ..errors import ConfigurationError, ConvergenceError, DomainError
from ..lattice import Grid
from ..potential import PRE_QUENCH, evaluate
from .hamiltonian import ContactInteraction, energy_expectation, kinetic_diagonal, potential_diagonal
from .state import EXACT, MAX_EXACT_N, MEANFIELD, ManyBodyWavefunction, symmetrize

__all__ = ["relax_ground_state", "gp_ground_energy", "relax_meanfield", "energy", "BOUNDARY_FLOOR"]

BOUNDARY_FLOOR = 1e-12
_WINDOW = 8.0


def _window(grid, half_width):
    """Power-of-two block of grid points centred on x = 0."""
    n = grid.n_points
    m = 8
    while m < 2 * half_width / grid.dx and m < n:
        m *= 2
    i0 = int(np.argmin(np.abs(grid.x))) - m // 2
    if m >= n or i0 < 0 or i0 + m > n:
        return grid, 0
    x0 = grid.x[i0]
    return Grid(float(x0), float(x0 + m * grid.dx), m), i0


def widest_density(x, N):
    """Density of N fermionised bosons (lowest N oscillator orbitals).

    Repulsion only spreads the cloud, so this bounds the tails for any
    lambda0 >= 0.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for n in range(N):
        c = 1.0 / np.sqrt(2.0**n * factorial(n) * np.sqrt(np.pi))
        out += (c * eval_hermite(n, x) * np.exp(-0.5 * x * x)) ** 2
    return out


def _check_width(sub, N):
    edge = float(widest_density(np.array([sub.x_min, sub.x_max]), N).max())
    if edge > BOUNDARY_FLOOR:
        raise ConfigurationError(
            f"trap density bound {edge:.2e} at the grid edge exceeds {BOUNDARY_FLOOR}; widen the grid"
        )


def _operators(sub, N, interaction):
    v1 = evaluate(sub.x, None, PRE_QUENCH)
    pair = interaction.pair_profile(sub) if N > 1 else None
    return kinetic_diagonal(sub, N), potential_diagonal(v1, N, pair)


def _normalise(psi, dx):
    return psi / np.sqrt(np.sum(np.abs(psi) ** 2) * dx**psi.ndim)


def _gaussian_guess(sub, N):
    g = np.exp(-0.5 * sub.x**2)
    psi = g
    for _ in range(N - 1):
        psi = np.multiply.outer(psi, g)
    return psi.astype(float)


def _imaginary_time(psi, kin, pot, dx, dtau, tol, max_steps):
    """Power iteration with the symmetric split propagator U.

    The tracked energy is ``-ln<psi|U|psi> / dtau``; U is symmetric positive
    definite, so this sequence never increases.
    """
    axes = tuple(range(psi.ndim))
    half = np.exp(-0.5 * dtau * pot)
    ekin = np.exp(-dtau * kin)
    cell = dx**psi.ndim
    history = []
    delta = np.inf
    for _ in range(max_steps):
        nxt = half * sfft.ifftn(ekin * sfft.fftn(half * psi, axes=axes), axes=axes).real
        history.append(-np.log(np.sum(psi * nxt) * cell) / dtau)
        psi = _normalise(nxt, dx)
        if len(history) > 1:
            delta = history[-2] - history[-1]
            if abs(delta) < tol:
                return psi, history
    raise ConvergenceError(
        f"imaginary time did not converge in {max_steps} steps", last_delta=delta
    )


def _lanczos(psi, kin, pot, tol=1e-12):
    shape = psi.shape
    size = psi.size

    def matvec(v):
        v = v.reshape(shape)
        hv = sfft.ifftn(kin * sfft.fftn(v)).real + pot * v
        return hv.ravel()

    op = LinearOperator((size, size), matvec=matvec, dtype=float)
    try:
        w, vec = eigsh(op, k=1, which="SA", v0=psi.ravel(), tol=tol, ncv=min(20, size - 1))
    except ArpackNoConvergence as exc:
        raise ConvergenceError("Lanczos refinement did not converge", last_delta=np.nan) from exc
    out = vec[:, 0].reshape(shape)
    if out.sum() < 0:
        out = -out
    return out, float(w[0])


def relax_ground_state(
    N,
    lambda0,
    grid,
    interaction_width=0.0,
    kind=EXACT,
    dtau=0.05,
    tol=1e-11,
    max_steps=20000,
    method="imaginary_time",
    window=_WINDOW,
    initial=None,
):
    """Ground state of N bosons in the harmonic trap and its energy.

    ``method="lanczos"`` skips the imaginary-time stage and starts the
    Lanczos iteration from a Gaussian product (or from ``initial``, a real
    amplitude on the same grid); energy tables use it.
    Returns ``(ManyBodyWavefunction, energy)``.
    """
    if kind == MEANFIELD:
        return relax_meanfield(N, lambda0, grid, tol=tol, max_steps=max_steps)
    if not 1 <= int(N) <= MAX_EXACT_N or int(N) != N:
        raise DomainError(f"exact solver handles N = 1..{MAX_EXACT_N}, got {N}")
    if method not in ("imaginary_time", "lanczos"):
        raise ConfigurationError(f"unknown relaxation method {method!r}")
    N = int(N)
    interaction = ContactInteraction(float(lambda0), float(interaction_width))
    sub, i0 = _window(grid, window)
    _check_width(sub, N)
    dx = sub.dx
    kin, pot = _operators(sub, N, interaction)
    if initial is None:
        psi = _gaussian_guess(sub, N)
    else:
        psi = np.real(initial[(slice(i0, i0 + sub.n_points),) * N])
    psi = _normalise(psi, dx)
    history = []
    if method == "imaginary_time":
        psi, history = _imaginary_time(psi, kin, pot, dx, dtau, tol, max_steps)
    psi, _ = _lanczos(psi, kin, pot)
    psi = _normalise(symmetrize(psi), dx)
    e = energy_expectation(psi, kin, pot, dx)

    values = np.zeros((grid.n_points,) * N, dtype=complex)
    values[(slice(i0, i0 + sub.n_points),) * N] = psi
    state = ManyBodyWavefunction(N, float(lambda0), grid, values, EXACT, float(interaction_width))
    state.energy_history = history
    return state, e


def _meanfield_energy(phi, N, lambda0, kin, v1, dx):
    pk = sfft.fft(phi, norm="ortho")
    h = float(np.sum(kin * np.abs(pk) ** 2) + np.sum(v1 * np.abs(phi) ** 2)) * dx
    quartic = float(np.sum(np.abs(phi) ** 4) * dx)
    return N * h + 0.5 * lambda0 * N * (N - 1) * quartic


def relax_meanfield(N, lambda0, grid, tol=1e-11, max_steps=200000, window=_WINDOW + 4.0):
    """Single-orbital (Gross-Pitaevskii) ground state; returns ``(state, energy)``.

    The orbital feels ``x^2/2 + lambda0 (N-1) |phi|^2``.  Imaginary time is
    run with a shrinking step so the split-step bias drops below ``tol``.
    """
    if int(N) != N or N < 1:
        raise ConfigurationError("N must be a positive integer")
    if lambda0 < 0:
        raise ConfigurationError("attractive interactions (lambda0 < 0) are not supported")
    N = int(N)
    sub, i0 = _window(grid, window)
    _check_width(sub, 1)
    dx = sub.dx
    kin = 0.5 * sub.k_fft**2
    v1 = evaluate(sub.x, None, PRE_QUENCH)
    g = lambda0 * (N - 1)
    phi = _normalise(np.exp(-0.5 * sub.x**2), dx)
    e_old = _meanfield_energy(phi, N, lambda0, kin, v1, dx)
    steps = 0
    scale = max(1.0, abs(e_old))
    for dtau in (0.05, 0.005, 0.0005):
        ekin = np.exp(-dtau * kin)
        delta = np.inf
        while abs(delta) >= tol * scale:
            for _ in range(10):
                phi = np.exp(-0.5 * dtau * (v1 + g * phi**2)) * phi
                phi = sfft.ifft(ekin * sfft.fft(phi)).real
                phi = _normalise(np.exp(-0.5 * dtau * (v1 + g * phi**2)) * phi, dx)
            steps += 10
            e = _meanfield_energy(phi, N, lambda0, kin, v1, dx)
            delta = (e_old - e) / 10
            e_old = e
            if steps > max_steps:
                raise ConvergenceError("mean-field relaxation did not converge", last_delta=delta)
    values = np.zeros(grid.n_points, dtype=complex)
    values[i0:i0 + sub.n_points] = phi
    state = ManyBodyWavefunction(N, float(lambda0), grid, values, MEANFIELD)
    return state, float(e_old)


def gp_ground_energy(N, lambda0, grid, tol=1e-11):
    """Mean-field ground energy ``N <h> + lambda0 N(N-1)/2 int |phi|^4``."""
    if int(N) != N or N < 2:
        raise DomainError("gp_ground_energy needs N >= 2")
    return relax_meanfield(N, lambda0, grid, tol=tol)[1]


def energy(state, spec=None, phase=PRE_QUENCH):
    """Expectation value of the Hamiltonian (no absorber) for an exact or
    mean-field state, in the trap or in the quenched potential."""
    grid = state.grid
    v1 = evaluate(grid.x, spec, phase)
    if state.kind == MEANFIELD:
        phi = state.values / np.sqrt(max(state.norm(), 1e-300))
        kin = 0.5 * grid.k_fft**2
        pk = sfft.fft(phi, norm="ortho")
        h = float(np.sum(kin * np.abs(pk) ** 2) + np.sum(v1 * np.abs(phi) ** 2)) * grid.dx
        quartic = float(np.sum(np.abs(phi) ** 4) * grid.dx)
        N = state.N
        return N * h + 0.5 * state.lambda0 * N * (N - 1) * quartic
    interaction = ContactInteraction(state.lambda0, state.interaction_width)
    pair = interaction.pair_profile(grid) if state.N > 1 else None
    kin = kinetic_diagonal(grid, state.N)
    pot = potential_diagonal(v1, state.N, pair)
    return energy_expectation(state.values, kin, pot, grid.dx)

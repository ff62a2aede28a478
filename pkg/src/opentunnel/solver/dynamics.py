"""Real-time quench propagation.

Second-order (Strang) splitting: half a step of the diagonal position-space
factor (trap/threshold potential, pair interaction, absorber), a full
kinetic step in momentum space, another half step.  Consecutive half steps
are merged between snapshots.

The absorber ``-iW(x)`` removes amplitude near the far edge.  Removing one
boson from an (k+1)-body state leaves a k-body state, which is kept:
every ``inject_interval`` the absorbed part of each sector is handed to the
sector below through the jump term

    rho_k += (k+1) * 2 dt int W(y) c(..., y) c*(..., y) dy

and the mixed lower sectors are re-compressed through their Gram matrix.
Without this channel a trapped boson would vanish together with an escaped
partner and the nonescape probability could never settle at N_IN / N.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from ..errors import ConfigurationError, NumericalInstabilityError
from ..potential import POST_QUENCH, X_C2, evaluate
from .hamiltonian import ContactInteraction, kinetic_diagonal, potential_diagonal
from .state import EXACT, MEANFIELD

__all__ = ["Absorber", "Snapshot", "Trajectory", "propagate", "STIFFNESS_LIMIT", "NORM_TOLERANCE"]

STIFFNESS_LIMIT = np.pi
NORM_TOLERANCE = {"double": 1e-8, "single": 1e-5}
_DTYPES = {"double": np.complex128, "single": np.complex64}


@dataclass(frozen=True)
class Absorber:
    """Negative imaginary potential ``strength * ((x - onset)/(x_max - onset))**order``."""

    onset: float
    strength: float = 1.0
    order: int = 4

    def __post_init__(self):
        if not self.strength > 0:
            raise ConfigurationError("absorber strength must be positive")
        if int(self.order) != self.order or self.order < 2:
            raise ConfigurationError("absorber order must be an integer >= 2")

    @classmethod
    def default(cls, grid, strength=1.0, order=4):
        return cls(0.8 * grid.x_max, strength, order)

    def validate(self, grid):
        if not (grid.x_min < self.onset < grid.x_max):
            raise ConfigurationError(
                f"absorber onset {self.onset} must lie strictly inside ({grid.x_min}, {grid.x_max})"
            )
        if self.onset <= X_C2:
            raise ConfigurationError(f"absorber onset {self.onset} must lie beyond x = {X_C2}")

    def values(self, grid):
        self.validate(grid)
        s = np.clip((grid.x - self.onset) / (grid.x_max - self.onset), 0.0, None)
        return self.strength * s**self.order


@dataclass(frozen=True)
class Snapshot:
    t: float
    norm: float
    particle_fraction: float
    pnot: float
    density: np.ndarray
    momentum_density: np.ndarray
    occupations: np.ndarray
    sector_traces: dict = field(default_factory=dict)


@dataclass
class Trajectory:
    grid: object
    N: int
    threshold: float
    barrier_position: float
    dt: float
    snapshots: list = field(default_factory=list)
    kept_states: dict = field(default_factory=dict)
    final_state: object = None
    compression_loss: float = 0.0

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])

    @property
    def norms(self):
        """Norm of the full N-body component (what survives without any loss)."""
        return np.array([s.norm for s in self.snapshots])

    @property
    def surviving(self):
        """Particles still on the grid, as a fraction of N."""
        return np.array([s.particle_fraction for s in self.snapshots])

    @property
    def pnot(self):
        return np.array([s.pnot for s in self.snapshots])

    @property
    def occupations(self):
        return np.array([s.occupations for s in self.snapshots])

    def at(self, t):
        i = int(np.argmin(np.abs(self.times - t)))
        return self.snapshots[i]


def _axes(nd, lead=0):
    return tuple(range(lead, lead + nd))


class _Sector:
    """Split-step factors for k particles (with the absorber)."""

    def __init__(self, k, grid, v1, pair, dt, dtype):
        self.k = k
        ekin = np.exp(-1j * dt * kinetic_diagonal(grid, k))
        pot = potential_diagonal(v1, k, pair)
        self.half = np.exp(-0.5j * dt * pot).astype(dtype)
        self.full = (self.half * self.half).astype(dtype)
        self.kin = ekin.astype(dtype)

    def kinetic(self, arr, lead):
        axes = _axes(self.k, lead)
        return sfft.ifftn(self.kin * sfft.fftn(arr, axes=axes, overwrite_x=True), axes=axes, overwrite_x=True)


def _stiffness_check(interaction, grid, dt):
    if interaction.is_zero:
        return
    kc = interaction.coupled_momentum(grid)
    phase = 0.5 * kc**2 * dt
    if phase > STIFFNESS_LIMIT:
        raise ConfigurationError(
            f"dt={dt} too large: kinetic phase {phase:.2f} at the interaction cutoff k={kc:.2f} "
            f"exceeds {STIFFNESS_LIMIT:.3f} (reduce dt or widen the interaction)"
        )


def _compress(cols, k, rank, floor):
    """Re-express sum_j |c_j><c_j| with orthogonal columns; drop tiny ones."""
    r = cols.shape[0]
    flat = cols.reshape(r, -1)
    gram = (flat.conj() @ flat.T).astype(np.complex128)
    w, u = np.linalg.eigh(gram)
    order = np.argsort(w)[::-1]
    w, u = w[order], u[:, order]
    total = max(float(w.sum()), 0.0)
    keep = w > floor * max(total, 1e-300)
    keep[rank:] = False
    lost = float(w[~keep].clip(min=0).sum())
    new = (u[:, keep].T.astype(flat.dtype) @ flat).reshape((int(keep.sum()),) + cols.shape[1:])
    return new, lost


def _jump(source, W_idx, weights, k):
    """Columns of sqrt(weight_y) * source[..., y] for every absorber point y.

    ``source`` has shape (r, n, ..., n) with k+1 particle axes.
    """
    taken = np.take(source, W_idx, axis=-1)
    taken = taken * weights.astype(taken.real.dtype)
    taken = np.moveaxis(taken, -1, 1)
    return taken.reshape((-1,) + source.shape[1:-1])


def propagate(
    state,
    spec,
    dt,
    t_final,
    absorber=None,
    snapshot_stride=None,
    precision="double",
    inject_interval=0.5,
    sector_rank=96,
    sector_floor=1e-12,
    keep_times=(),
    occupations=4,
    check_stiffness=True,
    potential=None,
):
    """Evolve ``state`` after the quench into the open potential ``spec``.

    ``spec=None`` keeps the harmonic trap (no quench); ``potential`` (an
    array on the grid) replaces both and disables P_not.  Snapshots are taken
    at t=0 and every ``snapshot_stride`` steps; ``keep_times`` lists times
    at which full state copies are stored for later analysis.
    """
    from ..observables import snapshot_observables

    if precision not in _DTYPES:
        raise ConfigurationError(f"precision must be one of {sorted(_DTYPES)}")
    if not dt > 0 or not t_final > 0:
        raise ConfigurationError("dt and t_final must be positive")
    grid = state.grid
    nsteps = int(round(t_final / dt))
    if abs(nsteps * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ConfigurationError("t_final must be a whole number of steps")
    stride = int(snapshot_stride or nsteps)
    if stride < 1:
        raise ConfigurationError("snapshot_stride must be a positive integer")
    dtype = _DTYPES[precision]
    tol = NORM_TOLERANCE[precision]

    interaction = ContactInteraction(state.lambda0, state.interaction_width)
    if check_stiffness:
        _stiffness_check(interaction, grid, dt)

    phase = POST_QUENCH if spec is not None else "pre_quench"
    if potential is not None:
        v1 = np.asarray(potential, dtype=complex)
        if v1.shape != grid.x.shape:
            raise ConfigurationError("potential must have one value per grid point")
        spec = None
    else:
        v1 = evaluate(grid.x, spec, phase).astype(complex)
    W = np.zeros(grid.n_points)
    if absorber is not None:
        W = absorber.values(grid)
        v1 = v1 - 1j * W
    x_m = spec.barrier_position if spec is not None else np.inf
    threshold = spec.threshold if spec is not None else np.nan

    state = state.copy()
    traj = Trajectory(grid, state.N, threshold, x_m, dt)
    keep = sorted(float(t) for t in keep_times)

    if state.kind == MEANFIELD:
        return _propagate_meanfield(state, v1, dt, nsteps, stride, dtype, tol, traj, x_m, keep, occupations)

    N = state.N
    pair = interaction.pair_profile(grid) if N > 1 else None
    sectors = {k: _Sector(k, grid, v1, pair if k > 1 else None, dt, dtype) for k in range(1, N + 1)}
    psi = state.values.astype(dtype)
    lower = {k: np.asarray(c, dtype=dtype) for k, c in state.sectors.items()}
    absorbing = absorber is not None and N > 1
    if absorbing:
        W_idx = np.nonzero(W > 0)[0]
        inject_every = max(1, int(round(inject_interval / dt)))
        w_unit = W[W_idx] * grid.dx * inject_every * dt

    def record(step, psi, lower):
        t = step * dt
        if not np.all(np.isfinite(psi)) or not all(np.all(np.isfinite(c)) for c in lower.values()):
            raise NumericalInstabilityError(f"non-finite amplitudes at t={t:g}")
        state.values = psi.astype(complex)
        state.sectors = {k: c.astype(complex) for k, c in lower.items()}
        snap = snapshot_observables(state, t, x_m, occupations)
        if traj.snapshots and snap.norm > traj.snapshots[-1].norm * (1 + tol):
            raise NumericalInstabilityError(
                f"norm grew from {traj.snapshots[-1].norm!r} to {snap.norm!r} at t={t:g}"
            )
        traj.snapshots.append(snap)
        while keep and keep[0] <= t + 0.5 * dt:
            keep.pop(0)
            traj.kept_states[round(t, 12)] = state.copy()

    record(0, psi, lower)
    top = sectors[N]
    open_half = True
    for step in range(1, nsteps + 1):
        if open_half:
            psi *= top.half
            for k, c in lower.items():
                c *= sectors[k].half
        if absorbing and step % inject_every == 0:
            _inject(psi, lower, N, W_idx, w_unit, sector_rank, sector_floor, traj, dtype)
        psi = top.kinetic(psi, 0)
        for k in list(lower):
            lower[k] = sectors[k].kinetic(lower[k], 1)
        closing = step % stride == 0 or step == nsteps
        if closing:
            psi *= top.half
            for k, c in lower.items():
                c *= sectors[k].half
            record(step, psi, lower)
            open_half = True
        else:
            psi *= top.full
            for k, c in lower.items():
                c *= sectors[k].full
            open_half = False
    traj.final_state = state
    return traj


def _inject(psi, lower, N, W_idx, w_unit, rank, floor, traj, dtype):
    """Move absorbed amplitude of every sector into the sector below."""
    sources = {N: psi[None]}
    sources.update(lower)
    for k in range(N - 1, 0, -1):
        src = sources.get(k + 1)
        if src is None or src.shape[0] == 0:
            continue
        weights = np.sqrt(2.0 * (k + 1) * w_unit)
        new = _jump(src, W_idx, weights, k).astype(dtype)
        if k in lower and lower[k].shape[0]:
            new = np.concatenate([lower[k], new], axis=0)
        lower[k], lost = _compress(new, k, rank, floor)
        traj.compression_loss += lost
        sources[k] = lower[k]


def _propagate_meanfield(state, v1, dt, nsteps, stride, dtype, tol, traj, x_m, keep, occupations):
    """Gross-Pitaevskii evolution of the orbital; density is N |phi|^2."""
    from ..observables import snapshot_observables

    grid = state.grid
    N = state.N
    g = state.lambda0 * (N - 1)
    ekin = np.exp(-1j * dt * 0.5 * grid.k_fft**2).astype(dtype)
    halfv = np.exp(-0.5j * dt * v1).astype(dtype)
    phi = state.values.astype(dtype)

    def record(step):
        t = step * dt
        if not np.all(np.isfinite(phi)):
            raise NumericalInstabilityError(f"non-finite amplitudes at t={t:g}")
        state.values = phi.astype(complex)
        snap = snapshot_observables(state, t, x_m, occupations)
        if traj.snapshots and snap.norm > traj.snapshots[-1].norm * (1 + tol):
            raise NumericalInstabilityError(f"norm grew at t={t:g}")
        traj.snapshots.append(snap)
        while keep and keep[0] <= t + 0.5 * dt:
            keep.pop(0)
            traj.kept_states[round(t, 12)] = state.copy()

    record(0)
    for step in range(1, nsteps + 1):
        phi = halfv * np.exp(-0.5j * dt * g * np.abs(phi) ** 2).astype(dtype) * phi
        phi = sfft.ifft(ekin * sfft.fft(phi))
        phi = halfv * np.exp(-0.5j * dt * g * np.abs(phi) ** 2).astype(dtype) * phi
        if step % stride == 0 or step == nsteps:
            record(step)
    traj.final_state = state
    return traj

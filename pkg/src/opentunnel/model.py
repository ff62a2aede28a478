"""Energetics model for the counting statistics of the emission.

A final configuration |N_IN, N_OUT> keeps N_IN bosons in the trap and puts
N_OUT at the threshold energy T, so ``E_TOT = E_HO(N_IN) + N_OUT * T``.
Emitting the i-th boson costs the chemical potential
``mu_i = E_HO(N-i+1) - E_HO(N-i)`` and leaves it with momentum
``sqrt(2 (mu_i - T))``.  A configuration is reachable when its E_TOT does
not exceed the initial energy E_HO(N); the lowest reachable one is the
predicted final state.
"""
import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError, DataError
from .lattice import make_grid
from .solver.ground import gp_ground_energy, relax_ground_state
from .solver.pair import exact_pair_energy

__all__ = [
    "EnergyTable",
    "FinalState",
    "EmissionLine",
    "Crossing",
    "exact_table",
    "meanfield_table",
    "energy_table",
    "chemical_potential",
    "emission_momentum",
    "total_energy",
    "final_states",
    "predict_final_state",
    "emission_spectrum",
    "critical_points",
    "table_family",
    "write_energetics_csv",
    "write_crossings_csv",
    "state_label",
]

EXACT = "exact"
ORACLE = "oracle"
MEANFIELD = "meanfield"
TIE_TOLERANCE = 1e-12

# trap grid for exact three-boson energies; 64^3 on [-6, 6) agrees with
# 128^3 on [-8, 8) to a few 1e-6
N3_GRID = (-6.0, 6.0, 64)
MF_GRID = (-12.0, 12.0, 256)


@dataclass
class EnergyTable:
    """E_HO(n, lambda0) for n = 0..N, filled on demand.

    ``entries`` maps n to ``(energy, source)``; ``provider(n)`` (optional)
    computes missing ones.
    """

    N: int
    lambda0: float
    entries: dict = field(default_factory=dict)
    provider: object = None

    def __post_init__(self):
        self.entries.setdefault(0, (0.0, EXACT))
        self.entries.setdefault(1, (0.5, EXACT))

    def entry(self, n):
        if n not in self.entries:
            if self.provider is None or not 0 <= n <= self.N:
                raise DataError(f"energy table has no entry for n={n}")
            self.entries[n] = self.provider(n)
        return self.entries[n]

    def __getitem__(self, n):
        return self.entry(n)[0]

    def source(self, n):
        return self.entry(n)[1]

    def complete(self):
        for n in range(self.N + 1):
            self.entry(n)
        return self

    def sources(self):
        return sorted({self.source(n) for n in range(self.N + 1)})


@dataclass(frozen=True)
class FinalState:
    N_IN: int
    N_OUT: int
    energy: float
    available: bool

    @property
    def label(self):
        return state_label(self.N_IN, self.N_OUT)

    @property
    def nonescape(self):
        return self.N_IN / (self.N_IN + self.N_OUT)


@dataclass(frozen=True)
class EmissionLine:
    index: int
    mu: float
    k: object  # float, or None when the channel is closed

    @property
    def closed(self):
        return self.k is None


@dataclass(frozen=True)
class Crossing:
    parameter: float
    first: tuple
    second: tuple
    energy: float


def state_label(n_in, n_out):
    return f"|{n_in},{n_out}>"


_N3_CACHE = {}
_N3_STATES = {}


def _exact_three(lambda0):
    lambda0 = float(lambda0)
    if lambda0 in _N3_CACHE:
        return _N3_CACHE[lambda0]
    grid = make_grid(*N3_GRID)
    # warm start from the nearest coupling already solved
    guess = None
    if _N3_CACHE:
        near = min(_N3_CACHE, key=lambda l: abs(l - lambda0))
        guess = _N3_STATES.get(near)
    state, e = relax_ground_state(3, lambda0, grid, method="lanczos", initial=guess)
    _N3_CACHE[lambda0] = e
    _N3_STATES[lambda0] = state.values.real
    return e


@lru_cache(maxsize=4096)
def _meanfield(n, lambda0):
    return gp_ground_energy(n, lambda0, make_grid(*MF_GRID))


@lru_cache(maxsize=1024)
def _pair(lambda0):
    return exact_pair_energy(lambda0)


def exact_table(N, lambda0):
    """n = 2 from the pair reduction, n = 3 from the product-grid solver,
    larger n from the mean-field functional."""
    lambda0 = float(lambda0)
    _check(N, lambda0)

    def provider(n):
        if n == 2:
            return (_pair(lambda0), ORACLE)
        if n == 3:
            return (_exact_three(lambda0), EXACT)
        return (_meanfield(n, lambda0), MEANFIELD)

    return EnergyTable(N, lambda0, provider=provider)


def meanfield_table(N, lambda0):
    lambda0 = float(lambda0)
    _check(N, lambda0)
    return EnergyTable(N, lambda0, provider=lambda n: (_meanfield(n, lambda0), MEANFIELD))


def energy_table(N, lambda0, source="auto"):
    """``source``: ``auto`` (exact up to 3, mean-field above), ``exact`` or
    ``meanfield``."""
    if source == MEANFIELD:
        return meanfield_table(N, lambda0)
    if source in ("auto", EXACT):
        if source == EXACT and N > 3:
            raise ConfigurationError("exact energy tables stop at N = 3")
        return exact_table(N, lambda0)
    raise ConfigurationError(f"unknown energy source {source!r}")


def _check(N, lambda0):
    if int(N) != N or N < 1:
        raise ConfigurationError("N must be a positive integer")
    if lambda0 < 0:
        raise ConfigurationError("attractive interactions (lambda0 < 0) are not supported")


def chemical_potential(i, table):
    N = table.N
    if not 1 <= i <= N:
        raise DataError(f"process index {i} outside 1..{N}")
    return table[N - i + 1] - table[N - i]


def emission_momentum(mu, T):
    """``sqrt(2 (mu - T))`` or ``None`` when the channel is closed (mu <= T)."""
    if mu <= T:
        return None
    return float(np.sqrt(2.0 * (mu - T)))


def total_energy(n_in, n_out, T, table):
    return table[n_in] + n_out * T


def final_states(N, T, table):
    e0 = table[N]
    out = []
    for n_in in range(N, -1, -1):
        e = total_energy(n_in, N - n_in, T, table)
        out.append(FinalState(n_in, N - n_in, e, bool(e <= e0)))
    return out


def predict_final_state(N, T, table):
    """Lowest reachable configuration; near-ties go to the larger N_IN."""
    best = None
    for s in final_states(N, T, table):  # ordered by decreasing N_IN
        if not s.available:
            continue
        tol = TIE_TOLERANCE * max(1.0, abs(s.energy))
        if best is None or s.energy < best.energy - tol:
            best = s
    return best


def emission_spectrum(N, T, table):
    lines = []
    for i in range(1, N + 1):
        mu = chemical_potential(i, table)
        lines.append(EmissionLine(i, mu, emission_momentum(mu, T)))
    return lines


def table_family(N, source="auto"):
    """lambda0 -> EnergyTable, memoised."""
    cache = {}

    def family(lambda0):
        key = float(lambda0)
        if key not in cache:
            cache[key] = energy_table(N, key, source)
        return cache[key]

    return family


def critical_points(N, family, sweep, fixed, lo, hi, resolution=41, xtol=1e-6):
    """Parameter values where two E_TOT curves swap order.

    ``sweep="T"`` varies the threshold at fixed ``lambda0 = fixed``;
    ``sweep="lambda0"`` varies the coupling at fixed ``T = fixed``.  The
    range is scanned at ``resolution`` points and each sign change of a
    pairwise difference is refined with a bracketing root finder.
    """
    if sweep not in ("T", "lambda0"):
        raise ConfigurationError("sweep must be 'T' or 'lambda0'")
    if not hi > lo or resolution < 2:
        raise ConfigurationError("need lo < hi and at least two scan points")
    if sweep == "lambda0" and lo < 0:
        raise ConfigurationError("lambda0 sweep must stay non-negative")

    def curve(n_in, p):
        if sweep == "T":
            return total_energy(n_in, N - n_in, p, family(fixed))
        return total_energy(n_in, N - n_in, fixed, family(p))

    grid = np.linspace(lo, hi, resolution)
    pairs = [(a, b) for a in range(N, -1, -1) for b in range(a - 1, -1, -1)]
    # parallel constant curves never cross; skip without touching the tables
    if sweep == "lambda0":
        pairs = [(a, b) for a, b in pairs if not (a <= 1 and b <= 1)]
    out = []
    for a, b in pairs:
        diff = lambda p: curve(a, p) - curve(b, p)
        vals = [diff(p) for p in grid]
        roots = [grid[j] for j in range(resolution) if vals[j] == 0.0]
        for j in range(resolution - 1):
            if vals[j] * vals[j + 1] < 0:
                roots.append(brentq(diff, grid[j], grid[j + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
        for root in sorted(roots):
            out.append(Crossing(float(root), (a, N - a), (b, N - b), float(curve(a, root))))
    out.sort(key=lambda c: (c.parameter, c.first, c.second))
    return out


def energetics_rows(N, family, sweep, fixed, values):
    """Rows ``[param, E_TOT(|N,0>), E_TOT(|N-1,1>), ..., E_TOT(|0,N>)]``."""
    rows = []
    for p in values:
        table = family(fixed if sweep == "T" else p)
        T = p if sweep == "T" else fixed
        rows.append([float(p)] + [total_energy(n, N - n, T, table) for n in range(N, -1, -1)])
    return rows


def write_energetics_csv(path, N, rows, param, comment=None, sources=None):
    header = [param] + [f"E_TOT{state_label(n, N - n)}" for n in range(N, -1, -1)]
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("# units: dimensionless (hbar = m = 1)")
        if sources:
            fh.write(f"; energy sources: {','.join(sources)}")
        fh.write("\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
    return path


def write_crossings_csv(path, crossings, param, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("# units: dimensionless (hbar = m = 1)\n")
        w = csv.writer(fh)
        w.writerow([param, "state_a", "state_b", "E_TOT"])
        for c in crossings:
            w.writerow([repr(c.parameter), state_label(*c.first), state_label(*c.second), repr(c.energy)])
    return path

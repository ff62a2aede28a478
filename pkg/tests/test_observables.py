import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opentunnel.errors import ConfigurationError, DataIntegrityError, DomainError, UsageError
from opentunnel.lattice import make_grid
from opentunnel.observables import (
    OneBodyDensityMatrix,
    density,
    density_of_state,
    detect_peaks,
    g1,
    g2,
    momentum_density,
    natural_decomposition,
    nonescape_probability,
    occupation_fractions,
    one_body_density_matrix,
    two_body_diagonal,
)
from opentunnel.potential import PotentialSpec
from opentunnel.solver import relax_ground_state, relax_meanfield
from opentunnel.solver.state import ManyBodyWavefunction, symmetrize

toy = make_grid(-2, 2, 8)


def orbital(grid, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)
    return v / np.sqrt(np.sum(np.abs(v) ** 2) * grid.dx)


def two_mode(grid, a, b):
    # orthonormalise b against a, then symmetrise the product
    b = b - a * np.sum(np.conj(a) * b) * grid.dx
    b = b / np.sqrt(np.sum(np.abs(b) ** 2) * grid.dx)
    psi = (np.outer(a, b) + np.outer(b, a)) / np.sqrt(2)
    return ManyBodyWavefunction(2, 0.0, grid, psi)


def brute_rho1(psi, dx):
    n = psi.shape[0]
    out = np.zeros((n, n), complex)
    for x in range(n):
        for xp in range(n):
            out[x, xp] = 2 * sum(psi[x, y] * np.conj(psi[xp, y]) for y in range(n)) * dx
    return out


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_partial_trace_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    psi = symmetrize(rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)))
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * toy.dx**2)
    s = ManyBodyWavefunction(2, 0.0, toy, psi)
    rho = one_body_density_matrix(s)
    assert np.max(np.abs(rho.matrix - brute_rho1(psi, toy.dx))) < 1e-12
    m = rho.matrix
    assert np.max(np.abs(m - m.conj().T)) < 1e-12
    assert abs(np.trace(m).real * toy.dx - 2) < 1e-12
    assert np.min(np.linalg.eigvalsh(m)) > -1e-12
    dec = natural_decomposition(rho)
    assert abs(dec.occupations.sum() - 1) < 1e-12


def test_product_and_two_mode_occupations():
    a, b = orbital(toy, 1), orbital(toy, 2)
    prod = ManyBodyWavefunction(2, 0.0, toy, np.outer(a, a))
    f = natural_decomposition(one_body_density_matrix(prod)).occupations
    assert abs(f[0] - 1) < 1e-12 and np.all(np.abs(f[1:]) < 1e-12)
    f = natural_decomposition(one_body_density_matrix(two_mode(toy, a, b))).occupations
    assert np.allclose(f[:2], 0.5, atol=1e-12) and np.all(np.abs(f[2:]) < 1e-12)
    assert np.allclose(occupation_fractions(two_mode(toy, a, b), 3), [0.5, 0.5, 0.0], atol=1e-12)


def test_decomposition_of_a_fixed_matrix():
    m = np.zeros((8, 8))
    m[:2, :2] = 1.0 / toy.dx
    dec = natural_decomposition(OneBodyDensityMatrix(m, "position", 2, toy))
    assert np.allclose(dec.occupations, [1] + [0] * 7, atol=1e-14)
    assert abs(np.sum(np.abs(dec.orbitals[0]) ** 2) * toy.dx - 1) < 1e-12
    bad = m.astype(complex)
    bad[0, 1] += 1e-3j
    with pytest.raises(DataIntegrityError):
        natural_decomposition(OneBodyDensityMatrix(bad, "position", 2, toy))


def test_g1_of_condensate_and_fragmented_state():
    a, b = orbital(toy, 3), orbital(toy, 4)
    c = g1(one_body_density_matrix(ManyBodyWavefunction(2, 0.0, toy, np.outer(a, a))))
    assert np.allclose(np.abs(c), 1.0, atol=1e-12)
    frag = g1(one_body_density_matrix(two_mode(toy, a, b)))
    assert np.allclose(np.diag(frag), 1.0) and np.nanmax(np.abs(frag)) <= 1 + 1e-12
    assert np.nanmin(np.abs(frag)) < 0.99


def test_g1_masks_empty_points():
    psi = np.zeros((8, 8), complex)
    psi[2:6, 2:6] = 1.0
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * toy.dx**2)
    c = g1(one_body_density_matrix(ManyBodyWavefunction(2, 0.0, toy, psi)))
    assert np.all(np.isnan(c[0])) and np.all(np.isnan(c[:, 7]))
    assert np.allclose(c[2:6, 2:6], 1.0)


@pytest.mark.parametrize("representation", ["position", "momentum"])
def test_ideal_condensate_g2(representation):
    g = make_grid(-8, 8, 64)
    one, _ = relax_ground_state(1, 0.0, g)
    phi = one.values
    pair = ManyBodyWavefunction(2, 0.0, g, np.outer(phi, phi))
    mf, _ = relax_meanfield(101, 0.0, make_grid(-12, 12, 128))
    for state in (pair, mf):
        rho = density_of_state(state, representation)
        c = g2(two_body_diagonal(state, representation), rho)
        n = state.N
        assert np.nanmax(np.abs(c - (n - 1) / n)) < 1e-8


def test_g2_symmetry_and_domain():
    g = make_grid(-8, 8, 64)
    s, _ = relax_ground_state(2, 1.0, g, interaction_width=0.3)
    c = g2(two_body_diagonal(s, "momentum"), density_of_state(s, "momentum"))
    assert np.nanmax(np.abs(c - c.T)) < 1e-10
    one, _ = relax_ground_state(1, 0.0, g)
    with pytest.raises(DomainError):
        two_body_diagonal(one)


def test_parseval_and_momentum_routes():
    g = make_grid(-8, 8, 64)
    s, _ = relax_ground_state(2, 1.0, g, interaction_width=0.3)
    rho_x = density_of_state(s)
    rho_k = density_of_state(s, "momentum")
    assert abs(np.sum(rho_x) * g.dx - np.sum(rho_k) * g.dk) < 1e-10
    rho1 = one_body_density_matrix(s)
    assert np.max(np.abs(density(rho1) - rho_x)) < 1e-12
    assert np.max(np.abs(momentum_density(rho1) - rho_k)) < 1e-10
    assert np.max(np.abs(momentum_density(one_body_density_matrix(s, "momentum")) - rho_k)) < 1e-10
    with pytest.raises(UsageError):
        density(one_body_density_matrix(s, "momentum"))
    with pytest.raises(UsageError):
        one_body_density_matrix(s, "spin")


def test_sparse_occupations_agree_with_dense():
    g = make_grid(-16, 16, 1024)
    mf, _ = relax_meanfield(4, 0.1, g)
    occ = occupation_fractions(mf, 3)
    assert abs(occ[0] - 1) < 1e-10 and np.all(occ[1:] < 1e-10)


def test_nonescape_probability():
    g = make_grid(-8, 24, 256)
    s, _ = relax_ground_state(2, 1.0, g)
    spec = PotentialSpec(0.6)
    p = nonescape_probability(density_of_state(s), g, spec.barrier_position, 2)
    assert 0.999 < p <= 1.0
    with pytest.raises(ConfigurationError):
        nonescape_probability(density_of_state(s), g, 30.0, 2)


def test_peak_detection():
    k = np.linspace(-4, 4, 801)
    rho = np.exp(-((k - 1.1) ** 2) / 0.01) + 0.5 * np.exp(-((k - 0.6) ** 2) / 0.01) + 3 * np.exp(-k**2 / 0.02)
    peaks = detect_peaks(rho, k, 0.25, 0.05)
    assert [round(p[0], 2) for p in peaks] == [1.1, 0.6]
    assert peaks[0][1] == pytest.approx(1.0, abs=1e-3)
    assert detect_peaks(np.exp(-k**2), k) == []
    assert detect_peaks(np.zeros_like(k), k) == []
    noisy = rho + 1e-4 * np.sin(40 * k)
    assert len(detect_peaks(noisy, k)) == 2

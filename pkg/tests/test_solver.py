import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq
from scipy.special import gamma

from opentunnel.errors import ConfigurationError, ConvergenceError, DomainError
from opentunnel.lattice import make_grid
from opentunnel.solver import (
    ContactInteraction,
    calibrate_gaussian_amplitude,
    energy,
    exact_pair_energy,
    gaussian_pair_energy,
    gp_ground_energy,
    relax_ground_state,
    relax_meanfield,
)


def busch_energy(lambda0):
    """Closed-form relative-motion root, independent of the finite-difference solver."""
    g = lambda0 / np.sqrt(2.0)
    f = lambda e: g + 2.0 * gamma(0.75 - e / 2) / gamma(0.25 - e / 2)
    return 0.5 + brentq(f, 0.5 + 1e-12, 1.5 - 1e-12, xtol=1e-14)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 30.0))
def test_pair_energy_matches_closed_form(lam):
    assert abs(exact_pair_energy(lam) - busch_energy(lam)) < 1e-8


def test_pair_energy_limits():
    assert abs(exact_pair_energy(0.0) - 1.0) < 1e-9
    vals = [exact_pair_energy(l) for l in (0.1, 1.0, 10.0, 100.0)]
    assert np.all(np.diff(vals) > 0) and vals[-1] < 2.0
    with pytest.raises(ValueError):
        exact_pair_energy(-1.0)


@pytest.mark.parametrize("lam,width", [(1.0, 0.3), (0.5, 0.2)])
def test_gaussian_calibration(lam, width):
    amp = calibrate_gaussian_amplitude(lam, width)
    # the grid delta's cusp costs it some effect, so the smooth profile needs less weight
    assert 0 < amp < lam
    assert abs(gaussian_pair_energy(amp, width) - exact_pair_energy(lam)) < 1e-8


@pytest.fixture(scope="module")
def trap():
    return make_grid(-8, 8, 128)


def test_single_particle_ground_state(trap):
    s, e = relax_ground_state(1, 0.0, trap)
    assert abs(e - 0.5) < 1e-10
    assert abs(s.norm() - 1) < 1e-12
    ref = np.pi**-0.25 * np.exp(-0.5 * trap.x**2)
    assert np.max(np.abs(np.abs(s.values) - ref)) < 1e-8


@pytest.mark.parametrize("width", [0.0, 0.3])
def test_two_boson_ground_state(width):
    g = make_grid(-8, 8, 256)
    s, e = relax_ground_state(2, 1.0, g, interaction_width=width)
    assert abs(e - exact_pair_energy(1.0)) < 1e-4
    assert s.symmetry_error() < 1e-12
    assert abs(s.norm() - 1) < 1e-10
    assert np.all(np.diff(s.energy_history) <= 1e-13)
    assert abs(energy(s) - e) < 1e-10


def test_noninteracting_pair(trap):
    _, e = relax_ground_state(2, 0.0, trap)
    assert abs(e - 1.0) < 1e-9


def test_exact_solver_limits(trap):
    with pytest.raises(DomainError):
        relax_ground_state(4, 1.0, trap)
    with pytest.raises(ConfigurationError):
        relax_ground_state(1, 0.0, make_grid(-3, 3, 64))
    with pytest.raises(ConfigurationError):
        relax_ground_state(2, -1.0, trap)
    with pytest.raises(ConvergenceError) as info:
        relax_ground_state(2, 1.0, trap, max_steps=3)
    assert np.isfinite(info.value.last_delta)


def test_contact_interaction():
    g = make_grid(-8, 8, 64)
    c = ContactInteraction(1.0, 0.0)
    assert c.bare_delta_strength(g.dx) == pytest.approx(1.0 / (1.0 + g.dx / np.pi**2))
    prof = ContactInteraction(1.0, 0.3).pair_profile(g)
    assert np.allclose(prof, prof.T)
    assert ContactInteraction(0.0, 0.3).is_zero
    with pytest.raises(ConfigurationError):
        ContactInteraction(-0.5, 0.0)


def test_meanfield_limits():
    g = make_grid(-12, 12, 256)
    assert abs(gp_ground_energy(5, 0.0, g) - 2.5) < 1e-8
    # the single-orbital energy is an upper bound close to the exact pair value at weak coupling
    e2 = gp_ground_energy(2, 0.1, g)
    assert exact_pair_energy(0.1) <= e2 < exact_pair_energy(0.1) + 2e-3
    # first-order perturbation theory at N = 101, lambda0 = 1e-3
    pert = 50.5 + 1e-3 * 101 * 100 / 2 / np.sqrt(2 * np.pi)
    e101 = gp_ground_energy(101, 1e-3, g)
    assert e101 < pert and abs(e101 - pert) / pert < 1e-3
    s, e = relax_meanfield(101, 1e-3, g)
    assert abs(energy(s) - e) < 1e-8 and abs(s.norm() - 1) < 1e-12
    with pytest.raises(DomainError):
        gp_ground_energy(1, 0.1, g)

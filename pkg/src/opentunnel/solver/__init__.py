from .dynamics import Absorber, Snapshot, Trajectory, propagate
from .ground import energy, gp_ground_energy, relax_ground_state, relax_meanfield
from .hamiltonian import ContactInteraction
from .pair import calibrate_gaussian_amplitude, exact_pair_energy, gaussian_pair_energy
from .state import EXACT, MEANFIELD, ManyBodyWavefunction

__all__ = [
    "Absorber",
    "Snapshot",
    "Trajectory",
    "propagate",
    "energy",
    "gp_ground_energy",
    "relax_ground_state",
    "relax_meanfield",
    "ContactInteraction",
    "calibrate_gaussian_amplitude",
    "exact_pair_energy",
    "gaussian_pair_energy",
    "EXACT",
    "MEANFIELD",
    "ManyBodyWavefunction",
]

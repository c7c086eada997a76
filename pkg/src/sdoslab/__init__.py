"""Surface density of states for lattice Schroedinger operators with almost-periodic potentials."""

__version__ = "0.1.0"

from .funcalc import TestFunction, broad_function, probe_function  # noqa: E402
from .hamiltonian import Hamiltonian, assemble  # noqa: E402
from .lattice import BoxSpec, LatticeSpec  # noqa: E402
from .potential import APPotential, demo_potential, zero_potential  # noqa: E402
from .sdos import UnsafeRegionError, bohr_mean, surface_dos, sweep  # noqa: E402

__all__ = [
    "APPotential", "BoxSpec", "Hamiltonian", "LatticeSpec", "TestFunction", "UnsafeRegionError",
    "assemble", "bohr_mean", "broad_function", "demo_potential", "probe_function", "surface_dos",
    "sweep", "zero_potential",
]

"""Harper-lattice simulation for a transmon array with modulated couplers."""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .circuit import RawCircuitParams, FluxBias, derive_params, solve_row_flux  # noqa: E402
from .lattice import LatticeSpec, build_real_space, build_quasimomentum, build_bloch  # noqa: E402
from .spectra import eig_hermitian, bands_open_column, butterfly  # noqa: E402
from .chirality import ground_state, bond_currents, count_vortices, vortex_map  # noqa: E402
from .topology import chern_numbers, berry_field  # noqa: E402

__all__ = [
    "BACKEND", "RawCircuitParams", "FluxBias", "derive_params", "solve_row_flux",
    "LatticeSpec", "build_real_space", "build_quasimomentum", "build_bloch",
    "eig_hermitian", "bands_open_column", "butterfly",
    "ground_state", "bond_currents", "count_vortices", "vortex_map",
    "chern_numbers", "berry_field",
]

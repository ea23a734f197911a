"""Random-batch simulation engine for second-order interacting particle systems."""

__version__ = "0.1.0"

from .core import (
    BoxGeometry,
    ParticleState,
    RngStream,
    SystemParams,
    NonFiniteStateError,
    SimulationError,
    SingularPairError,
    box_from_density,
    lattice_init,
    minimal_image,
    velocity_init,
)
from .batching import Partition, chi, lambda_i, random_partition, same_batch_indicator
from .kernels import KernelSpec, SplitKernel, bounded_kernel, lj_kernel, lj_split
from .neighbor import CellList, build_cell_list, pairs_within
from .forces import ForceField, force_batched, force_full, force_split

__all__ = [
    "BoxGeometry",
    "CellList",
    "ForceField",
    "KernelSpec",
    "NonFiniteStateError",
    "Partition",
    "ParticleState",
    "RngStream",
    "SimulationError",
    "SingularPairError",
    "SplitKernel",
    "SystemParams",
    "bounded_kernel",
    "box_from_density",
    "build_cell_list",
    "chi",
    "force_batched",
    "force_full",
    "force_split",
    "lambda_i",
    "lattice_init",
    "lj_kernel",
    "lj_split",
    "minimal_image",
    "pairs_within",
    "random_partition",
    "same_batch_indicator",
    "velocity_init",
]

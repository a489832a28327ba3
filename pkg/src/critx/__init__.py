"""critx: fidelity-susceptibility scaling lab for 1D lattice models."""

__version__ = "0.1.0"

from .basis import (
    BoundaryCondition,
    ProductBasis,
    SpinSectorBasis,
    apply_hop,
    enumerate_sector,
    rank,
    select_bc,
)
from .eigen import EigResult, deflated_solve, dense_spectrum, ground_state
from .errors import ConfigError, DegeneracyError, RefusalError, SolverError
from .fidelity import (
    FsPoint,
    fs_finite_difference,
    fs_h_driven,
    fs_linear_response,
    fs_spectral_sum,
    overlap,
)
from .models import (
    AhmSector,
    DrivingTag,
    ModelParams,
    TfimChain,
    apply_driving,
    apply_hamiltonian,
    build_structure,
)

"""Two-boson free-oscillation interferometer in a harmonic trap with a delta barrier."""

from .errors import (
    ConfigurationError,
    DimerError,
    NumericalError,
    PreparationError,
    SingularityError,
    SymmetryError,
    TimingDetectionError,
    UnconvergedBasisError,
)
from .grid import Grid, GridSpec, build_grid, delta_diagonal, g1d_from_3d, harmonic_diagonal, kinetic_matrix
from .hamiltonian import (
    Retention,
    SpectralDecomposition,
    SymmetricIndexMap,
    TwoBodyHamiltonian,
    build_interferometer_h,
    build_preparatory_h,
    diagonalize,
    pack_symmetric,
    unpack_symmetric,
)
from .dynamics import (
    ProjectedState,
    TimingInfo,
    TwoBodyState,
    detect_timing,
    evolve,
    prepare_initial_state,
    project,
    remove_barrier_evolve,
)
from .observables import (
    ObservableRecord,
    fringe_metrics,
    natural_orbitals,
    observe,
    qfi,
    quadrant_populations,
    rspdm,
    side_classifier,
    single_particle_density,
    transmission,
    von_neumann_entropy,
)
from .experiments import ScenarioConfig, run_fringes, run_sweep, run_trajectory

__version__ = "0.1.0"

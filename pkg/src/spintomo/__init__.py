"""spintomo: continuous weak-measurement tomography of a driven spin.

Simulates the measurement record of a single probed observable evolving
under a designed piecewise-constant drive, and reconstructs the initial
density matrix by constrained least squares, with fidelity, purity and
Wigner-function diagnostics.
"""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .control_design import (
    CompletenessReport,
    WaveformDesignResult,
    completeness_report,
    design_objective,
    optimize_waveform,
)
from .dynamics import (
    ControlWaveform,
    ObservableHistory,
    heisenberg_history,
    lindblad_superoperator,
    propagate_state,
    read_history,
    resolve_jump_ops,
    sample_times,
    step_hamiltonian,
    step_propagator,
    write_history,
)
from .estimator import (
    EstimateResult,
    FingerprintMismatchError,
    LeastSquaresFit,
    estimate,
    estimate_prefix_curve,
    estimate_with_nuisance,
    least_squares,
    project_to_physical,
    read_estimate,
    write_estimate,
)
from .measurement import (
    MeasurementRecord,
    RecordFormatError,
    noiseless_values,
    read_record,
    synthesize_record,
    write_record,
)
from .metrics import fidelity, max_eigenvalue, purity, trace_distance
from .spin_algebra import (
    HermitianBasis,
    SpinSystem,
    build_spin_system,
    check_density_matrix,
    clebsch_gordan,
    coords_to_state,
    hermitian_basis,
    measured_observable,
    state_to_coords,
    test_state,
)
from .wigner import (
    MultipoleOperators,
    WignerGrid,
    multipole_operators,
    wigner_function,
    wigner_integral,
    write_wigner_csv,
)

__version__ = "0.1.0"

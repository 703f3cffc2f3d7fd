"""Classical-shadow learnability diagnostics for monitored quantum circuits.

Simulates quantum trajectories of brickwork circuits with mid-circuit
measurements (dense, stabilizer and Pauli-transfer engines), builds the
dual record ensemble and its shadow channels, and computes the
diagnostics whose sharp changes locate measurement-induced phase
transitions: Pauli shadow norms, informational power, cross-entropy
fidelity measures, and charge-sharpening observables.
"""

__version__ = "0.1.0"

from .circuits import (
    CircuitRealization,
    MonitoredCircuitSpec,
    TrajectoryRecord,
    eavesdropper_snapshot,
    realize,
    run_trajectory,
)
from .dense import DenseState, TwoQubitGate, haar_2q_gate
from .ensemble import (
    EnsembleMoments,
    EntanglementFeature,
    entanglement_feature,
    feature_sweep,
    moments,
    purification_curve,
    sample_ensemble,
)
from .errors import (
    ConfigError,
    DegenerateWeingarten,
    ImpossibleRecord,
    LowESS,
    LowESSWarning,
    NoCrossing,
    NonInvertible,
    ResourceGuard,
    Unlearnable,
)
from .pauli import PauliString
from .shadows import (
    PrescrambledChannel,
    ShadowEigenvalues,
    Snapshot,
    estimate_pauli,
    estimator_variance,
    lambdas_from_feature,
    make_snapshot,
    shadow_norm_means,
    shadow_norm_mc,
)
from .stabilizer import CliffordTableau, StabilizerMixedState, random_clifford_tableau

"""Drive-crosstalk simulation, Hamiltonian learning and multi-qubit prediction for transmon chips."""

from .analytic import (
    MultiDriveSpec,
    PairwiseDriveSpec,
    eta_multi,
    eta_pair,
    eta_weak,
    pair_expectations,
    predict_z_multi,
)
from .core import (
    ChipGroundTruth,
    ChipTopology,
    CrosstalkMatrix,
    DriveChannel,
    PulseEnvelope,
    ReadoutErrorModel,
    TransmonParams,
    canonicalize_phase,
    load_chip,
    random_chip,
    save_chip,
    validate_chip,
)
from .experiment import PhaseSweepDataset, Protocol, run_multiplet_experiment, run_pair_experiment
from .learning import ChipFitReport, PairFitResult, characterize_chip, chi_squared_per_dof, fit_pair
from .oracle import DriveTermInstance, SimulationConfig, evolve_target, expectation_xyz, rabi_curve
from .prediction import MultipletPrediction, decompose_accumulation, predict_multiplet, score_prediction
from .report import build_graph, export_graph

__version__ = "0.1.0"

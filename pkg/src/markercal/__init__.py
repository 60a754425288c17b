"""markercal: serial-robot calibration from tool-marker positions.

Estimates geometric parameters, the robot base transform, tool marker
positions, and joint compliances of a serial manipulator from point
measurements of flange-mounted markers (e.g. laser-tracker reflectors),
without ever reconstructing full flange poses.  A conventional full-pose
estimator and a seeded Monte-Carlo experiment engine are included for
accuracy comparisons.

Hot kinematics kernels run from a compiled extension when available and
fall back to pure NumPy otherwise; see :func:`markercal.backend_name`.
"""

from .backend import COMPILED, backend_name
from .chain import (
    ChainOp,
    FkResult,
    JointLimitWarning,
    Linearization,
    ManipulatorState,
    SerialManipulator,
)
from .compliance import (
    ComplianceCoefficient,
    ComplianceError,
    ComplianceModel,
    elastic_regressor,
    generalized_torques,
    solve_deflections,
)
from .experiments import (
    ComparisonResult,
    ExperimentScenario,
    LoadCase,
    TrialStatistics,
    elastostatic_experiment,
    run_comparison,
    scenario_with,
    simulate_measurements,
)
from .identify import (
    BaseToolEstimate,
    IdentifiabilityError,
    IdentificationResult,
    IdentifyOptions,
    NumericalConditioningWarning,
    default_orientation_weight,
    estimate_base_tool,
    identify_fullpose,
    identify_iterative,
    solve_least_squares,
)
from .io import (
    ParseError,
    align_markers,
    load_measurements,
    load_model,
    load_scenario,
    parse_measurements,
    parse_model,
    save_measurements,
    save_model,
    serialize_measurements,
    serialize_model,
)
from .measurements import MeasurementSet, Observation, from_arrays
from .models import (
    BUILTIN_MODELS,
    STANDARD_GRAVITY,
    builtin_model,
    demo_manipulator,
    industrial_manipulator,
)
from .registration import (
    MarkerPose,
    RegistrationError,
    fit_rigid_points,
    pose_from_markers,
)
from .report import (
    comparison_csv,
    comparison_report,
    identify_csv,
    identify_report,
    statistics_report,
)
from .transforms import (
    RigidTransform,
    fixed_xyz_angles,
    fixed_xyz_matrix,
    matrix_to_rotation_vector,
    orthonormalize,
    rotation_vector_to_matrix,
    rotation_x,
    rotation_y,
    rotation_z,
    skew,
)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_MODELS",
    "BaseToolEstimate",
    "COMPILED",
    "ChainOp",
    "ComparisonResult",
    "ComplianceCoefficient",
    "ComplianceError",
    "ComplianceModel",
    "ExperimentScenario",
    "FkResult",
    "IdentifiabilityError",
    "IdentificationResult",
    "IdentifyOptions",
    "JointLimitWarning",
    "Linearization",
    "LoadCase",
    "ManipulatorState",
    "MarkerPose",
    "MeasurementSet",
    "NumericalConditioningWarning",
    "Observation",
    "ParseError",
    "RegistrationError",
    "RigidTransform",
    "STANDARD_GRAVITY",
    "SerialManipulator",
    "TrialStatistics",
    "align_markers",
    "backend_name",
    "builtin_model",
    "comparison_csv",
    "comparison_report",
    "default_orientation_weight",
    "demo_manipulator",
    "elastic_regressor",
    "elastostatic_experiment",
    "estimate_base_tool",
    "fit_rigid_points",
    "fixed_xyz_angles",
    "fixed_xyz_matrix",
    "from_arrays",
    "generalized_torques",
    "identify_csv",
    "identify_fullpose",
    "identify_iterative",
    "identify_report",
    "industrial_manipulator",
    "load_measurements",
    "load_model",
    "load_scenario",
    "matrix_to_rotation_vector",
    "orthonormalize",
    "parse_measurements",
    "parse_model",
    "pose_from_markers",
    "rotation_vector_to_matrix",
    "rotation_x",
    "rotation_y",
    "rotation_z",
    "run_comparison",
    "save_measurements",
    "save_model",
    "scenario_with",
    "serialize_measurements",
    "serialize_model",
    "simulate_measurements",
    "skew",
    "solve_deflections",
    "solve_least_squares",
    "statistics_report",
    "__version__",
]

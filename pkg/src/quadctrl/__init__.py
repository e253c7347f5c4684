"""quadctrl: the quadratic controllability alternative for scalar-input systems.

Classification (linear test / invariant manifold / quadratic drift of order k),
explicit invariant-manifold and drift data, coercivity-time estimation and
HUM steering synthesis, over exact rational polynomial vector fields.
"""

from .polyfield import (
    Polynomial,
    PolyVectorField,
    ad_power,
    lie_bracket,
    taylor_truncate,
    translate_to_origin,
)
from .lie_analysis import (
    Classification,
    ControlSystem,
    LieReport,
    QuadraticData,
    build_report,
    classify,
    compute_Lk,
    compute_s1,
    compute_s2,
    extract_quadratic_data,
    krener_checks,
    second_order_bracket,
)
from .brunovsky import FeedbackTransform, build_transform, prepare, transform_system, verify_feedback_invariance
from .manifold import QuadraticManifold, build_homogeneous, build_m2, invariance_experiment, verify_zeta_brackets
from .simulate import ControlSignal, Trajectory, bump_family, drift_check, integrate, norms, primitives
from .coercivity import CoercivityProblem, assemble_forms, build_problem, estimate_tstar, expm, lambda_min
from .linsynth import GramianData, gramian, hum_control, verify_steering
from .examples import example_doc, example_names, example_system, load_system, system_to_file

__version__ = "0.1.0"

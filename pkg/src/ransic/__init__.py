"""Robust rotation search and point cloud registration under heavy outliers.

Random samples are filtered through cheap invariant compatibility tests and
collected in a compatibility graph; a candidate model is solved only when a
sample agrees with enough previously accepted ones, which keeps the solve
count tiny even at 99% outliers. A classic RANSAC baseline, synthetic
problem generators, file I/O, and a benchmark CLI round out the toolkit.
"""

from .consensus import (
    RESIDUAL_GATE,
    CompatGraph,
    Vertex,
    extract_inliers,
    neighbors,
    termination_check,
)
from .exceptions import (
    ArityError,
    DegenerateInput,
    InvalidParam,
    ParseError,
    UnsupportedFormat,
    ZeroVector,
)
from .geometry import (
    geodesic_distance,
    quaternion_to_matrix,
    random_rotation,
    solve_rotation_svd,
    solve_sim_transform,
    weighted_scale,
)
from .io import (
    RESULT_COLUMNS,
    ResultRecord,
    read_correspondences,
    read_ply_ascii,
    read_results,
    write_correspondences,
    write_ply_ascii,
    write_results,
)
from .ransac import RansacRegistration, RansacRotationSearch
from .registration import (
    RansicRegistration,
    TriSample,
    build_tri_sample,
    scale_compat,
    six_point_edge,
    translation_compat,
)
from .rotation_search import RansicRotationSearch, length_compat, rotation_edge
from .synthetic import (
    RegistrationProblem,
    RotationProblem,
    fit_unit_box,
    gen_registration_problem,
    gen_rotation_problem,
)

__version__ = "0.1.0"

__all__ = [
    "ArityError",
    "CompatGraph",
    "DegenerateInput",
    "InvalidParam",
    "ParseError",
    "RESIDUAL_GATE",
    "RESULT_COLUMNS",
    "RansacRegistration",
    "RansacRotationSearch",
    "RansicRegistration",
    "RansicRotationSearch",
    "RegistrationProblem",
    "ResultRecord",
    "RotationProblem",
    "TriSample",
    "UnsupportedFormat",
    "Vertex",
    "ZeroVector",
    "build_tri_sample",
    "extract_inliers",
    "fit_unit_box",
    "gen_registration_problem",
    "gen_rotation_problem",
    "geodesic_distance",
    "length_compat",
    "neighbors",
    "quaternion_to_matrix",
    "random_rotation",
    "read_correspondences",
    "read_ply_ascii",
    "read_results",
    "rotation_edge",
    "scale_compat",
    "six_point_edge",
    "solve_rotation_svd",
    "solve_sim_transform",
    "termination_check",
    "translation_compat",
    "weighted_scale",
    "write_correspondences",
    "write_ply_ascii",
    "write_results",
]

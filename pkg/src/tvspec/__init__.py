"""Spectral total-variation processing for triangle meshes and point clouds."""

from .errors import (
    ChannelMismatchError,
    DegenerateFaceError,
    DigestError,
    FilterShapeMismatchError,
    InstabilityError,
    MapOutOfRangeError,
    NonManifoldError,
    ParseError,
    SingularMetricError,
    SolveFailureError,
    TooFewPointsError,
    TvspecError,
)
from .mesh import Signal, TriangleMesh, load_mesh, write_mesh
from .ops import (
    DiscreteOperators,
    build_face_operators,
    build_graph_operators,
    build_operators,
    build_vertex_operators,
    estimate_operator_norm,
)
from .pointcloud import PointCloudGraph, build_point_cloud_graph, estimate_normals
from .solver import (
    ProxProblem,
    SolverConfig,
    default_config,
    prox_data,
    prox_dual,
    solve_rof,
    tv_energy,
)
from .spectral import (
    ScheduleConfig,
    SpectralDecomposition,
    decompose_forward,
    decompose_inverse,
    estimate_alpha_max,
    load_decomposition,
    reconstruct,
    save_decomposition,
    spectrum,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelMismatchError", "DegenerateFaceError", "DigestError",
    "FilterShapeMismatchError", "InstabilityError", "MapOutOfRangeError",
    "NonManifoldError", "ParseError", "SingularMetricError",
    "SolveFailureError", "TooFewPointsError", "TvspecError",
    "Signal", "TriangleMesh", "load_mesh", "write_mesh",
    "DiscreteOperators", "build_face_operators", "build_graph_operators",
    "build_operators", "build_vertex_operators", "estimate_operator_norm",
    "PointCloudGraph", "build_point_cloud_graph", "estimate_normals",
    "ProxProblem", "SolverConfig", "default_config", "prox_data", "prox_dual",
    "solve_rof", "tv_energy",
    "ScheduleConfig", "SpectralDecomposition", "decompose_forward",
    "decompose_inverse", "estimate_alpha_max", "load_decomposition",
    "reconstruct", "save_decomposition", "spectrum",
]

"""shapeflow: diffeomorphic shape registration, conditional
stochastic-interpolant shape generation, hexahedral mesh transport, and
hemodynamic uncertainty statistics."""

__version__ = "0.1.0"

from .meshes import (
    CenterlineEncoding,
    HexHierarchy,
    HexMesh,
    MeshError,
    NodalField,
    SurfaceMesh,
)
from .geometry import (
    CrossSection,
    EmptySectionError,
    InvertedCellError,
    approx_aspect_ratio,
    cell_aspect_ratios,
    cross_section,
    detect_inverted_cells,
    interpolate_field,
    knn_graph,
    points_in_surface,
    trilinear_jacobian,
)
from .registration import (
    RegistrationConfig,
    RegistrationResult,
    TimeFlow,
    chamfer,
    check_invertibility,
    flow_backward,
    flow_forward,
    lddmm_energy,
    register,
    similarity_matrix,
    transport_field,
)
from .interpolant import (
    DriftNet,
    DriftNetConfig,
    SigmaSchedule,
    TrainingConfig,
    conditional_drift_target,
    convex_blend,
    finetune,
    perturb_condition,
    sample,
    sigma,
    train,
)
from .transport import (
    ElasticExtensionConfig,
    InvalidVolumeMeshError,
    SmoothingConfig,
    boundary_schedule,
    extend_displacement,
    propagate_hierarchy,
    repair_inversions,
    smooth_aspect_ratio,
    solve_elastic_step,
)
from .biomarkers import (
    BatchStats,
    TimeSeries,
    WindkesselParams,
    batch_shape_stats,
    monte_carlo_estimate,
    nfd,
    osi,
    pressure_qois,
    sfd,
    wall_shear_stress,
    wasserstein1,
    windkessel_step,
)

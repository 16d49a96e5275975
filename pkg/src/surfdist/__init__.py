"""Star-convex 3D instances as closed meshes of bicubic Bezier triangles.

The package covers the full desk-scale pipeline: sphere ray lattices and
control layouts, patch evaluation and subdivision, whole-instance surface
sampling and meshing, label-volume targets and voxelization, the per-voxel
training loss, sphere-reconstruction experiments, and matching metrics with
non-maximum suppression.  See the demos/ directory for narrative walkthroughs
and the `surfdist` CLI for file-based pipelines.
"""

from .bezier import (
    CONTROL_INDICES,
    CONTROL_NAMES,
    barycentric_grid,
    bernstein_weights,
    evaluate,
    sample_grid,
    subdivide,
)
from .fitting import (
    ConvergenceError,
    ReconstructionReport,
    fit_mask,
    reconstruct_sphere,
    reconstruct_sphere_stardist,
    reconstruct_sphere_surfdist,
    sphere_mask,
    sweep,
    sweep_csv,
)
from .instance import (
    InstanceShape,
    PolyhedralInstance,
    ShapeLayout,
    SurfaceSampleSet,
    assemble_patches,
    make_layout,
    parameter_count,
    polyhedron_samples,
    radial_directions,
    radial_surface_distance,
    radial_surface_distances,
    sample_weight_matrix,
    surface_samples,
    to_triangle_mesh,
)
from .lattice import (
    ControlLayout,
    MeshTopology,
    apply_anisotropy,
    build_topology,
    canonical_directions,
    control_layout,
    fibonacci_directions,
)
from .loss import (
    LossConfig,
    VoxelPrediction,
    distance_loss,
    distance_loss_gradient,
    object_loss,
    volume_loss,
    voxel_loss,
)
from .matching import (
    MatchReport,
    match_instances,
    metrics,
    metrics_over_thresholds,
    nms,
    pair_iou,
)
from .volume import (
    LabelVolume,
    ground_truth_distances,
    load_volume,
    object_probabilities,
    ray_cast_mask_distance,
    save_volume,
    voxelize,
    voxelize_polyhedron,
)

__version__ = "0.1.0"

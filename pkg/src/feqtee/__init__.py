"""feqtee: face-extrusion quad mesh decomposition, the TEE text language,
and guaranteed-manifold rebuilds."""

__version__ = "0.1.0"

from .mesh import (  # noqa: F401
    FaceLoop,
    FeqReport,
    Patch,
    PolyMesh,
    collapse_face_loop,
    enumerate_face_loops,
    extrude_patch,
    load_mesh,
    mesh_isomorphic,
    save_mesh,
    trace_face_loop,
    validate_feq,
)
from .param import (  # noqa: F401
    ParamPatch,
    center_split,
    flatten_interior,
    harmonic_disk_map,
    locate_point,
    smooth_interior,
)
from .disk import GenericDisk, build_generic_disk  # noqa: F401
from .records import ExtrusionRecord, RecordStore  # noqa: F401
from .builder import (  # noqa: F401
    LocalFrame,
    SelectionResult,
    apply_extrusion,
    dtw_distance,
    edge_weight,
    local_frame,
    select_patch_pure_quad,
    select_patch_quad_dominant,
)
from .decompose import (  # noqa: F401
    Decomposition,
    ExtrusionGraph,
    ExtrusionNode,
    RegionCurve,
    decompose_feature,
    emit_tee,
    find_leaf_loops,
    linearize,
    record_extrusion,
)
from .tee import (  # noqa: F401
    ExecuteOptions,
    TeeProgram,
    execute_tee,
    parse_tee,
    serialize_tee,
)
from .cluster import (  # noqa: F401
    ClusterLibrary,
    build_library,
    canonicalize,
    kmeans_cluster,
    substitute,
)
from .metrics import hausdorff_distance, relative_hausdorff  # noqa: F401

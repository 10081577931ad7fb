"""Finite level-set graphs of warped cones.

Builds nets on model manifolds carrying exact isometric actions, the
approximating graphs of their warped-cone level sets, and the numerical
certificates around them: spectral gaps, Cheeger bounds, coarse-embedding
obstructions, singular sets, and local ball-product structure.
"""

__version__ = "0.1.0"

from .algebra import (
    BUILTIN_GENERATORS,
    GeneratorSet,
    GroupBall,
    Rational5,
    RationalMatrix,
    group_ball,
    verify_special_orthogonal,
    word_eval,
)
from .manifolds import (
    ManifoldModel,
    VolumeBounds,
    apply_isometry,
    ball_volume_bounds,
    geo_dist,
    haar_sample,
    parse_model,
)
from .nets import Net, Partition, build_net, extend_net, interpolate_net, voronoi_partition
from .warped import (
    ActionSpec,
    WarpedLevel,
    neighborhood_cover,
    warped_dist_exact,
    warped_graph_metric,
)
from .graphs import ApproxGraph, approx_graph, export_graph, graph_report, import_graph
from .spectral import (
    CheegerReport,
    ControlFunction,
    ControlFunctions,
    GapReport,
    ObstructionCertificate,
    SpectrumReport,
    action_gap,
    cheeger_bounds,
    cheeger_exact,
    embedding_obstruction,
    laplacian_spectrum,
)
from .coarse import (
    BallCheckConfig,
    SingularSet,
    ball_product_check,
    cardinality_schedule,
    growth_fingerprint,
    product_ball_size,
    singular_set,
    subsequence_separation,
)

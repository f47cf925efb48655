"""Multiple-circle detection with a learning automaton over edge-point triplets."""

from .automaton import (
    ActionSet,
    BetaCache,
    LearningConfig,
    ProbabilityVector,
    build_action_set,
    lri_step,
    lri_update,
    reinforcement,
    run_learning,
    select_action,
)
from .bench import (
    BenchEntry,
    BenchReport,
    GroundTruthScene,
    MetricConfig,
    SceneSpec,
    add_salt_pepper,
    error_score,
    generate_scene,
    load_suite,
    match_circles,
    multiple_error,
    run_benchmark,
    success_rate,
)
from .detector import (
    DetectedCircle,
    DetectionResult,
    DetectorConfig,
    detect,
    extract_circles,
    render_overlay,
    save_overlay,
)
from .edges import (
    EdgeConfig,
    EdgeMap,
    GrayImage,
    SampledPoints,
    detect_edges,
    load_edge_map,
    load_gray_image,
    sample_edge_points,
    save_edge_map,
    save_gray_image,
)
from .errors import (
    CircleDetectionError,
    CollinearPoints,
    EmptyPerimeter,
    ImageFormatError,
    NoFeasibleActions,
    PlacementFailure,
    TooFewEdgePoints,
)
from .geometry import (
    CandidateCircle,
    PerimeterSet,
    circle_from_triplet,
    distinctiveness,
    distinctiveness_threshold,
    rasterize_circle,
)

__version__ = "0.1.0"

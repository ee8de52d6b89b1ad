"""Gravity-map matching: trellis matchers, INS simulation, evaluation harness."""

from .errors import (
    DegenerateGeometryError,
    DegenerateSigmaError,
    EmptyCandidatesError,
    GravmatchError,
    LengthMismatchError,
    MalformedFileError,
    NoContourError,
    OutOfBoundsError,
    TooLargeError,
)
from .harness import (
    RunReport,
    RunResult,
    compare_runs,
    emit_report,
    haversine_km,
    load_report,
    monte_carlo,
    run_once,
)
from .iccp import RigidTransform, extract_contour, fit_rigid, iccp_match
from .insmodel import (
    NavLog,
    SegmentBuffers,
    SensorConfig,
    TruthState,
    apply_correction,
    dead_reckon,
    measure_gravity,
    measure_velocity,
    simulate_truth,
)
from .mapgrid import (
    CellIndex,
    GravityMap,
    GridWindow,
    build_window,
    downsample,
    load_map,
    load_map_csv,
    lookup,
    nearest_cell,
    read_map,
    save_map,
    subcell_centers,
    synth_map,
)
from .matcher import (
    CandidateState,
    MatchConfig,
    PathEstimate,
    PrunedIndexSets,
    brute_force_map,
    greedy_chain,
    meas_loglik,
    prune,
    prune_all,
    rvbmp,
    rvbmp2,
    select_start,
    trans_loglik,
    vbmp,
    viterbi_exact,
)
from .scenario import Scenario, scenario_from_file, scenario_from_mapping

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

"""Dictionary-based sound zone control with audio-only listener tracking."""

from .filterdesign import (
    ControlFilterSet,
    ConvolutionMatrix,
    DesignParams,
    DesiredPressure,
    FilterDictionary,
    ZoneCovariance,
    build_conv_matrix,
    build_dictionaries,
    cross_vector,
    design_acc,
    design_mix,
    design_pm,
    desired_pressure,
    load_dictionary,
    save_dictionary,
    zone_covariance,
)
from .harness import (
    SCHEMES,
    DesignBundle,
    ExperimentConfig,
    ExperimentResult,
    SchemeResult,
    TrajectorySpec,
    build_design_bundle,
    emit_report,
    run_case_i,
    run_case_ii,
    run_scheme,
)
from .irdata import IrSet, Manifest, load_irset, save_irset, subset_positions
from .metrics import MetricsSeries, fd_ac, fd_nsdp, td_ac, td_nsdp
from .roomsim import (
    RoomSpec,
    SceneGeometry,
    build_scene_irset,
    load_scene,
    save_scene,
    simulate_ir,
)
from .runtime import FrameEngine, FrameOutputs, frame_input, num_frames
from .tracker import (
    TrackerDecision,
    default_silence_threshold,
    ncs,
    select_position,
    total_similarity,
    update_filters,
)

__version__ = "0.1.0"

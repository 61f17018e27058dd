"""Event-driven spiking-network region proposals for neuromorphic vision.

An address-event stream passes through a per-pixel refractory layer, a grid
of conductance-pooling window neurons, and a per-frame box clustering stage.
The package also ships a nearest-cluster tracker baseline, precision/recall
evaluation, an operation/memory cost model, a synthetic scene generator,
CSV/PPM file handling, and a command-line harness.
"""

from .errors import ConfigError, ParseError, StreamOrderError, TimeRegressionError
from .meanshift import MeanShiftTracker, MsCluster, MsConfig, MsCounters, run_meanshift
from .metrics import (
    GroundTruthBox,
    MatchCounts,
    PrCurvePoint,
    fitness,
    iou,
    match_frame,
    match_frames,
    pr_point,
    sweep_thresholds,
)
from .neuron import (
    ConductanceAccumulator,
    NeuronParams,
    NeuronState,
    add_conductance,
    advance_conductance,
    advance_membrane,
    apply_drive,
)
from .pipeline import (
    ConvGeometry,
    ConvLayer,
    DvsEvent,
    FrameProposals,
    PipelineConfig,
    ProposalBox,
    RefractoryLayer,
    RunCounters,
    SensorGeometry,
    cluster_frame,
    run_pipeline,
)
from .synth import (
    MovingObject,
    PRESET_NAMES,
    SceneSpec,
    SynthOutput,
    expected_event_count,
    gen_scene,
    preset,
)

__version__ = "0.1.0"

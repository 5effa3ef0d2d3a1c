"""doaloop: a closed-loop lab for DOA correction via speech-quality feedback.

A phase-masking beamformer steered by a correctable DOA estimate, a VAD-gated
exponentially smoothed quality stream scored against the scene's clean
reference, and an Adam-style corrector (bias correction off by default) that
steers the beam by maximizing that quality, all on deterministic simulated
time.
"""

from ._kernels import BACKEND as kernel_backend
from .arraysim import (
    ArrayGeometry,
    ScenePlan,
    SceneError,
    SourceSpec,
    default_triangular_geometry,
    fractional_delay,
    render_mixture,
    steering_delays,
    synth_speech_like,
)
from .beamform import (
    BeamformerConfig,
    beamform_frame,
    beamform_stream,
    expected_phase_diff,
    spatial_alias_freq,
    wrap_phase,
)
from .corrector import (
    CorrectorConfig,
    CorrectorState,
    corrector_init,
    corrector_step,
    run_correction_loop,
)
from .harness import (
    LoopConfig,
    PRESETS,
    RunRecord,
    TrajectoryStats,
    TrialError,
    aggregate,
    classify_good_run,
    default_two_source_scene,
    experiment_grid,
    run_trial,
    steered_quality_profile,
    three_source_scene,
)
from .quality import (
    QualityConfig,
    QualitySample,
    QualityStream,
    emulate_noise,
    gate,
    si_sdr,
    smooth,
    vad_activity,
)
from .spectral import TimeFrequencyGrid, istft, stft
from .wavio import WavError, load_wav, save_wav

__version__ = "0.1.0"

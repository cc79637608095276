"""Object-based audio toolkit.

Author, validate, package, and interactively render personalizable audio
scenes: presets with automatic selection, bounded gain/position
interactivity, stored-loudness compensation, ducking via dynamic gain
tracks, DRC, and spatial rendering to mono/stereo/5.1.
"""

from .authoring import (
    BedSpec,
    VoiceSpec,
    author_ad_scene,
    author_dialog_plus_scene,
    monitor_report,
    stamp_loudness,
)
from .container import (
    ContainerReader,
    pack,
    pack_array,
    read_scene_json,
    read_wav,
    unpack,
    write_scene_json,
    write_wav,
)
from .dynamics import (
    AutomationCurve,
    DrcProfile,
    DynamicGainTrack,
    apply_drc,
    builtin_drc_profiles,
    gain_at,
    import_automation,
    simplify_automation,
)
from .errors import ObaError
from .layouts import LAYOUTS, MONO, STEREO, SURROUND_5_1, SpeakerLayout, get_layout
from .loudness import (
    CompensatorState,
    LoudnessMeasurement,
    advance_compensator,
    compensation_gain,
    estimate_active_loudness,
    measure_integrated,
)
from .player import ControlCommand, PlayerEngine, PlayerState, handle_command
from .render import (
    ArraySource,
    PanningGains,
    RenderPipeline,
    RenderRequest,
    RenderStats,
    downmix_matrix,
    pan,
    render_offline,
)
from .scene import (
    AudioScene,
    ComponentGroup,
    InteractivityLimits,
    LabelSet,
    Position,
    Preset,
    PresetMember,
    UserState,
    clamp_gain,
    clamp_position,
    resolve_label,
    select_preset,
    validate_scene,
)

__version__ = "0.1.0"

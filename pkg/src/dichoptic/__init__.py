"""Toolkit for one-eye (dichoptic) highlighting: stereo scene rendering,
masked volume ray casting, visual-search experiment sessions, and analysis."""

from .geometry import (
    StereoRig,
    EyeView,
    angular_size,
    classify_monocular_zone,
    derive_eye_views,
    solve_layout_distance,
)
from .render import HighlightSpec, RenderedFrame, compose, render_eye, render_stereo_pair
from .scenes import (
    SceneObject,
    SetConfig,
    TrialScene,
    generate_set,
    load_set,
    occlusion_fraction,
    save_set,
    validate_scene,
)
from .session import (
    Event,
    QuestionnaireRecord,
    ResponseRecord,
    Session,
    SessionPlan,
    build_default_plan,
    export_session,
    load_session,
    run_scripted_session,
)
from .volume import (
    MaskVolume,
    RenderSettings,
    TransferFunction,
    VolumeGrid,
    brush_erase,
    load_raw_volume,
    make_phantom,
    mask_from_segment,
    raycast,
)
from .analysis import (
    PositionMatrix,
    SetSummary,
    TestResult,
    position_matrix,
    rm_anova_oneway,
    summarize,
    t_test_paired,
    t_test_welch,
    tlx_aggregate,
)

__version__ = "0.1.0"

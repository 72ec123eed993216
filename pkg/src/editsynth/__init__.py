"""editsynth: collage-based synthetic editing-data engine.

Builds instruction/source/target editing supervision by compositing matted
assets over backgrounds, with deterministic layout sampling, quality gates
(multi-scale SSIM plus a pluggable pass/fail judge), an attention-mixing
reference implementation, and a byte-reproducible dataset layout.
"""

from .assets import (
    AssetError,
    AssetIndex,
    AssetRecord,
    IngestError,
    ingest,
    sample_asset,
)
from .compositor import (
    AnnotationStyle,
    CompositorError,
    Placement,
    adjust_brightness,
    compose_collage,
    fit_cover,
    placement_box,
    placement_matte,
    quantize_u8,
    render_annotation,
    render_shape,
    render_text,
    resize_bilinear,
    scaled_size,
    shape_coverage,
    support_bbox,
    text_extent,
)
from .dataset import (
    DatasetError,
    Shard,
    ShardPlan,
    canonical_json,
    dataset_stats,
    finalize_dataset,
    generate_dataset,
    init_dataset,
    iter_records,
    load_manifest,
    load_run_config,
    open_sample,
    read_gates,
    shard_plans,
    verify_dataset,
    write_gates,
)
from .layout import (
    BASE_SIDE,
    BIN_COUNT,
    FRAME_COUNTS,
    VIDEO_RESOLUTIONS,
    AspectBin,
    LayoutConstraints,
    LayoutError,
    RngState,
    VideoShape,
    box_iou,
    make_bins,
    sample_placements,
    sample_video_shape,
)
from .mixing import (
    DEFAULT_MIX_LAYERS,
    InjectionConfig,
    MixingConfig,
    MixingError,
    ToyModel,
    TokenBlockInput,
    block_forward,
    caption_embedding,
    default_mixing_config,
    fuse_condition_channels,
    generate,
    mixed_attention,
    paired_generate,
    run_injected,
    run_property_suite,
    self_mixed_attention,
)
from .quality import (
    DEFAULT_SSIM_THRESHOLD,
    GateResult,
    HttpJudge,
    JudgeError,
    JudgeUnavailableError,
    JudgeVerdict,
    QualityError,
    RejectionRecord,
    SsimReport,
    StubJudge,
    aggregate_video_verdicts,
    filter_dataset,
    judge_pair,
    ms_ssim,
    ms_ssim_video,
    sample_frame_indices,
    to_luminance,
)
from .sampledata import StorePlan, build_store
from .synth import (
    EDIT_TYPES,
    IMAGE_EDIT_TYPES,
    SIZE_FACTORS,
    TEMPLATE_BANKS,
    VIDEO_EDIT_TYPES,
    EditSample,
    GenerationConfig,
    SynthError,
    build_instruction,
    edit_region,
    generate_annotation_edit,
    generate_background_edit,
    generate_color_edit,
    generate_entity_edit,
    generate_position_edit,
    generate_quantity_edit,
    generate_sample,
    generate_size_edit,
    generate_video_edit,
    regenerate,
)

__version__ = "0.1.0"

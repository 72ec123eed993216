"""Synthetic edit-pair construction: instruction templates and generators."""

from .instructions import (
    TEMPLATE_BANKS,
    InstructionTemplate,
    TemplateError,
    build_instruction,
    render_template,
    subject_phrase,
)
from .generators import (
    BRIGHTNESS_RANGE,
    COLOR_PALETTE,
    EDIT_TYPES,
    IMAGE_EDIT_TYPES,
    QUANTITY_SCALE_RANGE,
    SIZE_FACTORS,
    VIDEO_EDIT_TYPES,
    EditSample,
    GenerationConfig,
    SynthError,
    decode_canvas,
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
    pingpong_index,
    regenerate,
)

__all__ = [
    "TEMPLATE_BANKS",
    "InstructionTemplate",
    "TemplateError",
    "build_instruction",
    "render_template",
    "subject_phrase",
    "BRIGHTNESS_RANGE",
    "COLOR_PALETTE",
    "EDIT_TYPES",
    "IMAGE_EDIT_TYPES",
    "QUANTITY_SCALE_RANGE",
    "SIZE_FACTORS",
    "VIDEO_EDIT_TYPES",
    "EditSample",
    "GenerationConfig",
    "SynthError",
    "decode_canvas",
    "edit_region",
    "generate_annotation_edit",
    "generate_background_edit",
    "generate_color_edit",
    "generate_entity_edit",
    "generate_position_edit",
    "generate_quantity_edit",
    "generate_sample",
    "generate_size_edit",
    "generate_video_edit",
    "pingpong_index",
    "regenerate",
]

"""Edit-pair generators.

Each generator is a pure function of (store, canvas, RngState): it builds a
source/target media pair whose difference is exactly the instructed edit,
plus provenance rich enough to rebuild the sample bit-exactly and to locate
the edited region for verification.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..assets import AssetError, AssetIndex, AssetRecord, sample_asset
from ..compositor import (
    AnnotationStyle,
    Placement,
    adjust_brightness,
    compose_collage,
    fit_cover,
    matte_support,
    placement_box,
    placement_matte,
    render_annotation,
    render_shape,
    render_text,
    scaled_size,
    shape_coverage,
    text_extent,
    _text_mask,
)
from ..layout import (
    AspectBin,
    LayoutConstraints,
    LayoutError,
    RngState,
    VideoShape,
    as_generator,
    box_iou,
    make_bins,
    sample_placements,
    sample_video_shape,
)
from .instructions import build_instruction, subject_phrase

IMAGE_EDIT_TYPES = (
    "remove",
    "add",
    "replace",
    "quantity",
    "color",
    "size",
    "seg_detect",
    "background",
    "position",
    "text_remove",
    "text_add",
    "text_replace",
)
VIDEO_EDIT_TYPES = ("video_remove", "video_add", "video_replace")
EDIT_TYPES = IMAGE_EDIT_TYPES + VIDEO_EDIT_TYPES

ENTITY_OPS = ("remove", "add", "replace")

COLOR_PALETTE = (
    ("red", (255, 0, 0)),
    ("green", (0, 255, 0)),
    ("blue", (0, 0, 255)),
    ("yellow", (255, 220, 0)),
    ("orange", (255, 150, 0)),
    ("purple", (150, 0, 200)),
    ("cyan", (0, 200, 255)),
    ("pink", (255, 105, 180)),
    ("white", (255, 255, 255)),
    ("black", (0, 0, 0)),
)

# Flat scene tones for procedural shape edits; deliberately not palette colors.
BACKDROP_TONES = ((230, 230, 230), (42, 42, 42), (182, 202, 222), (214, 192, 168))

TEXT_ALPHABET = string.ascii_uppercase + string.ascii_lowercase + string.digits

SIZE_FACTORS = (0.8, 1.2)
QUANTITY_SCALE_RANGE = (0.15, 0.30)
BRIGHTNESS_RANGE = (0.8, 1.2)

_DIRECTIONS = ("left", "right", "up", "down")


class SynthError(RuntimeError):
    """Raised when a generator cannot satisfy its constraints."""


@dataclass
class EditSample:
    """One supervised editing example with exact provenance."""

    sample_id: str
    edit_type: str
    instruction: str
    source: "np.ndarray | list[np.ndarray]"
    target: "np.ndarray | list[np.ndarray]"
    seed: tuple[int, int]  # (seed, stream_id)
    bin_or_shape: "AspectBin | VideoShape | tuple[int, int]"
    provenance: dict

    def __post_init__(self):
        if self.edit_type not in EDIT_TYPES:
            raise SynthError(f"unknown edit type: {self.edit_type!r}")
        if not self.instruction:
            raise SynthError("empty instruction")
        if self.is_video:
            if len(self.source) != len(self.target):
                raise SynthError("source/target frame counts disagree")
            shapes = {f.shape for f in self.source} | {f.shape for f in self.target}
            if len(shapes) != 1:
                raise SynthError("video frames disagree on shape")
        elif self.source.shape != self.target.shape:
            raise SynthError("source/target dimensions disagree")

    @property
    def is_video(self) -> bool:
        return isinstance(self.source, (list, tuple))


@dataclass(frozen=True)
class GenerationConfig:
    """Batch-generation policy: one sample is a pure function of
    (config, store, seed, stream_id)."""

    seed: int = 0
    edit_types: tuple[str, ...] = IMAGE_EDIT_TYPES
    weights: tuple[float, ...] | None = None
    canvas: tuple[int, int] | None = None
    bin_index: int | None = None
    video_shape: tuple[int, int, int] | None = None  # (frames, width, height)
    height_width_order: bool = True
    shard_size: int = 1000
    quantity_scale_range: tuple[float, float] = QUANTITY_SCALE_RANGE
    size_factors: tuple[float, float] = SIZE_FACTORS

    def __post_init__(self):
        unknown = [t for t in self.edit_types if t not in EDIT_TYPES]
        if unknown:
            raise SynthError(f"unknown edit types: {unknown}")
        if not self.edit_types:
            raise SynthError("at least one edit type required")
        if self.weights is not None and len(self.weights) != len(self.edit_types):
            raise SynthError("weights length must match edit_types")
        if self.shard_size < 1:
            raise SynthError("shard size must be >= 1")

    def snapshot(self, store_digest: str) -> dict:
        """Canonical config record for drift detection and replay."""
        return {
            "seed": self.seed,
            "edit_types": list(self.edit_types),
            "weights": None if self.weights is None else list(self.weights),
            "canvas": None if self.canvas is None else list(self.canvas),
            "bin_index": self.bin_index,
            "video_shape": None if self.video_shape is None else list(self.video_shape),
            "height_width_order": self.height_width_order,
            "shard_size": self.shard_size,
            "quantity_scale_range": list(self.quantity_scale_range),
            "size_factors": list(self.size_factors),
            "store_digest": store_digest,
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "GenerationConfig":
        return cls(
            seed=snap["seed"],
            edit_types=tuple(snap["edit_types"]),
            weights=None if snap["weights"] is None else tuple(snap["weights"]),
            canvas=None if snap["canvas"] is None else tuple(snap["canvas"]),
            bin_index=snap["bin_index"],
            video_shape=None if snap["video_shape"] is None else tuple(snap["video_shape"]),
            height_width_order=snap["height_width_order"],
            shard_size=snap["shard_size"],
            quantity_scale_range=tuple(snap["quantity_scale_range"]),
            size_factors=tuple(snap["size_factors"]),
        )


def _resolve_rng(rng, seed_info) -> tuple[np.random.Generator, tuple[int, int]]:
    if isinstance(rng, RngState):
        return rng.generator(), (rng.seed, rng.stream_id)
    return as_generator(rng), tuple(seed_info or (0, 0))


def _canvas_wh(bin_or_size) -> tuple[int, int]:
    if isinstance(bin_or_size, AspectBin):
        return bin_or_size.width, bin_or_size.height
    w, h = int(bin_or_size[0]), int(bin_or_size[1])
    return w, h


def _encode_canvas(bin_or_size) -> dict:
    if isinstance(bin_or_size, AspectBin):
        return {"bin": bin_or_size.index, "width": bin_or_size.width, "height": bin_or_size.height}
    if isinstance(bin_or_size, VideoShape):
        return {
            "frame_count": bin_or_size.frame_count,
            "width": bin_or_size.width,
            "height": bin_or_size.height,
        }
    w, h = _canvas_wh(bin_or_size)
    return {"width": w, "height": h}


def decode_canvas(data: dict):
    if "frame_count" in data:
        return VideoShape(data["frame_count"], data["width"], data["height"])
    if data.get("bin") is not None:
        return make_bins()[data["bin"]]
    return (data["width"], data["height"])


def _sample_id(edit_type: str, seed: tuple[int, int]) -> str:
    return f"{edit_type}-{seed[0] % 2**64:016x}-{seed[1]:08d}"


def _subject_bindings(record: AssetRecord) -> dict:
    brief = subject_phrase(record.caption_brief)
    detailed = subject_phrase(record.caption_detailed) if record.caption_detailed else brief
    if brief not in detailed:
        detailed = brief
    return {"subject": brief, "subject_detailed": detailed}


def _encode_placements(placements: Sequence[Placement]) -> list:
    return [
        {"asset_id": p.asset_id, "center": list(p.center), "scale": p.scale, "z": p.z_order}
        for p in placements
    ]


def _fg_records(store: AssetIndex, gen, n: int) -> list[AssetRecord]:
    return [sample_asset(store, "fg_image", gen) for _ in range(n)]


def _pixmap(store: AssetIndex, records: Sequence[AssetRecord]) -> dict:
    return {r.asset_id: store.load_pixels(r.asset_id) for r in records}


def _fitted_background(store: AssetIndex, gen, width: int, height: int):
    record = sample_asset(store, "bg_image", gen)
    return record, fit_cover(store.load_pixels(record.asset_id), width, height)


def _distinct_record(store: AssetIndex, kind: str, gen, exclude_id: str, tries: int = 20):
    for _ in range(tries):
        candidate = sample_asset(store, kind, gen)
        if candidate.asset_id != exclude_id:
            return candidate
    raise AssetError(f"exhausted asset kind: {kind!r} (no distinct candidate)")


def _sizes(records: Sequence[AssetRecord]) -> list[tuple[str, int, int]]:
    return [(r.asset_id, r.width, r.height) for r in records]


def _provenance(edit_type, seed, canvas, **extra) -> dict:
    data = {
        "mode": "direct",
        "edit_type": edit_type,
        "seed": seed[0],
        "stream_id": seed[1],
        "canvas": _encode_canvas(canvas),
    }
    data.update(extra)
    return data


def generate_entity_edit(
    op_kind: str,
    entity_kind: str,
    store: AssetIndex,
    bin_or_size,
    rng,
    *,
    seed_info=None,
    constraints: LayoutConstraints | None = None,
) -> EditSample:
    """Remove / add / replace one entity (matted object or rendered text)."""
    if op_kind not in ENTITY_OPS:
        raise SynthError(f"unknown entity op: {op_kind!r}")
    if entity_kind == "text":
        return _generate_text_edit(op_kind, store, bin_or_size, rng, seed_info=seed_info)
    if entity_kind != "object":
        raise SynthError(f"unknown entity kind: {entity_kind!r}")

    gen, seed = _resolve_rng(rng, seed_info)
    width, height = _canvas_wh(bin_or_size)
    constraints = constraints or LayoutConstraints()

    n = int(gen.integers(1, 5))
    records = _fg_records(store, gen, n)
    bg_record, background = _fitted_background(store, gen, width, height)
    pixmap = _pixmap(store, records)

    if op_kind == "replace":
        for _ in range(30):
            placements = sample_placements(gen, width, height, _sizes(records), constraints)
            k = int(gen.integers(n))
            old = records[k]
            sw, sh = scaled_size(old.width, old.height, placements[k].scale)
            fitted = None
            for _ in range(10):
                candidate = _distinct_record(store, "fg_image", gen, old.asset_id)
                new_scale = (max(old.width, old.height) * placements[k].scale) / max(
                    candidate.width, candidate.height
                )
                nw, nh = scaled_size(candidate.width, candidate.height, new_scale)
                cx, cy = placements[k].center
                left, top = cx - nw // 2, cy - nh // 2
                if left >= 0 and top >= 0 and left + nw <= width and top + nh <= height:
                    fitted = (candidate, new_scale)
                    break
            if fitted is not None:
                break
        else:
            raise LayoutError("could not fit a replacement entity")
        candidate, new_scale = fitted
        pixmap[candidate.asset_id] = store.load_pixels(candidate.asset_id)
        new_placement = Placement(
            asset_id=candidate.asset_id,
            center=placements[k].center,
            scale=new_scale,
            z_order=placements[k].z_order,
        )
        target_placements = list(placements)
        target_placements[k] = new_placement
        source = compose_collage(background, placements, pixmap)
        target = compose_collage(background, target_placements, pixmap)
        bindings = _subject_bindings(records[k])
        bindings["new_subject"] = subject_phrase(candidate.caption_brief)
        instruction = build_instruction("replace", bindings, gen)
        prov = _provenance(
            "replace",
            seed,
            bin_or_size,
            op="entity",
            op_kind="replace",
            entity_kind="object",
            background=bg_record.asset_id,
            asset_ids=[r.asset_id for r in records],
            placements=_encode_placements(placements),
            edited_index=k,
            replacement={
                "asset_id": candidate.asset_id,
                "scale": new_scale,
                "center": list(placements[k].center),
            },
            subject=bindings["subject"],
        )
        return EditSample(
            _sample_id("replace", seed), "replace", instruction, source, target,
            seed, bin_or_size, prov,
        )

    placements = sample_placements(gen, width, height, _sizes(records), constraints)
    if op_kind == "remove":
        k = int(gen.integers(n))
        source_placements = placements
        target_placements = [p for i, p in enumerate(placements) if i != k]
    else:  # add: the top layer is the new entity
        k = n - 1
        source_placements = placements[:-1]
        target_placements = placements

    source = compose_collage(background, source_placements, pixmap)
    target = compose_collage(background, target_placements, pixmap)
    bindings = _subject_bindings(records[k])
    instruction = build_instruction(op_kind, bindings, gen)
    prov = _provenance(
        op_kind,
        seed,
        bin_or_size,
        op="entity",
        op_kind=op_kind,
        entity_kind="object",
        background=bg_record.asset_id,
        asset_ids=[r.asset_id for r in records],
        placements=_encode_placements(placements),
        edited_index=k,
        subject=bindings["subject"],
    )
    return EditSample(
        _sample_id(op_kind, seed), op_kind, instruction, source, target,
        seed, bin_or_size, prov,
    )


def _sample_text(gen, min_len: int = 3, max_len: int = 12) -> str:
    length = int(gen.integers(min_len, max_len + 1))
    return "".join(TEXT_ALPHABET[int(gen.integers(len(TEXT_ALPHABET)))] for _ in range(length))


def _fit_glyph_height(text: str, gen, width: int, height: int) -> int:
    glyph = max(10, int(min(width, height) * float(gen.uniform(0.08, 0.16))))
    budget = width - 8
    tw, _ = text_extent(text, glyph)
    if tw > budget:
        glyph = max(7, (glyph * budget) // tw)
        tw, _ = text_extent(text, glyph)
        while tw > budget and glyph > 7:
            glyph -= 1
            tw, _ = text_extent(text, glyph)
        if tw > budget:
            raise LayoutError(f"text {text!r} cannot fit a {width}px canvas")
    return glyph


def _place_text(gen, text: str, glyph: int, width: int, height: int, occupied: list) -> tuple[int, int]:
    tw, th = text_extent(text, glyph)
    for _ in range(60):
        left = int(gen.integers(4, width - tw - 3))
        top = int(gen.integers(4, height - th - 3))
        box = (left, top, tw, th)
        if all(box_iou(box, other) == 0.0 for other in occupied):
            occupied.append(box)
            return left + tw // 2, top + th // 2
    raise LayoutError("could not place text without overlap")


def _text_spec_matte(spec: dict, width: int, height: int) -> np.ndarray:
    mask = _text_mask(spec["text"], spec["glyph_height"])
    th, tw = mask.shape
    left = spec["center"][0] - tw // 2
    top = spec["center"][1] - th // 2
    matte = np.zeros((height, width), dtype=np.float64)
    matte[top:top + th, left:left + tw] = mask.astype(np.float64)
    return matte


def _render_texts(background: np.ndarray, specs: Sequence[dict]) -> np.ndarray:
    canvas = background
    for spec in specs:
        canvas, _ = render_text(
            canvas, spec["text"], spec["color"], tuple(spec["center"]), spec["glyph_height"]
        )
    return canvas


def _generate_text_edit(op_kind, store, bin_or_size, rng, *, seed_info=None) -> EditSample:
    gen, seed = _resolve_rng(rng, seed_info)
    width, height = _canvas_wh(bin_or_size)
    edit_type = f"text_{op_kind}"
    bg_record, background = _fitted_background(store, gen, width, height)

    if op_kind == "add":
        n_existing = int(gen.integers(0, 2))
        total = n_existing + 1
        edited = n_existing
    else:
        total = int(gen.integers(1, 3))
        edited = int(gen.integers(total))
        n_existing = total

    occupied: list = []
    specs: list[dict] = []
    for _ in range(total):
        text = _sample_text(gen)
        glyph = _fit_glyph_height(text, gen, width, height)
        color_name, color = COLOR_PALETTE[int(gen.integers(len(COLOR_PALETTE)))]
        center = _place_text(gen, text, glyph, width, height, occupied)
        specs.append(
            {
                "text": text,
                "glyph_height": glyph,
                "color": color,
                "color_name": color_name,
                "center": list(center),
            }
        )

    replacement = None
    if op_kind == "replace":
        old = specs[edited]
        glyph = old["glyph_height"]
        char_w, spacing = text_extent("A", glyph)[0], text_extent("AA", glyph)[0] - 2 * text_extent("A", glyph)[0]
        cx = old["center"][0]
        avail = 2 * min(cx - 4, width - 4 - cx)
        max_len = (avail + spacing) // (char_w + spacing)
        if max_len < 3:
            raise LayoutError("no room for replacement text")
        for _ in range(20):
            new_text = _sample_text(gen, 3, int(min(12, max_len)))
            if new_text != old["text"]:
                break
        else:
            raise LayoutError("could not draw a distinct replacement text")
        replacement = dict(old, text=new_text)

    if op_kind == "remove":
        source_specs = specs
        target_specs = [s for i, s in enumerate(specs) if i != edited]
        bindings = {"text": specs[edited]["text"]}
    elif op_kind == "add":
        source_specs = specs[:edited]
        target_specs = specs
        bindings = {"text": specs[edited]["text"]}
    else:
        source_specs = specs
        target_specs = list(specs)
        target_specs[edited] = replacement
        bindings = {"text": specs[edited]["text"], "new_text": replacement["text"]}

    source = _render_texts(background, source_specs)
    target = _render_texts(background, target_specs)
    instruction = build_instruction(edit_type, bindings, gen)
    prov = _provenance(
        edit_type,
        seed,
        bin_or_size,
        op="entity",
        op_kind=op_kind,
        entity_kind="text",
        background=bg_record.asset_id,
        texts=[{k: v for k, v in s.items() if k != "color"} | {"color": list(s["color"])} for s in specs],
        edited_index=edited,
        replacement=None if replacement is None else (
            {k: v for k, v in replacement.items() if k != "color"} | {"color": list(replacement["color"])}
        ),
        subject=specs[edited]["text"],
    )
    return EditSample(
        _sample_id(edit_type, seed), edit_type, instruction, source, target,
        seed, bin_or_size, prov,
    )


def generate_quantity_edit(
    store: AssetIndex,
    bin_or_size,
    rng,
    *,
    seed_info=None,
    scale_range: tuple[float, float] = QUANTITY_SCALE_RANGE,
) -> EditSample:
    """Change how many copies of one object appear; shared copies keep
    identical placements."""
    gen, seed = _resolve_rng(rng, seed_info)
    width, height = _canvas_wh(bin_or_size)
    constraints = LayoutConstraints(scale_range=scale_range)

    record = sample_asset(store, "fg_image", gen)
    bg_record, background = _fitted_background(store, gen, width, height)
    n = int(gen.integers(2, 7))
    options = [x for x in range(1, 7) if x != n]
    m = options[int(gen.integers(len(options)))]

    sizes = [(record.asset_id, record.width, record.height)] * n
    placements = sample_placements(gen, width, height, sizes, constraints)
    native = (record.width, record.height)

    if m < n:
        keep = sorted(int(i) for i in gen.choice(n, size=m, replace=False))
        target_placements = [placements[i] for i in keep]
        changed = [i for i in range(n) if i not in keep]
    else:
        boxes = [placement_box(p, native) for p in placements]
        extra = sample_placements(
            gen,
            width,
            height,
            [(record.asset_id, record.width, record.height)] * (m - n),
            constraints,
            existing=boxes,
            z_base=n,
        )
        target_placements = list(placements) + extra
        keep = list(range(n))
        changed = list(range(n, m))

    pixmap = _pixmap(store, [record])
    source = compose_collage(background, placements, pixmap)
    target = compose_collage(background, target_placements, pixmap)
    bindings = _subject_bindings(record)
    bindings["count"] = str(m)
    instruction = build_instruction("quantity", bindings, gen)
    prov = _provenance(
        "quantity",
        seed,
        bin_or_size,
        op="quantity",
        background=bg_record.asset_id,
        asset_ids=[record.asset_id],
        placements=_encode_placements(placements),
        target_placements=_encode_placements(target_placements),
        source_count=n,
        target_count=m,
        kept_indices=keep,
        subject=bindings["subject"],
    )
    return EditSample(
        _sample_id("quantity", seed), "quantity", instruction, source, target,
        seed, bin_or_size, prov,
    )


def _render_scene(tone, shapes, width, height) -> np.ndarray:
    canvas = np.full((height, width, 3), tone, dtype=np.uint8)
    for spec in shapes:
        canvas = render_shape(
            canvas, spec["shape"], tuple(spec["color"]), tuple(spec["center"]), spec["size"]
        )
    return canvas


def generate_color_edit(bin_or_size, rng, *, seed_info=None) -> EditSample:
    """Recolor one procedural shape in a flat-backdrop scene."""
    gen, seed = _resolve_rng(rng, seed_info)
    width, height = _canvas_wh(bin_or_size)
    min_dim = min(width, height)

    n = int(gen.integers(2, 5))
    color_indices = [int(i) for i in gen.choice(len(COLOR_PALETTE), size=n, replace=False)]
    tone = BACKDROP_TONES[int(gen.integers(len(BACKDROP_TONES)))]

    from ..compositor import SHAPE_KINDS

    shapes: list[dict] = []
    occupied: list = []
    for idx in color_indices:
        kind = SHAPE_KINDS[int(gen.integers(len(SHAPE_KINDS)))]
        placed = False
        for _ in range(80):
            size = float(gen.uniform(0.15, 0.30)) * min_dim
            half = int(np.ceil(size / 2.0)) + 1
            if width - half <= half or height - half <= half:
                continue
            cx = int(gen.integers(half, width - half))
            cy = int(gen.integers(half, height - half))
            box = (cx - half, cy - half, 2 * half, 2 * half)
            if any(box_iou(box, other) > 0.0 for other in occupied):
                continue
            occupied.append(box)
            name, rgb = COLOR_PALETTE[idx]
            shapes.append(
                {"shape": kind, "color": list(rgb), "color_name": name,
                 "center": [cx, cy], "size": size}
            )
            placed = True
            break
        if not placed:
            raise LayoutError("could not lay out procedural shapes")

    k = int(gen.integers(n))
    others = [i for i in range(len(COLOR_PALETTE)) if i != color_indices[k]]
    new_idx = others[int(gen.integers(len(others)))]
    new_name, new_rgb = COLOR_PALETTE[new_idx]

    target_shapes = [dict(s) for s in shapes]
    target_shapes[k]["color"] = list(new_rgb)
    target_shapes[k]["color_name"] = new_name

    source = _render_scene(tone, shapes, width, height)
    target = _render_scene(tone, target_shapes, width, height)
    bindings = {
        "color_a": shapes[k]["color_name"],
        "color_b": new_name,
        "shape": shapes[k]["shape"],
    }
    instruction = build_instruction("color", bindings, gen)
    prov = _provenance(
        "color",
        seed,
        bin_or_size,
        op="color",
        tone=list(tone),
        shapes=shapes,
        edited_index=k,
        new_color=new_name,
        subject=f"{bindings['color_a']} {bindings['shape']}",
    )
    return EditSample(
        _sample_id("color", seed), "color", instruction, source, target,
        seed, bin_or_size, prov,
    )


def generate_size_edit(
    store: AssetIndex,
    bin_or_size,
    rng,
    *,
    seed_info=None,
    size_factors: tuple[float, float] = SIZE_FACTORS,
) -> EditSample:
    """Rescale one object about its center by a factor from size_factors."""
    gen, seed = _resolve_rng(rng, seed_info)
    width, height = _canvas_wh(bin_or_size)
    constraints = LayoutConstraints()

    n = int(gen.integers(2, 5))
    records = _fg_records(store, gen, n)
    bg_record, background = _fitted_background(store, gen, width, height)

    for _ in range(30):
        placements = sample_placements(gen, width, height, _sizes(records), constraints)
        k = int(gen.integers(n))
        factor = float(size_factors[int(gen.integers(len(size_factors)))])
        rec = records[k]
        new_scale = placements[k].scale * factor
        sw, sh = scaled_size(rec.width, rec.height, new_scale)
        cx, cy = placements[k].center
        left, top = cx - sw // 2, cy - sh // 2
        if left >= 0 and top >= 0 and left + sw <= width and top + sh <= height:
            break
    else:
        raise LayoutError("could not fit the rescaled object")

    target_placements = list(placements)
    target_placements[k] = Placement(
        asset_id=placements[k].asset_id,
        center=placements[k].center,
        scale=new_scale,
        z_order=placements[k].z_order,
    )
    pixmap = _pixmap(store, records)
    source = compose_collage(background, placements, pixmap)
    target = compose_collage(background, target_placements, pixmap)
    bindings = _subject_bindings(records[k])
    bindings["direction"] = "bigger" if factor > 1.0 else "smaller"
    instruction = build_instruction("size", bindings, gen)
    prov = _provenance(
        "size",
        seed,
        bin_or_size,
        op="size",
        background=bg_record.asset_id,
        asset_ids=[r.asset_id for r in records],
        placements=_encode_placements(placements),
        edited_index=k,
        factor=factor,
        subject=bindings["subject"],
    )
    return EditSample(
        _sample_id("size", seed), "size", instruction, source, target,
        seed, bin_or_size, prov,
    )


def _visible_supports(placements, pixmap, width, height):
    mattes = [
        placement_matte(pixmap[p.asset_id], p, width, height) for p in placements
    ]
    supports = [matte_support(m) for m in mattes]
    visible = []
    for i in range(len(placements)):
        occluded = np.zeros((height, width), dtype=bool)
        for j in range(i + 1, len(placements)):
            occluded |= supports[j]
        visible.append(supports[i] & ~occluded)
    return mattes, visible


def generate_annotation_edit(
    store: AssetIndex,
    bin_or_size,
    rng,
    *,
    seed_info=None,
    style: AnnotationStyle | None = None,
) -> EditSample:
    """Segmentation / detection supervision: target paints the chosen
    object's visible pixels (mask) or its tight box (outline)."""
    gen, seed = _resolve_rng(rng, seed_info)
    width, height = _canvas_wh(bin_or_size)
    constraints = LayoutConstraints()

    style_given = style is not None
    for _ in range(20):
        n = int(gen.integers(1, 5))
        records = _fg_records(store, gen, n)
        bg_record, background = _fitted_background(store, gen, width, height)
        pixmap = _pixmap(store, records)
        placements = sample_placements(gen, width, height, _sizes(records), constraints)
        mattes, visible = _visible_supports(placements, pixmap, width, height)
        eligible = [i for i, vis in enumerate(visible) if vis.any()]
        if eligible:
            break
    else:
        raise LayoutError("no visible object to annotate")

    k = eligible[int(gen.integers(len(eligible)))]
    if style is None:
        mode = ("mask_fill", "bbox_outline")[int(gen.integers(2))]
        color_name, rgb = COLOR_PALETTE[int(gen.integers(len(COLOR_PALETTE)))]
        style = AnnotationStyle(mode=mode, color=rgb, outline_thickness=3)
    else:
        color_name = next(
            (name for name, rgb in COLOR_PALETTE if tuple(style.color) == rgb),
            f"rgb{tuple(style.color)}",
        )

    visible_alpha = np.where(visible[k], mattes[k], 0.0)
    source = compose_collage(background, placements, pixmap)
    target = render_annotation(source, visible_alpha, style)
    bindings = _subject_bindings(records[k])
    bindings["color"] = color_name
    bank = "seg_detect_mask" if style.mode == "mask_fill" else "seg_detect_bbox"
    instruction = build_instruction(bank, bindings, gen)
    prov = _provenance(
        "seg_detect",
        seed,
        bin_or_size,
        op="annotation",
        background=bg_record.asset_id,
        asset_ids=[r.asset_id for r in records],
        placements=_encode_placements(placements),
        edited_index=k,
        style={
            "mode": style.mode,
            "color": list(style.color),
            "outline_thickness": style.outline_thickness,
        },
        style_overridden=style_given,
        subject=bindings["subject"],
    )
    return EditSample(
        _sample_id("seg_detect", seed), "seg_detect", instruction, source, target,
        seed, bin_or_size, prov,
    )


def generate_background_edit(
    store: AssetIndex,
    bin_or_size,
    rng,
    *,
    seed_info=None,
    brightness_factor: float | None = None,
) -> EditSample:
    """Background swap: the source shows brightness-perturbed foregrounds on
    a distractor background; the target is the original scene."""
    gen, seed = _resolve_rng(rng, seed_info)
    width, height = _canvas_wh(bin_or_size)
    constraints = LayoutConstraints()

    n = int(gen.integers(1, 5))
    records = _fg_records(store, gen, n)
    original = sample_asset(store, "bg_image", gen)
    if len(store.ids("bg_image")) > 1:
        distractor = _distinct_record(store, "bg_image", gen, original.asset_id)
    else:
        distractor = original
    factor_given = brightness_factor is not None
    factor = (
        float(brightness_factor)
        if factor_given
        else float(gen.uniform(*BRIGHTNESS_RANGE))
    )

    placements = sample_placements(gen, width, height, _sizes(records), constraints)
    pixmap = _pixmap(store, records)
    perturbed = {
        aid: np.dstack([adjust_brightness(rgba[..., :3], factor), rgba[..., 3]])
        for aid, rgba in pixmap.items()
    }
    target = compose_collage(
        fit_cover(store.load_pixels(original.asset_id), width, height), placements, pixmap
    )
    source = compose_collage(
        fit_cover(store.load_pixels(distractor.asset_id), width, height), placements, perturbed
    )
    bg_subject = subject_phrase(original.caption_brief)
    instruction = build_instruction("background", {"bg_subject": bg_subject}, gen)
    prov = _provenance(
        "background",
        seed,
        bin_or_size,
        op="background",
        original_background=original.asset_id,
        distractor_background=distractor.asset_id,
        asset_ids=[r.asset_id for r in records],
        placements=_encode_placements(placements),
        brightness=factor,
        brightness_overridden=factor_given,
        subject=bg_subject,
    )
    return EditSample(
        _sample_id("background", seed), "background", instruction, source, target,
        seed, bin_or_size, prov,
    )


def generate_position_edit(store: AssetIndex, bin_or_size, rng, *, seed_info=None) -> EditSample:
    """Move one object by a sampled offset, clamped to containment."""
    gen, seed = _resolve_rng(rng, seed_info)
    width, height = _canvas_wh(bin_or_size)
    constraints = LayoutConstraints()
    min_dim = min(width, height)

    n = int(gen.integers(1, 4))
    records = _fg_records(store, gen, n)
    bg_record, background = _fitted_background(store, gen, width, height)

    for _ in range(40):
        placements = sample_placements(gen, width, height, _sizes(records), constraints)
        k = int(gen.integers(n))
        rec = records[k]
        direction = _DIRECTIONS[int(gen.integers(len(_DIRECTIONS)))]
        magnitude = int(round(float(gen.uniform(0.12, 0.30)) * min_dim))
        dx = {"left": -magnitude, "right": magnitude}.get(direction, 0)
        dy = {"up": -magnitude, "down": magnitude}.get(direction, 0)
        sw, sh = scaled_size(rec.width, rec.height, placements[k].scale)
        cx = min(max(placements[k].center[0] + dx, sw // 2), width - sw + sw // 2)
        cy = min(max(placements[k].center[1] + dy, sh // 2), height - sh + sh // 2)
        moved = abs(cx - placements[k].center[0]) + abs(cy - placements[k].center[1])
        if moved < max(8, magnitude // 3):
            continue
        new_box = (cx - sw // 2, cy - sh // 2, sw, sh)
        other_boxes = [
            placement_box(p, (records[i].width, records[i].height))
            for i, p in enumerate(placements)
            if i != k
        ]
        if any(box_iou(new_box, ob) > constraints.max_overlap for ob in other_boxes):
            continue
        break
    else:
        raise LayoutError("could not move an object within containment")

    target_placements = list(placements)
    target_placements[k] = Placement(
        asset_id=placements[k].asset_id,
        center=(cx, cy),
        scale=placements[k].scale,
        z_order=placements[k].z_order,
    )
    pixmap = _pixmap(store, records)
    source = compose_collage(background, placements, pixmap)
    target = compose_collage(background, target_placements, pixmap)
    bindings = _subject_bindings(records[k])
    bindings["direction"] = direction
    instruction = build_instruction("position", bindings, gen)
    prov = _provenance(
        "position",
        seed,
        bin_or_size,
        op="position",
        background=bg_record.asset_id,
        asset_ids=[r.asset_id for r in records],
        placements=_encode_placements(placements),
        edited_index=k,
        new_center=[cx, cy],
        direction=direction,
        subject=bindings["subject"],
    )
    return EditSample(
        _sample_id("position", seed), "position", instruction, source, target,
        seed, bin_or_size, prov,
    )


def pingpong_index(t: int, n: int) -> int:
    """Reflective looping for short foreground clips."""
    if n <= 1:
        return 0
    period = 2 * n - 2
    idx = t % period
    return idx if idx < n else period - idx


def generate_video_edit(
    op_kind: str,
    store: AssetIndex,
    shape: VideoShape,
    rng,
    *,
    seed_info=None,
) -> EditSample:
    """Remove / add / replace one matted clip over a background clip window.

    The placement is static across frames; short foreground clips loop
    ping-pong.
    """
    if op_kind not in ENTITY_OPS:
        raise SynthError(f"unknown video op: {op_kind!r}")
    gen, seed = _resolve_rng(rng, seed_info)
    edit_type = f"video_{op_kind}"
    frames_needed = shape.frame_count
    width, height = shape.width, shape.height

    bg_ids = store.ids("bg_clip")
    if not bg_ids:
        raise AssetError("exhausted asset kind: 'bg_clip'")
    eligible = [i for i in bg_ids if store.record(i).frame_count >= frames_needed]
    if not eligible:
        raise AssetError(f"clip too short: no background clip has {frames_needed} frames")
    bg_record = store.record(eligible[int(gen.integers(len(eligible)))])
    bg_frames = store.load_frames(bg_record.asset_id)
    start = int(gen.integers(0, bg_record.frame_count - frames_needed + 1))
    window = [
        fit_cover(bg_frames[start + t], width, height) for t in range(frames_needed)
    ]

    fg_record = sample_asset(store, "fg_clip", gen)
    fg_frames = store.load_frames(fg_record.asset_id)
    placement = sample_placements(
        gen, width, height, [(fg_record.asset_id, fg_record.width, fg_record.height)]
    )[0]

    def composite(record, frames, pl) -> list[np.ndarray]:
        return [
            compose_collage(
                window[t], [pl], {record.asset_id: frames[pingpong_index(t, len(frames))]}
            )
            for t in range(frames_needed)
        ]

    replacement = None
    if op_kind == "replace":
        fitted = None
        for _ in range(20):
            candidate = _distinct_record(store, "fg_clip", gen, fg_record.asset_id)
            new_scale = (max(fg_record.width, fg_record.height) * placement.scale) / max(
                candidate.width, candidate.height
            )
            nw, nh = scaled_size(candidate.width, candidate.height, new_scale)
            cx, cy = placement.center
            left, top = cx - nw // 2, cy - nh // 2
            if left >= 0 and top >= 0 and left + nw <= width and top + nh <= height:
                fitted = (candidate, new_scale)
                break
        if fitted is None:
            raise LayoutError("could not fit a replacement clip")
        candidate, new_scale = fitted
        new_placement = Placement(
            asset_id=candidate.asset_id,
            center=placement.center,
            scale=new_scale,
            z_order=placement.z_order,
        )
        source = composite(fg_record, fg_frames, placement)
        target = composite(candidate, store.load_frames(candidate.asset_id), new_placement)
        replacement = {"asset_id": candidate.asset_id, "scale": new_scale}
        bindings = _subject_bindings(fg_record)
        bindings["new_subject"] = subject_phrase(candidate.caption_brief)
    elif op_kind == "remove":
        source = composite(fg_record, fg_frames, placement)
        target = list(window)
        bindings = _subject_bindings(fg_record)
    else:
        source = list(window)
        target = composite(fg_record, fg_frames, placement)
        bindings = _subject_bindings(fg_record)

    instruction = build_instruction(edit_type, bindings, gen)
    prov = _provenance(
        edit_type,
        seed,
        shape,
        op="video",
        op_kind=op_kind,
        background=bg_record.asset_id,
        window_start=start,
        asset_ids=[fg_record.asset_id],
        placements=_encode_placements([placement]),
        replacement=replacement,
        subject=bindings["subject"],
    )
    return EditSample(
        _sample_id(edit_type, seed), edit_type, instruction, source, target,
        seed, shape, prov,
    )


def generate_sample(store: AssetIndex, rng: RngState, config: GenerationConfig) -> EditSample:
    """Batch entry point: draw the edit type and canvas, then dispatch.

    The sample is a pure function of (config, store, rng), which is what
    makes worker sharding and resume byte-stable.
    """
    gen = rng.generator()
    seed_info = (rng.seed, rng.stream_id)
    types = config.edit_types
    if config.weights is not None:
        idx = int(gen.choice(len(types), p=np.asarray(config.weights) / sum(config.weights)))
    else:
        idx = int(gen.integers(len(types)))
    edit_type = types[idx]

    if edit_type in VIDEO_EDIT_TYPES:
        if config.video_shape is not None:
            frames, width, height = config.video_shape
            shape = VideoShape(frame_count=frames, width=width, height=height)
        else:
            shape = sample_video_shape(gen, height_width_order=config.height_width_order)
        sample = generate_video_edit(
            edit_type.removeprefix("video_"), store, shape, gen, seed_info=seed_info
        )
    else:
        if config.canvas is not None:
            canvas = tuple(config.canvas)
        elif config.bin_index is not None:
            canvas = make_bins()[config.bin_index]
        else:
            canvas = make_bins()[int(gen.integers(len(make_bins())))]
        sample = _dispatch_image(edit_type, store, canvas, gen, seed_info, config)
    sample.provenance["mode"] = "batch"
    return sample


def _dispatch_image(edit_type, store, canvas, gen, seed_info, config: GenerationConfig):
    if edit_type in ENTITY_OPS:
        return generate_entity_edit(edit_type, "object", store, canvas, gen, seed_info=seed_info)
    if edit_type.startswith("text_"):
        return generate_entity_edit(
            edit_type.removeprefix("text_"), "text", store, canvas, gen, seed_info=seed_info
        )
    if edit_type == "quantity":
        return generate_quantity_edit(
            store, canvas, gen, seed_info=seed_info, scale_range=config.quantity_scale_range
        )
    if edit_type == "color":
        return generate_color_edit(canvas, gen, seed_info=seed_info)
    if edit_type == "size":
        return generate_size_edit(
            store, canvas, gen, seed_info=seed_info, size_factors=config.size_factors
        )
    if edit_type == "seg_detect":
        return generate_annotation_edit(store, canvas, gen, seed_info=seed_info)
    if edit_type == "background":
        return generate_background_edit(store, canvas, gen, seed_info=seed_info)
    if edit_type == "position":
        return generate_position_edit(store, canvas, gen, seed_info=seed_info)
    raise SynthError(f"unknown edit type: {edit_type!r}")


def regenerate(provenance: dict, store: AssetIndex, config: GenerationConfig | None = None) -> EditSample:
    """Rebuild a sample from recorded provenance; bit-exact by construction."""
    rng = RngState(provenance["seed"], provenance["stream_id"])
    edit_type = provenance["edit_type"]
    if provenance.get("mode") == "batch":
        if config is None:
            raise SynthError("batch provenance replay needs the generation config")
        sample = generate_sample(store, rng, config)
        if sample.edit_type != edit_type:
            raise SynthError(
                f"replay drew edit type {sample.edit_type!r}, expected {edit_type!r}"
            )
        return sample

    canvas = decode_canvas(provenance["canvas"])
    if edit_type in VIDEO_EDIT_TYPES:
        return generate_video_edit(provenance["op_kind"], store, canvas, rng)
    if edit_type in ENTITY_OPS or edit_type.startswith("text_"):
        return generate_entity_edit(
            provenance["op_kind"], provenance["entity_kind"], store, canvas, rng
        )
    if edit_type == "quantity":
        return generate_quantity_edit(store, canvas, rng)
    if edit_type == "color":
        return generate_color_edit(canvas, rng)
    if edit_type == "size":
        return generate_size_edit(store, canvas, rng)
    if edit_type == "seg_detect":
        style = None
        if provenance.get("style_overridden"):
            s = provenance["style"]
            style = AnnotationStyle(s["mode"], tuple(s["color"]), s["outline_thickness"])
        return generate_annotation_edit(store, canvas, rng, style=style)
    if edit_type == "background":
        factor = provenance["brightness"] if provenance.get("brightness_overridden") else None
        return generate_background_edit(store, canvas, rng, brightness_factor=factor)
    if edit_type == "position":
        return generate_position_edit(store, canvas, rng)
    raise SynthError(f"unknown edit type in provenance: {edit_type!r}")


def edit_region(sample: EditSample, store: AssetIndex):
    """Boolean mask (or per-frame masks) of pixels the edit may touch.

    Rebuilt from provenance; everything outside this region must be
    bit-identical between source and target.
    """
    prov = sample.provenance
    edit_type = sample.edit_type
    if isinstance(sample.bin_or_shape, VideoShape):
        width, height = sample.bin_or_shape.width, sample.bin_or_shape.height
    else:
        width, height = _canvas_wh(sample.bin_or_shape)

    def matte_of(entry, scale=None, center=None) -> np.ndarray:
        pl = Placement(
            asset_id=entry["asset_id"],
            center=tuple(center or entry["center"]),
            scale=scale if scale is not None else entry["scale"],
            z_order=entry.get("z", 0),
        )
        return placement_matte(store.load_pixels(pl.asset_id), pl, width, height) > 0.0

    if edit_type in ("remove", "add"):
        return matte_of(prov["placements"][prov["edited_index"]])
    if edit_type == "replace":
        old = matte_of(prov["placements"][prov["edited_index"]])
        rep = prov["replacement"]
        entry = dict(prov["placements"][prov["edited_index"]])
        entry["asset_id"] = rep["asset_id"]
        new = matte_of(entry, scale=rep["scale"], center=rep["center"])
        return old | new
    if edit_type == "quantity":
        region = np.zeros((height, width), dtype=bool)
        if prov["target_count"] < prov["source_count"]:
            kept = set(prov["kept_indices"])
            for i, entry in enumerate(prov["placements"]):
                if i not in kept:
                    region |= matte_of(entry)
        else:
            for entry in prov["target_placements"][prov["source_count"]:]:
                region |= matte_of(entry)
        return region
    if edit_type == "size":
        entry = prov["placements"][prov["edited_index"]]
        old = matte_of(entry)
        new = matte_of(entry, scale=entry["scale"] * prov["factor"])
        return old | new
    if edit_type == "position":
        entry = prov["placements"][prov["edited_index"]]
        old = matte_of(entry)
        new = matte_of(entry, center=prov["new_center"])
        return old | new
    if edit_type == "color":
        spec = prov["shapes"][prov["edited_index"]]
        return shape_coverage(
            spec["shape"], tuple(spec["center"]), spec["size"], width, height
        ) > 0.0
    if edit_type in ("text_remove", "text_add"):
        spec = prov["texts"][prov["edited_index"]]
        return _text_spec_matte(spec, width, height) > 0.0
    if edit_type == "text_replace":
        old = _text_spec_matte(prov["texts"][prov["edited_index"]], width, height)
        new = _text_spec_matte(prov["replacement"], width, height)
        return (old > 0.0) | (new > 0.0)
    if edit_type == "seg_detect":
        region = np.ones((height, width), dtype=bool)
        return region
    if edit_type == "background":
        return np.ones((height, width), dtype=bool)
    if edit_type in VIDEO_EDIT_TYPES:
        entries = prov["placements"]
        fg = store.load_frames(entries[0]["asset_id"])
        masks = []
        rep = prov.get("replacement")
        rep_frames = store.load_frames(rep["asset_id"]) if rep else None
        for t in range(len(sample.source)):
            pl = Placement(
                asset_id=entries[0]["asset_id"],
                center=tuple(entries[0]["center"]),
                scale=entries[0]["scale"],
                z_order=0,
            )
            frame_rgba = fg[pingpong_index(t, len(fg))]
            region = placement_matte(frame_rgba, pl, width, height) > 0.0
            if rep_frames is not None:
                rpl = Placement(
                    asset_id=rep["asset_id"],
                    center=tuple(entries[0]["center"]),
                    scale=rep["scale"],
                    z_order=0,
                )
                rframe = rep_frames[pingpong_index(t, len(rep_frames))]
                region |= placement_matte(rframe, rpl, width, height) > 0.0
            masks.append(region)
        return masks
    raise SynthError(f"no edit region rule for {edit_type!r}")

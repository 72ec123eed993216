"""Pixel-level primitives for collage construction.

Everything here is a pure function over numpy arrays: alpha-over
compositing of matted layers, bilinear placement, brightness scaling,
procedural shape and text rasterization, and mask / bounding-box
annotation overlays. All quantization to uint8 uses
round-half-away-from-zero so outputs are bit-identical across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .font5x7 import FONT_HEIGHT, FONT_WIDTH, glyph_bitmap, renderable

SHAPE_KINDS = ("circle", "square", "triangle", "star")
ANNOTATION_MODES = ("mask_fill", "bbox_outline")

# Alpha level above which a matte pixel counts as support.
ALPHA_SUPPORT = 0.5

TEXT_MIN_LEN = 3
TEXT_MAX_LEN = 12

MAX_PLACEMENT_SCALE = 8.0

# Subpixel grid per axis for anti-aliased shape coverage.
_SUPERSAMPLE = 4

# Inner/outer radius ratio of a five-point star outline.
_STAR_INNER = 0.381966


class CompositorError(ValueError):
    """Raised when a drawing or compositing precondition is violated."""


@dataclass(frozen=True)
class Placement:
    """One positioned layer: an asset scaled about an integer pixel center.

    scale is relative to the asset's native size; z_order sorts layers
    bottom to top.
    """

    asset_id: str
    center: tuple[int, int]
    scale: float
    z_order: int = 0


@dataclass(frozen=True)
class AnnotationStyle:
    mode: str
    color: tuple[int, int, int]
    outline_thickness: int = 3

    def __post_init__(self):
        if self.mode not in ANNOTATION_MODES:
            raise CompositorError(f"unknown annotation mode: {self.mode!r}")
        _check_color(self.color)
        if self.outline_thickness < 1:
            raise CompositorError("outline thickness must be >= 1")


def _check_color(color) -> tuple[int, int, int]:
    color = tuple(int(c) for c in color)
    if len(color) != 3 or any(c < 0 or c > 255 for c in color):
        raise CompositorError(f"color must be three channels in [0, 255], got {color}")
    return color


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Round half away from zero and clamp to the uint8 range.

    Pixel math never goes negative, so floor(x + 0.5) realizes the rule.
    """
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5).clip(0.0, 255.0).astype(np.uint8)


def validate_canvas(canvas: np.ndarray) -> np.ndarray:
    canvas = np.asarray(canvas)
    if canvas.ndim != 3 or canvas.shape[2] != 3 or canvas.dtype != np.uint8:
        raise CompositorError("canvas must be an (H, W, 3) uint8 array")
    h, w = canvas.shape[:2]
    if h % 16 or w % 16 or h == 0 or w == 0:
        raise CompositorError(f"canvas dimensions must be positive multiples of 16, got {w}x{h}")
    return canvas


def _validate_rgba(pixels: np.ndarray, asset_id: str) -> np.ndarray:
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 4 or pixels.dtype != np.uint8:
        raise CompositorError(f"layer {asset_id!r} must be an (H, W, 4) uint8 array")
    return pixels


def scaled_size(width: int, height: int, scale: float) -> tuple[int, int]:
    """Raster extent of a layer after uniform scaling (at least 1x1)."""
    sw = max(1, int(math.floor(width * scale + 0.5)))
    sh = max(1, int(math.floor(height * scale + 0.5)))
    return sw, sh


def placement_box(placement: Placement, native_size: tuple[int, int]) -> tuple[int, int, int, int]:
    """(left, top, width, height) of the placed layer's scaled raster."""
    sw, sh = scaled_size(native_size[0], native_size[1], placement.scale)
    cx, cy = placement.center
    return cx - sw // 2, cy - sh // 2, sw, sh


def resize_bilinear(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel centers, returned as float64.

    Source coordinates are clamped at the borders; channels resample
    independently.
    """
    src = np.asarray(pixels, dtype=np.float64)
    in_h, in_w = src.shape[:2]
    if out_h < 1 or out_w < 1:
        raise CompositorError("resize target must be at least 1x1")
    if (out_h, out_w) == (in_h, in_w):
        return src.copy()

    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    y0f = np.floor(ys)
    x0f = np.floor(xs)
    ty = ys - y0f
    tx = xs - x0f
    y0 = np.clip(y0f, 0, in_h - 1).astype(np.intp)
    y1 = np.clip(y0f + 1, 0, in_h - 1).astype(np.intp)
    x0 = np.clip(x0f, 0, in_w - 1).astype(np.intp)
    x1 = np.clip(x0f + 1, 0, in_w - 1).astype(np.intp)

    if src.ndim == 2:
        ty_col = ty[:, None]
        tx_row = tx[None, :]
    else:
        ty_col = ty[:, None, None]
        tx_row = tx[None, :, None]

    rows = src[y0] * (1.0 - ty_col) + src[y1] * ty_col
    return rows[:, x0] * (1.0 - tx_row) + rows[:, x1] * tx_row


def fit_cover(pixels: np.ndarray, width: int, height: int) -> np.ndarray:
    """Resize-to-cover then center-crop; the standard background fit."""
    src = np.asarray(pixels)
    in_h, in_w = src.shape[:2]
    scale = max(width / in_w, height / in_h)
    rw = max(width, int(math.ceil(in_w * scale - 1e-9)))
    rh = max(height, int(math.ceil(in_h * scale - 1e-9)))
    resized = resize_bilinear(src, rh, rw)
    left = (rw - width) // 2
    top = (rh - height) // 2
    return quantize_u8(resized[top:top + height, left:left + width])


def _scaled_layer(rgba: np.ndarray, scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Premultiplied RGB and alpha of a layer after scaling, as float64."""
    alpha = rgba[..., 3].astype(np.float64) / 255.0
    stacked = np.concatenate(
        [rgba[..., :3].astype(np.float64) * alpha[..., None], alpha[..., None]], axis=2
    )
    sw, sh = scaled_size(rgba.shape[1], rgba.shape[0], scale)
    scaled = resize_bilinear(stacked, sh, sw)
    return np.clip(scaled[..., :3], 0.0, 255.0), np.clip(scaled[..., 3], 0.0, 1.0)


def compose_collage(
    background: np.ndarray,
    placements: Sequence[Placement],
    assets: Mapping[str, np.ndarray],
) -> np.ndarray:
    """Alpha-over all placed layers onto the background, bottom to top.

    Accumulates in float64 and quantizes once, so pixels outside a layer's
    matte are bit-identical whether or not that layer is present.
    """
    validate_canvas(background)
    height, width = background.shape[:2]
    acc = background.astype(np.float64)
    for placement in sorted(placements, key=lambda p: p.z_order):
        if not 0.0 < placement.scale <= MAX_PLACEMENT_SCALE:
            raise CompositorError(
                f"placement scale must lie in (0, {MAX_PLACEMENT_SCALE}], got {placement.scale}"
            )
        try:
            rgba = assets[placement.asset_id]
        except KeyError:
            raise CompositorError(f"missing asset: {placement.asset_id!r}") from None
        rgba = _validate_rgba(rgba, placement.asset_id)
        premul, alpha = _scaled_layer(rgba, placement.scale)
        sh, sw = alpha.shape
        left = placement.center[0] - sw // 2
        top = placement.center[1] - sh // 2
        if left < 0 or top < 0 or left + sw > width or top + sh > height:
            raise CompositorError(
                f"placement {placement.asset_id!r} out of bounds: "
                f"{sw}x{sh} at ({left}, {top}) on {width}x{height}"
            )
        region = acc[top:top + sh, left:left + sw]
        region *= (1.0 - alpha)[..., None]
        region += premul
    return quantize_u8(acc)


def placement_matte(
    rgba: np.ndarray, placement: Placement, width: int, height: int
) -> np.ndarray:
    """Full-canvas alpha in [0, 1] contributed by one placed layer."""
    rgba = _validate_rgba(rgba, placement.asset_id)
    _, alpha = _scaled_layer(rgba, placement.scale)
    sh, sw = alpha.shape
    left = placement.center[0] - sw // 2
    top = placement.center[1] - sh // 2
    if left < 0 or top < 0 or left + sw > width or top + sh > height:
        raise CompositorError(f"placement {placement.asset_id!r} out of bounds")
    matte = np.zeros((height, width), dtype=np.float64)
    matte[top:top + sh, left:left + sw] = alpha
    return matte


def adjust_brightness(pixels: np.ndarray, factor: float) -> np.ndarray:
    """Scale channels by factor with clamp; factor limited to [0.5, 2.0]."""
    if not 0.5 <= factor <= 2.0:
        raise CompositorError(f"brightness factor must lie in [0.5, 2.0], got {factor}")
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8:
        raise CompositorError("brightness expects uint8 pixels")
    return quantize_u8(pixels.astype(np.float64) * factor)


def _polygon_coverage_test(xs: np.ndarray, ys: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Even-odd containment of sample points in a closed polygon."""
    inside = np.zeros(xs.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        crosses = (ys < y0) != (ys < y1)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ys - y0) / (y1 - y0)
        hits = crosses & (xs < x0 + t * (x1 - x0))
        inside ^= hits
    return inside


def _shape_vertices(shape: str, cx: float, cy: float, size: float) -> np.ndarray:
    r = size / 2.0
    if shape == "triangle":
        angles = np.array([-90.0, 30.0, 150.0])
        radii = np.full(3, r)
    else:  # star
        angles = -90.0 + 36.0 * np.arange(10)
        radii = np.where(np.arange(10) % 2 == 0, r, r * _STAR_INNER)
    rad = np.deg2rad(angles)
    return np.stack([cx + radii * np.cos(rad), cy + radii * np.sin(rad)], axis=1)


def shape_coverage(
    shape: str, center: tuple[int, int], size: float, width: int, height: int
) -> np.ndarray:
    """Full-canvas anti-aliased coverage in [0, 1] for one shape."""
    if shape not in SHAPE_KINDS:
        raise CompositorError(f"unknown shape: {shape!r}")
    if size <= 0:
        raise CompositorError("shape size must be positive")
    cx, cy = float(center[0]), float(center[1])
    half = size / 2.0
    left = int(math.floor(cx - half))
    top = int(math.floor(cy - half))
    right = int(math.ceil(cx + half))
    bottom = int(math.ceil(cy + half))
    if left < 0 or top < 0 or right > width or bottom > height:
        raise CompositorError(
            f"shape out of bounds: {shape} size {size} at ({cx}, {cy}) on {width}x{height}"
        )
    bw = right - left
    bh = bottom - top
    ss = _SUPERSAMPLE
    sub = (np.arange(ss) + 0.5) / ss
    xs = (left + (np.arange(bw)[:, None] + sub[None, :]).reshape(-1))[None, :]
    ys = (top + (np.arange(bh)[:, None] + sub[None, :]).reshape(-1))[:, None]
    xs = np.broadcast_to(xs, (bh * ss, bw * ss))
    ys = np.broadcast_to(ys, (bh * ss, bw * ss))

    if shape == "circle":
        inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= half * half
    elif shape == "square":
        inside = np.maximum(np.abs(xs - cx), np.abs(ys - cy)) <= half
    else:
        inside = _polygon_coverage_test(xs, ys, _shape_vertices(shape, cx, cy, size))

    cov = inside.astype(np.float64).reshape(bh, ss, bw, ss).mean(axis=(1, 3))
    full = np.zeros((height, width), dtype=np.float64)
    full[top:bottom, left:right] = cov
    return full


def render_shape(
    canvas: np.ndarray,
    shape: str,
    color: tuple[int, int, int],
    center: tuple[int, int],
    size: float,
) -> np.ndarray:
    """Rasterize one anti-aliased shape over the canvas; pure, returns a copy."""
    validate_canvas(canvas)
    color = _check_color(color)
    height, width = canvas.shape[:2]
    coverage = shape_coverage(shape, center, size, width, height)
    out = canvas.copy()
    rows, cols = np.nonzero(coverage)
    if rows.size == 0:
        return out
    r0, r1 = rows.min(), rows.max() + 1
    c0, c1 = cols.min(), cols.max() + 1
    cov = coverage[r0:r1, c0:c1][..., None]
    region = canvas[r0:r1, c0:c1].astype(np.float64)
    blended = cov * np.array(color, dtype=np.float64) + (1.0 - cov) * region
    out[r0:r1, c0:c1] = quantize_u8(blended)
    return out


def _char_cell(glyph_height: int) -> tuple[int, int]:
    char_w = (FONT_WIDTH * glyph_height + FONT_HEIGHT - 1) // FONT_HEIGHT
    spacing = (glyph_height + FONT_HEIGHT - 1) // FONT_HEIGHT
    return char_w, spacing


def _char_mask(ch: str, glyph_height: int, *, label: bool = False) -> np.ndarray:
    char_w, _ = _char_cell(glyph_height)
    bitmap = glyph_bitmap(ch, label=label)
    rows = (np.arange(glyph_height) * FONT_HEIGHT) // glyph_height
    cols = (np.arange(char_w) * FONT_WIDTH) // char_w
    return bitmap[np.ix_(rows, cols)]


def text_extent(text: str, glyph_height: int) -> tuple[int, int]:
    """Raster (width, height) of a rendered string."""
    char_w, spacing = _char_cell(glyph_height)
    return len(text) * char_w + (len(text) - 1) * spacing, glyph_height


def _text_mask(text: str, glyph_height: int, *, label: bool = False) -> np.ndarray:
    char_w, spacing = _char_cell(glyph_height)
    total_w, _ = text_extent(text, glyph_height)
    mask = np.zeros((glyph_height, total_w), dtype=bool)
    x = 0
    for ch in text:
        mask[:, x:x + char_w] = _char_mask(ch, glyph_height, label=label)
        x += char_w + spacing
    return mask


def render_text(
    canvas: np.ndarray,
    text: str,
    color: tuple[int, int, int],
    center: tuple[int, int],
    glyph_height: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw a string with the embedded font; returns (canvas, matte).

    The matte is a full-canvas float grid in {0, 1}; compositing is hard
    (no anti-aliasing) so erasing through the matte restores the input
    exactly.
    """
    validate_canvas(canvas)
    color = _check_color(color)
    if not TEXT_MIN_LEN <= len(text) <= TEXT_MAX_LEN:
        raise CompositorError(
            f"text length must lie in [{TEXT_MIN_LEN}, {TEXT_MAX_LEN}], got {len(text)}"
        )
    for ch in text:
        if not renderable(ch):
            raise CompositorError(f"non-renderable character: {ch!r}")
    if glyph_height < FONT_HEIGHT:
        raise CompositorError(f"glyph height must be >= {FONT_HEIGHT}")

    height, width = canvas.shape[:2]
    mask = _text_mask(text, glyph_height)
    th, tw = mask.shape
    left = center[0] - tw // 2
    top = center[1] - th // 2
    if left < 0 or top < 0 or left + tw > width or top + th > height:
        raise CompositorError(f"text {text!r} out of bounds at {center}")

    out = canvas.copy()
    region = out[top:top + th, left:left + tw]
    region[mask] = color
    matte = np.zeros((height, width), dtype=np.float64)
    matte[top:top + th, left:left + tw] = mask.astype(np.float64)
    return out, matte


def draw_label(canvas: np.ndarray, text: str, color, origin: tuple[int, int], glyph_height: int) -> None:
    """Best-effort in-place label for preview grids; unknown chars go blank."""
    height, width = canvas.shape[:2]
    if not text or glyph_height < FONT_HEIGHT:
        return
    mask = _text_mask(text, glyph_height, label=True)
    th, tw = mask.shape
    left, top = origin
    tw = min(tw, width - left)
    th = min(th, height - top)
    if tw <= 0 or th <= 0:
        return
    region = canvas[top:top + th, left:left + tw]
    region[mask[:th, :tw]] = color


def matte_support(matte: np.ndarray) -> np.ndarray:
    """Boolean support of a matte: alpha above the 0.5 threshold."""
    matte = np.asarray(matte)
    if matte.dtype == np.uint8:
        matte = matte.astype(np.float64) / 255.0
    return matte > ALPHA_SUPPORT


def support_bbox(support: np.ndarray) -> tuple[int, int, int, int]:
    """(row0, row1, col0, col1) inclusive bounds of a boolean support."""
    rows, cols = np.nonzero(support)
    if rows.size == 0:
        raise CompositorError("empty matte support")
    return int(rows.min()), int(rows.max()), int(cols.min()), int(cols.max())


def render_annotation(
    canvas: np.ndarray, matte: np.ndarray, style: AnnotationStyle
) -> np.ndarray:
    """Paint a mask fill or a bounding-box outline derived from a matte."""
    validate_canvas(canvas)
    support = matte_support(matte)
    if support.shape != canvas.shape[:2]:
        raise CompositorError("matte shape must match canvas")
    r0, r1, c0, c1 = support_bbox(support)
    out = canvas.copy()
    if style.mode == "mask_fill":
        out[support] = style.color
        return out

    t = style.outline_thickness
    ring = np.zeros(canvas.shape[:2], dtype=bool)
    ring[r0:r1 + 1, c0:c1 + 1] = True
    ir0, ir1 = r0 + t, r1 + 1 - t
    ic0, ic1 = c0 + t, c1 + 1 - t
    if ir0 < ir1 and ic0 < ic1:
        ring[ir0:ir1, ic0:ic1] = False
    out[ring] = style.color
    return out

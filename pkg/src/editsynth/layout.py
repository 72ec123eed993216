"""Resolution bins, video shapes, and rejection-sampled object layouts.

All randomness in the pipeline flows through RngState: a (seed, stream_id)
pair mapped onto a counter-based generator, so any sample can be
regenerated from its recorded coordinates alone and worker processes can
own disjoint stream ranges without coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .compositor import Placement, scaled_size

BIN_COUNT = 31
BASE_SIDE = 512
BASE_AREA = BASE_SIDE * BASE_SIDE

FRAME_COUNTS = (73, 77, 81, 85)
# Stored as listed (height, width); sample_video_shape flips per config.
VIDEO_RESOLUTIONS = ((320, 544), (384, 480), (416, 416), (480, 384), (544, 320))


class LayoutError(RuntimeError):
    """Raised when rejection sampling cannot satisfy the layout constraints."""


@dataclass(frozen=True)
class RngState:
    """Seed coordinates for one deterministic draw stream."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed % 2**64, self.stream_id % 2**64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def as_generator(rng: "RngState | np.random.Generator") -> np.random.Generator:
    if isinstance(rng, RngState):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngState or numpy Generator, got {type(rng).__name__}")


@dataclass(frozen=True)
class AspectBin:
    index: int
    aspect: float
    width: int
    height: int

    def __post_init__(self):
        if not 0 <= self.index < BIN_COUNT:
            raise LayoutError(f"bin index must lie in [0, {BIN_COUNT - 1}]: {self.index}")


@dataclass(frozen=True)
class VideoShape:
    frame_count: int
    width: int
    height: int

    def __post_init__(self):
        if self.frame_count not in FRAME_COUNTS:
            raise LayoutError(f"frame count must be one of {FRAME_COUNTS}: {self.frame_count}")
        pair = (self.width, self.height)
        if pair not in VIDEO_RESOLUTIONS and pair[::-1] not in VIDEO_RESOLUTIONS:
            raise LayoutError(f"unsupported video resolution: {self.width}x{self.height}")


def _round_to_16(value: float) -> int:
    # Ties resolve upward.
    return 16 * int(math.floor(value / 16.0 + 0.5))


def make_bins() -> list[AspectBin]:
    """The 31 aspect bins: geometric aspects from 4:1 down to 1:4.

    Bin k targets aspect 4^(1 - k/15) at constant area 512^2; sides are
    rounded to multiples of 16.
    """
    bins = []
    for k in range(BIN_COUNT):
        aspect = 4.0 ** (1.0 - k / 15.0)
        root = math.sqrt(aspect)
        bins.append(
            AspectBin(
                index=k,
                aspect=aspect,
                width=_round_to_16(BASE_SIDE * root),
                height=_round_to_16(BASE_SIDE / root),
            )
        )
    return bins


def sample_video_shape(
    rng: "RngState | np.random.Generator", *, height_width_order: bool = True
) -> VideoShape:
    """Uniform draw over the 4 frame counts x 5 resolutions.

    height_width_order controls how the resolution table is read; the
    default takes each entry as (height, width).
    """
    gen = as_generator(rng)
    frame_count = FRAME_COUNTS[int(gen.integers(len(FRAME_COUNTS)))]
    a, b = VIDEO_RESOLUTIONS[int(gen.integers(len(VIDEO_RESOLUTIONS)))]
    height, width = (a, b) if height_width_order else (b, a)
    return VideoShape(frame_count=frame_count, width=width, height=height)


@dataclass(frozen=True)
class LayoutConstraints:
    """Knobs for rejection-sampled placements.

    scale_range bounds the placed object's larger raster side as a
    fraction of the canvas's smaller side; max_overlap caps pairwise
    bounding-box IoU.
    """

    scale_range: tuple[float, float] = (0.2, 0.6)
    max_overlap: float = 0.3
    max_restarts: int = 60
    tries_per_object: int = 80

    def __post_init__(self):
        lo, hi = self.scale_range
        if not 0.0 < lo <= hi:
            raise LayoutError(f"bad scale range: {self.scale_range}")
        if not 0.0 <= self.max_overlap <= 1.0:
            raise LayoutError(f"overlap cap must lie in [0, 1]: {self.max_overlap}")


def box_iou(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> float:
    """IoU of two (left, top, width, height) boxes."""
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    ix = max(0, min(ax0 + aw, bx0 + bw) - max(ax0, bx0))
    iy = max(0, min(ay0 + ah, by0 + bh) - max(ay0, by0))
    inter = ix * iy
    if inter == 0:
        return 0.0
    return inter / (aw * ah + bw * bh - inter)


def _place_one(
    gen: np.random.Generator,
    width: int,
    height: int,
    native: tuple[int, int],
    constraints: LayoutConstraints,
    occupied: list[tuple[int, int, int, int]],
) -> tuple[tuple[int, int], float, tuple[int, int, int, int]] | None:
    lo, hi = constraints.scale_range
    for _ in range(constraints.tries_per_object):
        frac = float(gen.uniform(lo, hi))
        target = frac * min(width, height)
        scale = target / max(native[0], native[1])
        sw, sh = scaled_size(native[0], native[1], scale)
        if sw > width or sh > height:
            continue
        left = int(gen.integers(0, width - sw + 1))
        top = int(gen.integers(0, height - sh + 1))
        box = (left, top, sw, sh)
        if any(box_iou(box, other) > constraints.max_overlap for other in occupied):
            continue
        return (left + sw // 2, top + sh // 2), scale, box
    return None


def sample_placements(
    rng: "RngState | np.random.Generator",
    width: int,
    height: int,
    assets: Sequence[tuple[str, int, int]],
    constraints: LayoutConstraints | None = None,
    existing: Sequence[tuple[int, int, int, int]] = (),
    z_base: int = 0,
) -> list[Placement]:
    """Place each (asset_id, native_w, native_h) fully inside the canvas.

    Object extents are drawn from constraints.scale_range, pairwise
    bounding-box IoU (including against `existing` boxes) stays at or
    below the overlap cap, and exhausting the retry budget raises
    LayoutError.
    """
    gen = as_generator(rng)
    constraints = constraints or LayoutConstraints()
    if not 1 <= len(assets) <= 6:
        raise LayoutError(f"object count must lie in [1, 6], got {len(assets)}")

    for _ in range(constraints.max_restarts):
        placements: list[Placement] = []
        occupied = list(existing)
        for i, (asset_id, nw, nh) in enumerate(assets):
            hit = _place_one(gen, width, height, (nw, nh), constraints, occupied)
            if hit is None:
                break
            center, scale, box = hit
            placements.append(
                Placement(asset_id=asset_id, center=center, scale=scale, z_order=z_base + i)
            )
            occupied.append(box)
        else:
            return placements
    raise LayoutError(
        f"could not place {len(assets)} objects on {width}x{height} within the retry budget"
    )

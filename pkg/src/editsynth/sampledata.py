"""Procedural asset store builder.

Generates matted foreground blobs, gradient backgrounds, and short clips
entirely from a seed, then ingests them. Lets demos and tests run without
any external media.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assets import AssetIndex, ingest
from .layout import RngState
from .pngio import write_png

ADJECTIVES = ("red", "amber", "sleek", "spotted", "tiny", "pale", "striped", "dusky")
NOUNS = ("fox", "lantern", "kettle", "drone", "cactus", "buoy", "pylon", "satchel")
SCENES = ("meadow", "harbor", "workshop", "dune field", "night market", "glacier")


@dataclass(frozen=True)
class StorePlan:
    fg_images: int = 8
    bg_images: int = 4
    fg_clips: int = 3
    bg_clips: int = 2
    clip_frames: int = 8
    bg_clip_frames: int = 80
    seed: int = 0


def _caption(gen) -> tuple[str, str]:
    adj = ADJECTIVES[int(gen.integers(len(ADJECTIVES)))]
    noun = NOUNS[int(gen.integers(len(NOUNS)))]
    brief = f"a {adj} {noun}"
    detailed = f"a {adj} {noun} with a matte finish under soft light"
    return brief, detailed


def _scene_caption(gen) -> tuple[str, str]:
    scene = SCENES[int(gen.integers(len(SCENES)))]
    return f"a {scene}", f"a wide view of a {scene} at midday"


def _confidence(gen) -> float:
    return round(0.91 + 0.08 * float(gen.uniform()), 3)


def make_blob_rgba(gen, width: int, height: int, squash: float = 1.0) -> np.ndarray:
    """Superellipse blob with a hard binary matte and striped two-tone fill."""
    power = float(gen.uniform(1.6, 3.0))
    c0 = gen.integers(30, 226, size=3).astype(np.float64)
    c1 = gen.integers(30, 226, size=3).astype(np.float64)
    freq = float(gen.uniform(3.0, 7.0))
    return _blob_from_params(width, height, power, c0, c1, freq, squash)


def _blob_from_params(width, height, power, c0, c1, freq, squash) -> np.ndarray:
    ys = (np.arange(height, dtype=np.float64) - (height - 1) / 2.0) / (0.48 * height)
    xs = (np.arange(width, dtype=np.float64) - (width - 1) / 2.0) / (0.48 * width)
    yy = ys[:, None] * squash
    xx = xs[None, :] / squash
    inside = (np.abs(xx) ** power + np.abs(yy) ** power) <= 1.0
    radial = np.sqrt(np.clip(xx**2 + yy**2, 0.0, 1.0))
    rgb = c0[None, None, :] * (1.0 - radial[..., None]) + c1[None, None, :] * radial[..., None]
    stripes = ((xx + yy) * freq) % 2.0 < 1.0
    rgb = np.where(stripes[..., None], rgb * 0.8, rgb)
    rgba = np.zeros((height, width, 4), dtype=np.uint8)
    rgba[..., :3] = np.clip(rgb + 0.5, 0, 255).astype(np.uint8)
    rgba[..., 3] = np.where(inside, 255, 0).astype(np.uint8)
    return rgba


def make_gradient_rgb(gen, width: int, height: int, phase: float = 0.0) -> np.ndarray:
    """Vertical two-color gradient with sinusoidal bands."""
    c0 = gen.integers(20, 236, size=3).astype(np.float64)
    c1 = gen.integers(20, 236, size=3).astype(np.float64)
    bands = float(gen.uniform(2.0, 5.0))
    return _gradient_from_params(width, height, c0, c1, bands, phase)


def _gradient_from_params(width, height, c0, c1, bands, phase) -> np.ndarray:
    t = np.linspace(0.0, 1.0, height, dtype=np.float64)[:, None, None]
    base = c0[None, None, :] * (1.0 - t) + c1[None, None, :] * t
    x = np.linspace(0.0, 1.0, width, dtype=np.float64)[None, :, None]
    wave = 16.0 * np.sin(2.0 * np.pi * (bands * x + phase))
    return np.clip(base + wave + 0.5, 0, 255).astype(np.uint8)


def build_store(root: Path, plan: StorePlan = StorePlan()) -> AssetIndex:
    """Write media + manifest under `root` and ingest them."""
    root = Path(root)
    media = root / "media"
    media.mkdir(parents=True, exist_ok=True)
    gen = RngState(plan.seed, 0xA55E7).generator()
    rows: list[dict] = []

    def add(row_id, kind, rel, brief, detailed):
        rows.append(
            {
                "id": row_id,
                "kind": kind,
                "path": rel,
                "caption_brief": brief,
                "caption_detailed": detailed,
                "confidence": _confidence(gen),
            }
        )

    for i in range(plan.fg_images):
        w = int(gen.integers(64, 145))
        h = int(gen.integers(64, 145))
        rel = f"media/fg_{i:03d}.png"
        write_png(root / rel, make_blob_rgba(gen, w, h))
        brief, detailed = _caption(gen)
        add(f"fg{i:03d}", "fg_image", rel, brief, detailed)

    for i in range(plan.bg_images):
        w = int(gen.integers(256, 321))
        h = int(gen.integers(256, 321))
        rel = f"media/bg_{i:03d}.png"
        write_png(root / rel, make_gradient_rgb(gen, w, h))
        brief, detailed = _scene_caption(gen)
        add(f"bg{i:03d}", "bg_image", rel, brief, detailed)

    for i in range(plan.fg_clips):
        w = int(gen.integers(64, 129))
        h = int(gen.integers(64, 129))
        power = float(gen.uniform(1.6, 3.0))
        c0 = gen.integers(30, 226, size=3).astype(np.float64)
        c1 = gen.integers(30, 226, size=3).astype(np.float64)
        freq = float(gen.uniform(3.0, 7.0))
        rel = f"media/fgclip_{i:03d}"
        clip_dir = root / rel
        clip_dir.mkdir(parents=True, exist_ok=True)
        for t in range(plan.clip_frames):
            squash = 1.0 + 0.15 * np.sin(2.0 * np.pi * t / plan.clip_frames)
            frame = _blob_from_params(w, h, power, c0, c1, freq, squash)
            write_png(clip_dir / f"frame_{t:03d}.png", frame)
        brief, detailed = _caption(gen)
        add(f"fgclip{i:03d}", "fg_clip", rel, brief, detailed)

    for i in range(plan.bg_clips):
        w = int(gen.integers(256, 321))
        h = int(gen.integers(256, 321))
        c0 = gen.integers(20, 236, size=3).astype(np.float64)
        c1 = gen.integers(20, 236, size=3).astype(np.float64)
        bands = float(gen.uniform(2.0, 5.0))
        frames = plan.bg_clip_frames + 5 * i
        rel = f"media/bgclip_{i:03d}"
        clip_dir = root / rel
        clip_dir.mkdir(parents=True, exist_ok=True)
        for t in range(frames):
            frame = _gradient_from_params(w, h, c0, c1, bands, phase=t / frames)
            write_png(clip_dir / f"frame_{t:03d}.png", frame)
        brief, detailed = _scene_caption(gen)
        add(f"bgclip{i:03d}", "bg_clip", rel, brief, detailed)

    manifest = root / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return ingest(manifest)

"""Matted-asset store: ingest, validation, persistence, and sampling.

A store is a directory holding media plus a line-delimited manifest; ingest
validates every record, skips undecodable media with a reason, and persists
a canonical index beside the manifest so repeated ingests are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image

from .layout import RngState, as_generator

log = logging.getLogger(__name__)

KINDS = ("fg_image", "bg_image", "fg_clip", "bg_clip")
CLIP_KINDS = ("fg_clip", "bg_clip")

MIN_BG_SIDE = 256
MIN_BG_CLIP_FRAMES = 73
DEFAULT_MIN_CONFIDENCE = 0.9

INDEX_FORMAT = "editsynth/asset-index@1"
INDEX_NAME = "index.json"
FRAME_GLOB = "frame_*.png"


class AssetError(RuntimeError):
    """Store-level failure: missing kinds, unknown ids, bad lookups."""


class IngestError(AssetError):
    """Fatal ingest failure: unreadable manifest or duplicate asset id."""


@dataclass(frozen=True)
class AssetRecord:
    asset_id: str
    kind: str
    path: str
    caption_brief: str
    caption_detailed: str
    confidence: float
    width: int
    height: int
    frame_count: int = 0

    def to_dict(self) -> dict:
        return {
            "id": self.asset_id,
            "kind": self.kind,
            "path": self.path,
            "caption_brief": self.caption_brief,
            "caption_detailed": self.caption_detailed,
            "confidence": self.confidence,
            "width": self.width,
            "height": self.height,
            "frame_count": self.frame_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AssetRecord":
        return cls(
            asset_id=data["id"],
            kind=data["kind"],
            path=data["path"],
            caption_brief=data["caption_brief"],
            caption_detailed=data["caption_detailed"],
            confidence=float(data["confidence"]),
            width=int(data["width"]),
            height=int(data["height"]),
            frame_count=int(data.get("frame_count", 0)),
        )


@dataclass(frozen=True)
class ForegroundAsset:
    asset_id: str
    pixels: np.ndarray  # (H, W, 4) uint8, alpha is the matte
    caption_brief: str
    caption_detailed: str
    width: int
    height: int
    segmentation_confidence: float


@dataclass(frozen=True)
class BackgroundAsset:
    asset_id: str
    pixels: np.ndarray  # (H, W, 3) uint8
    caption_brief: str
    width: int
    height: int


@dataclass(frozen=True)
class VideoClipAsset:
    asset_id: str
    frames: tuple[np.ndarray, ...]
    frame_count: int
    role: str  # "foreground" | "background"
    caption_brief: str
    caption_detailed: str


class _Invalid(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _decode_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            pixels = np.asarray(im)
            mode = im.mode
    except FileNotFoundError:
        raise _Invalid("missing media file")
    except Exception as exc:  # noqa: BLE001 - any decoder failure is a skip
        raise _Invalid(f"undecodable media: {exc}")
    if mode not in ("RGB", "RGBA"):
        raise _Invalid(f"unsupported image mode: {mode}")
    return pixels


def _validate_fg_image(path: Path) -> tuple[int, int]:
    pixels = _decode_image(path)
    if pixels.ndim != 3 or pixels.shape[2] != 4:
        raise _Invalid("foreground image must be RGBA")
    alpha = pixels[..., 3]
    if not (alpha > 0).any() or not (alpha == 0).any():
        raise _Invalid("alpha channel is not a matte (needs opaque and empty pixels)")
    return pixels.shape[1], pixels.shape[0]


def _validate_bg_image(path: Path) -> tuple[int, int]:
    pixels = _decode_image(path)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise _Invalid("background image must be RGB")
    h, w = pixels.shape[:2]
    if w < MIN_BG_SIDE or h < MIN_BG_SIDE:
        raise _Invalid(f"background must be at least {MIN_BG_SIDE}x{MIN_BG_SIDE}, got {w}x{h}")
    return w, h


def _clip_frame_paths(path: Path) -> list[Path]:
    if not path.is_dir():
        raise _Invalid("clip path is not a directory")
    frames = sorted(path.glob(FRAME_GLOB))
    if not frames:
        raise _Invalid("clip directory holds no frames")
    return frames


def _validate_clip(path: Path, kind: str) -> tuple[int, int, int]:
    frames = _clip_frame_paths(path)
    want_channels = 4 if kind == "fg_clip" else 3
    size = None
    for frame_path in frames:
        pixels = _decode_image(frame_path)
        if pixels.ndim != 3 or pixels.shape[2] != want_channels:
            raise _Invalid(
                f"clip frame {frame_path.name} must have {want_channels} channels"
            )
        if size is None:
            size = pixels.shape[:2]
        elif pixels.shape[:2] != size:
            raise _Invalid("clip frames disagree on size")
    if kind == "bg_clip" and len(frames) < MIN_BG_CLIP_FRAMES:
        raise _Invalid(
            f"background clip needs at least {MIN_BG_CLIP_FRAMES} frames, got {len(frames)}"
        )
    return size[1], size[0], len(frames)


class AssetIndex:
    """Validated view of a store: records by id, kind pools, cached pixels."""

    def __init__(
        self,
        root: Path,
        entries: dict[str, AssetRecord],
        rejections: tuple[tuple[str, str], ...] = (),
        min_confidence: float = DEFAULT_MIN_CONFIDENCE,
    ):
        self.root = Path(root)
        self.entries = dict(entries)
        self.rejections = tuple(rejections)
        self.min_confidence = min_confidence
        self._by_kind = {
            kind: tuple(sorted(r.asset_id for r in entries.values() if r.kind == kind))
            for kind in KINDS
        }
        self._pixel_cache: dict[str, object] = {}

    @property
    def counts(self) -> dict[str, int]:
        return {kind: len(ids) for kind, ids in self._by_kind.items()}

    def ids(self, kind: str) -> tuple[str, ...]:
        if kind not in KINDS:
            raise AssetError(f"unknown asset kind: {kind!r}")
        return self._by_kind[kind]

    def record(self, asset_id: str) -> AssetRecord:
        try:
            return self.entries[asset_id]
        except KeyError:
            raise AssetError(f"unknown asset id: {asset_id!r}") from None

    def _media_path(self, record: AssetRecord) -> Path:
        path = Path(record.path)
        return path if path.is_absolute() else self.root / path

    def load_pixels(self, asset_id: str) -> np.ndarray:
        """Decoded pixels of an image asset (cached)."""
        record = self.record(asset_id)
        if record.kind in CLIP_KINDS:
            raise AssetError(f"{asset_id!r} is a clip; use load_frames")
        cached = self._pixel_cache.get(asset_id)
        if cached is None:
            with Image.open(self._media_path(record)) as im:
                cached = np.asarray(im)
            self._pixel_cache[asset_id] = cached
        return cached

    def load_frames(self, asset_id: str) -> tuple[np.ndarray, ...]:
        """Decoded frame list of a clip asset (cached)."""
        record = self.record(asset_id)
        if record.kind not in CLIP_KINDS:
            raise AssetError(f"{asset_id!r} is not a clip")
        cached = self._pixel_cache.get(asset_id)
        if cached is None:
            frames = []
            for frame_path in sorted(self._media_path(record).glob(FRAME_GLOB)):
                with Image.open(frame_path) as im:
                    frames.append(np.asarray(im))
            cached = tuple(frames)
            self._pixel_cache[asset_id] = cached
        return cached

    def load(self, asset_id: str):
        """Full domain object for an asset."""
        record = self.record(asset_id)
        if record.kind == "fg_image":
            return ForegroundAsset(
                asset_id=record.asset_id,
                pixels=self.load_pixels(asset_id),
                caption_brief=record.caption_brief,
                caption_detailed=record.caption_detailed,
                width=record.width,
                height=record.height,
                segmentation_confidence=record.confidence,
            )
        if record.kind == "bg_image":
            return BackgroundAsset(
                asset_id=record.asset_id,
                pixels=self.load_pixels(asset_id),
                caption_brief=record.caption_brief,
                width=record.width,
                height=record.height,
            )
        return VideoClipAsset(
            asset_id=record.asset_id,
            frames=self.load_frames(asset_id),
            frame_count=record.frame_count,
            role="foreground" if record.kind == "fg_clip" else "background",
            caption_brief=record.caption_brief,
            caption_detailed=record.caption_detailed,
        )

    def to_payload(self) -> dict:
        return {
            "format": INDEX_FORMAT,
            "min_confidence": self.min_confidence,
            "counts": self.counts,
            "entries": {aid: rec.to_dict() for aid, rec in sorted(self.entries.items())},
            "rejections": [
                {"id": rid, "reason": reason} for rid, reason in self.rejections
            ],
        }

    def to_bytes(self) -> bytes:
        return (json.dumps(self.to_payload(), sort_keys=True, indent=2) + "\n").encode()

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def persist(self, path: Path | None = None) -> Path:
        path = Path(path) if path else self.root / INDEX_NAME
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def open(cls, root: str | Path) -> "AssetIndex":
        """Load a persisted index from a store root (or an index path)."""
        root = Path(root)
        index_path = root if root.is_file() else root / INDEX_NAME
        if not index_path.exists():
            raise AssetError(f"no persisted index at {index_path}")
        payload = json.loads(index_path.read_text())
        if payload.get("format") != INDEX_FORMAT:
            raise AssetError(f"unknown index format: {payload.get('format')!r}")
        entries = {
            aid: AssetRecord.from_dict(rec) for aid, rec in payload["entries"].items()
        }
        rejections = tuple((r["id"], r["reason"]) for r in payload.get("rejections", []))
        return cls(
            index_path.parent,
            entries,
            rejections,
            float(payload.get("min_confidence", DEFAULT_MIN_CONFIDENCE)),
        )


def _parse_manifest(manifest_path: Path) -> Iterable[tuple[int, dict]]:
    try:
        lines = manifest_path.read_text().splitlines()
    except OSError as exc:
        raise IngestError(f"unreadable manifest {manifest_path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"malformed manifest line {lineno}: {exc}") from exc
        yield lineno, record


def ingest(
    manifest_path: str | Path, *, min_confidence: float = DEFAULT_MIN_CONFIDENCE
) -> AssetIndex:
    """Validate a store manifest into an AssetIndex and persist it.

    Undecodable or invalid media are skipped and reported on the returned
    index; duplicate ids and unreadable manifests are fatal.
    """
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    entries: dict[str, AssetRecord] = {}
    rejections: list[tuple[str, str]] = []

    for lineno, raw in _parse_manifest(manifest_path):
        asset_id = str(raw.get("id", f"line-{lineno}"))
        if asset_id in entries:
            raise IngestError(f"duplicate asset id: {asset_id!r} (line {lineno})")
        try:
            kind = raw.get("kind")
            if kind not in KINDS:
                raise _Invalid(f"unknown kind: {kind!r}")
            caption_brief = str(raw.get("caption_brief", "")).strip()
            caption_detailed = str(raw.get("caption_detailed", "")).strip()
            if not caption_brief:
                raise _Invalid("empty caption_brief")
            if kind != "bg_image" and not caption_detailed:
                raise _Invalid("empty caption_detailed")
            confidence = float(raw.get("confidence", 1.0))
            if kind == "fg_image" and confidence < min_confidence:
                raise _Invalid(
                    f"segmentation confidence {confidence} below threshold {min_confidence}"
                )
            rel_path = raw.get("path")
            if not rel_path:
                raise _Invalid("missing media path")
            media = root / rel_path
            frame_count = 0
            if kind == "fg_image":
                width, height = _validate_fg_image(media)
            elif kind == "bg_image":
                width, height = _validate_bg_image(media)
            else:
                width, height, frame_count = _validate_clip(media, kind)
        except _Invalid as exc:
            log.warning("skipping asset %s: %s", asset_id, exc.reason)
            rejections.append((asset_id, exc.reason))
            continue
        entries[asset_id] = AssetRecord(
            asset_id=asset_id,
            kind=kind,
            path=str(rel_path),
            caption_brief=caption_brief,
            caption_detailed=caption_detailed,
            confidence=confidence,
            width=width,
            height=height,
            frame_count=frame_count,
        )

    index = AssetIndex(root, entries, tuple(rejections), min_confidence)
    index.persist()
    return index


def sample_asset(
    index: AssetIndex, kind: str, rng: "RngState | np.random.Generator"
) -> AssetRecord:
    """Uniform draw over the store's pool of one kind."""
    ids = index.ids(kind)
    if not ids:
        raise AssetError(f"exhausted asset kind: {kind!r}")
    gen = as_generator(rng)
    return index.record(ids[int(gen.integers(len(ids)))])

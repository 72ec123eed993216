"""On-disk dataset layout.

A dataset tree is a pure function of (asset store, generation config, count):
samples are keyed by stream id, stream ids map to fixed shards, media files
are content-addressed, and every JSON byte is canonical. Worker count,
interruption, and resume therefore never change the resulting bytes.

Layout:
    root/run_config.json            config snapshot + sample count
    root/shards/00000/manifest.jsonl  one record per sample, stream order
    root/shards/00000/<sha16>.png     content-addressed media
    root/manifest.json              written by finalize: counts + digests
    root/gates.jsonl                written by the filter pass
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .assets import AssetIndex
from .layout import RngState, VideoShape
from .pngio import decode_png, encode_png
from .synth.generators import (
    EditSample,
    GenerationConfig,
    decode_canvas,
    generate_sample,
    regenerate,
)

DATASET_FORMAT = "editsynth/dataset@1"
RUN_CONFIG_NAME = "run_config.json"
MANIFEST_NAME = "manifest.json"
GATES_NAME = "gates.jsonl"
SHARD_DIR = "shards"
SHARD_MANIFEST = "manifest.jsonl"
MEDIA_DIGEST_LEN = 16


class DatasetError(RuntimeError):
    """Raised for layout violations, config drift, or verification failures."""


def canonical_json(obj) -> str:
    """Stable serialization: sorted keys, fixed separators, ASCII only."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def media_name(png_bytes: bytes) -> str:
    return hashlib.sha256(png_bytes).hexdigest()[:MEDIA_DIGEST_LEN] + ".png"


@dataclass(frozen=True)
class ShardPlan:
    index: int
    start: int  # first stream id, inclusive
    stop: int  # last stream id, exclusive

    @property
    def name(self) -> str:
        return f"{self.index:05d}"


def shard_plans(count: int, shard_size: int) -> list[ShardPlan]:
    if count < 0 or shard_size < 1:
        raise DatasetError("count must be >= 0 and shard_size >= 1")
    plans = []
    for index, start in enumerate(range(0, count, shard_size)):
        plans.append(ShardPlan(index, start, min(count, start + shard_size)))
    return plans


class Shard:
    """Append-only shard writer with torn-tail recovery on open."""

    def __init__(self, root: Path, plan: ShardPlan):
        self.root = Path(root)
        self.plan = plan
        self.dir = self.root / SHARD_DIR / plan.name
        self.manifest_path = self.dir / SHARD_MANIFEST
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written = self._scrub_tail()
        self._fh = None

    def _scrub_tail(self) -> int:
        """Drop a final record with no trailing newline; count complete ones."""
        if not self.manifest_path.exists():
            return 0
        data = self.manifest_path.read_bytes()
        if not data:
            return 0
        if not data.endswith(b"\n"):
            keep = data.rfind(b"\n") + 1
            with open(self.manifest_path, "r+b") as fh:
                fh.truncate(keep)
            data = data[:keep]
        if not data:
            return 0
        lines = data.decode("utf-8").splitlines()
        for i, line in enumerate(lines):
            try:
                json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(
                    f"shard {self.plan.name} record {i} is corrupt: {exc}"
                ) from exc
        return len(lines)

    @property
    def next_stream(self) -> int:
        return self.plan.start + self.written

    @property
    def complete(self) -> bool:
        return self.next_stream >= self.plan.stop

    def write_media(self, png_bytes: bytes) -> str:
        name = media_name(png_bytes)
        path = self.dir / name
        if not path.exists():
            _atomic_write(path, png_bytes)
        return f"{SHARD_DIR}/{self.plan.name}/{name}"

    def _encode_media(self, media) -> dict:
        if isinstance(media, (list, tuple)):
            return {"frames": [self.write_media(encode_png(frame)) for frame in media]}
        return {"path": self.write_media(encode_png(media))}

    def append_sample(self, sample: EditSample) -> dict:
        if sample.seed[1] != self.next_stream:
            raise DatasetError(
                f"stream order violated: expected {self.next_stream}, got {sample.seed[1]}"
            )
        record = {
            "sample_id": sample.sample_id,
            "edit_type": sample.edit_type,
            "instruction": sample.instruction,
            "seed": sample.seed[0],
            "stream_id": sample.seed[1],
            "bin_or_shape": sample.provenance["canvas"],
            "source": self._encode_media(sample.source),
            "target": self._encode_media(sample.target),
            "provenance": sample.provenance,
        }
        if self._fh is None:
            self._fh = open(self.manifest_path, "ab")
        self._fh.write(canonical_json(record).encode("utf-8") + b"\n")
        self._fh.flush()
        self.written += 1
        return record

    def records(self) -> list[dict]:
        if not self.manifest_path.exists():
            return []
        out = []
        with open(self.manifest_path, "rb") as fh:
            for line in fh.read().decode("utf-8").splitlines():
                if line:
                    out.append(json.loads(line))
        return out

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "Shard":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def init_dataset(root: Path, config: GenerationConfig, count: int, store_digest: str) -> dict:
    """Write (or validate) the run config; refuses on any drift."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": DATASET_FORMAT,
        "count": count,
        "config": config.snapshot(store_digest),
    }
    path = root / RUN_CONFIG_NAME
    if path.exists():
        existing = json.loads(path.read_text("utf-8"))
        if existing != payload:
            raise DatasetError(
                "config drift: existing run_config.json does not match; "
                "refusing to resume with different settings"
            )
        return existing
    _atomic_write(path, (canonical_json(payload) + "\n").encode("utf-8"))
    return payload


def load_run_config(root: Path) -> dict:
    path = Path(root) / RUN_CONFIG_NAME
    if not path.exists():
        raise DatasetError(f"not a dataset (missing {RUN_CONFIG_NAME}): {root}")
    payload = json.loads(path.read_text("utf-8"))
    if payload.get("format") != DATASET_FORMAT:
        raise DatasetError(f"unsupported dataset format: {payload.get('format')!r}")
    return payload


def generate_shard(
    store: AssetIndex,
    config: GenerationConfig,
    plan: ShardPlan,
    root: Path,
    progress: Callable[[int], None] | None = None,
) -> dict:
    """Fill one shard; resumes mid-shard if records already exist."""
    with Shard(root, plan) as shard:
        while not shard.complete:
            stream = shard.next_stream
            sample = generate_sample(store, RngState(config.seed, stream), config)
            shard.append_sample(sample)
            if progress is not None:
                progress(stream)
        return {"index": plan.index, "records": shard.written}


_WORKER_STORES: dict[str, AssetIndex] = {}


def _shard_worker(args: tuple) -> dict:
    store_root, snapshot, plan_tuple, root = args
    store = _WORKER_STORES.get(store_root)
    if store is None:
        store = AssetIndex.open(store_root)
        _WORKER_STORES[store_root] = store
    config = GenerationConfig.from_snapshot(snapshot)
    plan = ShardPlan(*plan_tuple)
    return generate_shard(store, config, plan, Path(root))


def generate_dataset(
    store: AssetIndex,
    config: GenerationConfig,
    count: int,
    root: Path,
    workers: int = 1,
    progress: Callable[[int], None] | None = None,
    stop_after: int | None = None,
) -> dict:
    """Generate (or resume) a dataset of `count` samples under `root`.

    `stop_after` aborts after that many newly written samples; used to
    exercise interrupt/resume in tests.
    """
    root = Path(root)
    init_dataset(root, config, count, store.digest)
    plans = shard_plans(count, config.shard_size)
    written = 0

    if workers <= 1 or stop_after is not None:
        for plan in plans:
            with Shard(root, plan) as shard:
                while not shard.complete:
                    if stop_after is not None and written >= stop_after:
                        return {"count": count, "written": written, "complete": False}
                    stream = shard.next_stream
                    sample = generate_sample(store, RngState(config.seed, stream), config)
                    shard.append_sample(sample)
                    written += 1
                    if progress is not None:
                        progress(stream)
    else:
        snapshot = config.snapshot(store.digest)
        jobs = [
            (str(store.root), snapshot, (p.index, p.start, p.stop), str(root))
            for p in plans
            if not Shard(root, p).complete
        ]
        if jobs:
            ctx = multiprocessing.get_context("spawn")
            with ctx.Pool(processes=workers) as pool:
                for result in pool.imap_unordered(_shard_worker, jobs):
                    written += result["records"]

    manifest = finalize_dataset(root)
    return {"count": count, "written": written, "complete": True, "manifest": manifest}


def finalize_dataset(root: Path) -> dict:
    """Compute the top-level manifest from shard contents."""
    root = Path(root)
    run = load_run_config(root)
    plans = shard_plans(run["count"], run["config"]["shard_size"])
    shards = []
    total = 0
    for plan in plans:
        path = root / SHARD_DIR / plan.name / SHARD_MANIFEST
        if not path.exists():
            raise DatasetError(f"missing shard manifest: {path}")
        data = path.read_bytes()
        records = sum(1 for line in data.splitlines() if line)
        total += records
        shards.append(
            {
                "index": plan.index,
                "path": f"{SHARD_DIR}/{plan.name}/{SHARD_MANIFEST}",
                "records": records,
                "digest": hashlib.sha256(data).hexdigest(),
            }
        )
    manifest = {
        "format": DATASET_FORMAT,
        "count": run["count"],
        "records": total,
        "shards": shards,
    }
    _atomic_write(root / MANIFEST_NAME, (canonical_json(manifest) + "\n").encode("utf-8"))
    return manifest


def load_manifest(root: Path) -> dict:
    path = Path(root) / MANIFEST_NAME
    if not path.exists():
        raise DatasetError(f"dataset not finalized (missing {MANIFEST_NAME}): {root}")
    return json.loads(path.read_text("utf-8"))


def iter_records(root: Path) -> Iterable[dict]:
    run = load_run_config(root)
    for plan in shard_plans(run["count"], run["config"]["shard_size"]):
        path = Path(root) / SHARD_DIR / plan.name / SHARD_MANIFEST
        if not path.exists():
            continue
        with open(path, "rb") as fh:
            for line in fh.read().decode("utf-8").splitlines():
                if line:
                    yield json.loads(line)


def load_media(root: Path, entry: dict):
    """Decode one media entry ({"path": ...} or {"frames": [...]})."""
    root = Path(root)
    if "frames" in entry:
        return [decode_png((root / p).read_bytes()) for p in entry["frames"]]
    return decode_png((root / entry["path"]).read_bytes())


@dataclass
class MediaSample:
    """Record + decoded media, shaped like an in-memory sample for gating."""

    sample_id: str
    edit_type: str
    instruction: str
    source: "np.ndarray | list[np.ndarray]"
    target: "np.ndarray | list[np.ndarray]"
    record: dict

    @property
    def is_video(self) -> bool:
        return isinstance(self.source, list)


def open_sample(root: Path, record: dict) -> MediaSample:
    return MediaSample(
        sample_id=record["sample_id"],
        edit_type=record["edit_type"],
        instruction=record["instruction"],
        source=load_media(root, record["source"]),
        target=load_media(root, record["target"]),
        record=record,
    )


def write_gates(root: Path, rows: Sequence[dict]) -> Path:
    """Persist gate outcomes in stream order, canonical bytes."""
    ordered = sorted(rows, key=lambda r: r["stream_id"])
    data = "".join(canonical_json(r) + "\n" for r in ordered).encode("utf-8")
    path = Path(root) / GATES_NAME
    _atomic_write(path, data)
    return path


def read_gates(root: Path) -> list[dict]:
    path = Path(root) / GATES_NAME
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text("utf-8").splitlines() if line]


def dataset_stats(root: Path) -> dict:
    """Counts by edit type and canvas, plus gate tallies when present."""
    by_type: dict[str, int] = {}
    by_canvas: dict[str, int] = {}
    total = 0
    for record in iter_records(root):
        total += 1
        by_type[record["edit_type"]] = by_type.get(record["edit_type"], 0) + 1
        canvas = record["bin_or_shape"]
        if "frame_count" in canvas:
            key = f"{canvas['frame_count']}f-{canvas['width']}x{canvas['height']}"
        else:
            key = f"{canvas['width']}x{canvas['height']}"
        by_canvas[key] = by_canvas.get(key, 0) + 1
    stats = {
        "records": total,
        "by_edit_type": dict(sorted(by_type.items())),
        "by_canvas": dict(sorted(by_canvas.items())),
    }
    gates = read_gates(root)
    if gates:
        statuses: dict[str, int] = {}
        for row in gates:
            statuses[row["status"]] = statuses.get(row["status"], 0) + 1
        stats["gates"] = dict(sorted(statuses.items()))
    return stats


def _check_media_entry(root: Path, entry: dict, problems: list, expect_hw, frame_count):
    paths = entry["frames"] if "frames" in entry else [entry["path"]]
    if frame_count and len(paths) != frame_count:
        problems.append(f"frame count mismatch: {len(paths)} != {frame_count}")
    for rel in paths:
        path = root / rel
        if not path.exists():
            problems.append(f"missing media: {rel}")
            continue
        data = path.read_bytes()
        if media_name(data) != path.name:
            problems.append(f"media digest mismatch: {rel}")
            continue
        pixels = decode_png(data)
        if pixels.shape[:2] != expect_hw:
            problems.append(
                f"media dims {pixels.shape[1]}x{pixels.shape[0]} != expected "
                f"{expect_hw[1]}x{expect_hw[0]}: {rel}"
            )


def verify_dataset(
    root: Path,
    store: AssetIndex | None = None,
    *,
    replay: int = 0,
    replay_seed: int = 0,
) -> dict:
    """Structural and, optionally, generative verification.

    Checks shard coverage, record ordering, media digests and dimensions,
    and manifest digests. With `replay` > 0 and a store, regenerates that
    many randomly chosen samples from provenance and compares media digests.
    """
    root = Path(root)
    problems: list[str] = []
    run = load_run_config(root)
    config = GenerationConfig.from_snapshot(run["config"])
    plans = shard_plans(run["count"], config.shard_size)

    if store is not None and store.digest != run["config"]["store_digest"]:
        problems.append("asset store digest does not match run config")

    all_records: list[dict] = []
    for plan in plans:
        path = root / SHARD_DIR / plan.name / SHARD_MANIFEST
        if not path.exists():
            problems.append(f"missing shard: {plan.name}")
            continue
        records = [
            json.loads(line)
            for line in path.read_text("utf-8").splitlines()
            if line
        ]
        expected = plan.stop - plan.start
        if len(records) != expected:
            problems.append(
                f"shard {plan.name} has {len(records)} records, expected {expected}"
            )
        for offset, record in enumerate(records):
            stream = plan.start + offset
            if record["stream_id"] != stream:
                problems.append(
                    f"shard {plan.name} row {offset}: stream {record['stream_id']} != {stream}"
                )
                continue
            canvas = record["bin_or_shape"]
            expect_hw = (canvas["height"], canvas["width"])
            frames = canvas.get("frame_count", 0)
            _check_media_entry(root, record["source"], problems, expect_hw, frames)
            _check_media_entry(root, record["target"], problems, expect_hw, frames)
            all_records.append(record)

    manifest_path = root / MANIFEST_NAME
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text("utf-8"))
        for shard_entry in manifest.get("shards", []):
            path = root / shard_entry["path"]
            if not path.exists():
                problems.append(f"manifest names missing shard: {shard_entry['path']}")
                continue
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            if digest != shard_entry["digest"]:
                problems.append(f"shard digest drift: {shard_entry['path']}")
    else:
        problems.append("dataset not finalized (missing manifest.json)")

    replayed = 0
    if replay > 0 and store is not None and all_records:
        gen = RngState(replay_seed, 0).generator()
        picks = gen.choice(len(all_records), size=min(replay, len(all_records)), replace=False)
        for i in sorted(int(x) for x in picks):
            record = all_records[i]
            sample = regenerate(record["provenance"], store, config)
            for entry, media in (
                (record["source"], sample.source),
                (record["target"], sample.target),
            ):
                paths = entry["frames"] if "frames" in entry else [entry["path"]]
                frames = media if isinstance(media, list) else [media]
                for rel, frame in zip(paths, frames):
                    if media_name(encode_png(frame)) != Path(rel).name:
                        problems.append(f"replay digest mismatch: {record['sample_id']} {rel}")
            replayed += 1

    return {
        "ok": not problems,
        "records": len(all_records),
        "expected": run["count"],
        "replayed": replayed,
        "problems": problems,
    }

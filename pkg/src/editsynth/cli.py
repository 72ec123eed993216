"""Command-line interface.

Every subcommand prints exactly one JSON result line on stdout; progress
and diagnostics go to stderr. Exit codes: 0 success, 1 domain failure,
2 usage error (argparse's own convention).

Defaults marked "env" fall back to EDITSYNTH_<NAME> environment variables;
argparse runs string defaults through each option's type converter, so the
fallbacks get the same validation as typed flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .assets import AssetError, AssetIndex, IngestError, ingest
from .compositor import draw_label
from .dataset import (
    DatasetError,
    dataset_stats,
    generate_dataset,
    iter_records,
    load_run_config,
    open_sample,
    verify_dataset,
    write_gates,
)
from .layout import LayoutError, make_bins
from .mixing import run_property_suite
from .pngio import write_png
from .quality import (
    HttpJudge,
    JudgeError,
    QualityError,
    StubJudge,
    filter_dataset,
)
from .synth.generators import (
    EDIT_TYPES,
    IMAGE_EDIT_TYPES,
    VIDEO_EDIT_TYPES,
    GenerationConfig,
    SynthError,
)

ENV_PREFIX = "EDITSYNTH_"

_DOMAIN_ERRORS = (
    AssetError,
    IngestError,
    DatasetError,
    LayoutError,
    QualityError,
    JudgeError,
    SynthError,
    FileNotFoundError,
    ValueError,
)


def _env(name: str, fallback):
    return os.environ.get(ENV_PREFIX + name, fallback)


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")
    sys.stdout.flush()


def _note(message: str) -> None:
    sys.stderr.write(message + "\n")
    sys.stderr.flush()


def _parse_edit_types(value: str) -> tuple[str, ...]:
    value = value.strip()
    if value == "all":
        return EDIT_TYPES
    if value == "image":
        return IMAGE_EDIT_TYPES
    if value == "video":
        return VIDEO_EDIT_TYPES
    types = tuple(t.strip() for t in value.split(",") if t.strip())
    unknown = [t for t in types if t not in EDIT_TYPES]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown edit types: {', '.join(unknown)}")
    return types


def _parse_size(value: str) -> tuple[int, int]:
    try:
        w, h = value.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected WxH, got {value!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="editsynth",
        description="Collage-based synthetic editing-data engine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a media manifest and build an asset index")
    p.add_argument("manifest", type=Path, help="JSONL manifest of candidate assets")
    p.add_argument(
        "--min-confidence",
        type=float,
        default=_env("MIN_CONFIDENCE", "0.9"),
        help="caption confidence cutoff (env EDITSYNTH_MIN_CONFIDENCE, default 0.9)",
    )
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate an edit-pair dataset")
    synth_sub = p.add_subparsers(dest="modality", required=True)
    for modality in ("image", "video"):
        q = synth_sub.add_parser(modality, help=f"generate {modality} edit pairs")
        q.add_argument("--store", type=Path, required=True, help="asset index directory")
        q.add_argument("--out", type=Path, required=True, help="dataset root to create")
        q.add_argument("--count", type=int, required=True, help="number of samples")
        q.add_argument(
            "--seed",
            type=int,
            default=_env("SEED", "0"),
            help="base seed (env EDITSYNTH_SEED, default 0)",
        )
        q.add_argument(
            "--workers",
            type=int,
            default=_env("WORKERS", "1"),
            help="parallel shard workers (env EDITSYNTH_WORKERS, default 1)",
        )
        q.add_argument(
            "--shard-size",
            type=int,
            default=_env("SHARD_SIZE", "1000"),
            help="samples per shard (env EDITSYNTH_SHARD_SIZE, default 1000)",
        )
        q.add_argument(
            "--edit-types",
            type=_parse_edit_types,
            default=None,
            help="comma list, or one of: all, image, video",
        )
        if modality == "image":
            q.add_argument("--bin", type=int, default=None, help="fix one aspect bin (0..30)")
            q.add_argument(
                "--canvas", type=_parse_size, default=None, help="fix canvas WxH (overrides --bin)"
            )
        else:
            q.add_argument("--frames", type=int, default=None, help="fix the frame count")
            q.add_argument(
                "--size", type=_parse_size, default=None, help="fix resolution WxH (with --frames)"
            )
        q.set_defaults(func=cmd_synth, modality=modality)

    p = sub.add_parser("filter", help="run quality gates over an existing dataset")
    p.add_argument("dataset", type=Path)
    p.add_argument("--store", type=Path, default=None, help="asset index (unused by gates; reserved)")
    p.add_argument(
        "--ssim-threshold",
        type=float,
        default=_env("SSIM_THRESHOLD", "0.5"),
        help="reject pairs below this (env EDITSYNTH_SSIM_THRESHOLD, default 0.5)",
    )
    p.add_argument("--ssim-upper", type=float, default=None, help="reject near-identical pairs above this")
    p.add_argument(
        "--judge-url",
        default=_env("JUDGE_URL", ""),
        help="instruction-judge endpoint; empty uses the deterministic stub "
        "(env EDITSYNTH_JUDGE_URL)",
    )
    p.add_argument("--pass-rate", type=float, default=1.0, help="stub judge pass rate")
    p.add_argument("--parallelism", type=int, default=1, help="judge calls in flight per video")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("inspect", help="render a labeled source/target preview")
    p.add_argument("dataset", type=Path)
    p.add_argument("--sample", required=True, help="sample id or stream id")
    p.add_argument("--out", type=Path, required=True, help="preview PNG path")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("stats", help="dataset composition summary")
    p.add_argument("dataset", type=Path)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bins", help="aspect-bin utilities")
    bins_sub = p.add_subparsers(dest="bins_command", required=True)
    q = bins_sub.add_parser("list", help="print the aspect-bin table")
    q.set_defaults(func=cmd_bins_list)

    p = sub.add_parser("verify-mix", help="run the attention-mixing invariant suite")
    p.add_argument("--seed", type=int, default=_env("SEED", "0"))
    p.set_defaults(func=cmd_verify_mix)

    p = sub.add_parser("verify-dataset", help="check dataset integrity, optionally replay samples")
    p.add_argument("dataset", type=Path)
    p.add_argument("--store", type=Path, default=None, help="asset index for replay checks")
    p.add_argument("--replay", type=int, default=0, help="samples to regenerate and compare")
    p.add_argument("--replay-seed", type=int, default=0)
    p.set_defaults(func=cmd_verify_dataset)

    return parser


def cmd_ingest(args) -> int:
    index = ingest(args.manifest, min_confidence=args.min_confidence)
    _emit(
        {
            "ok": True,
            "index": str(Path(index.root) / "index.json"),
            "counts": index.counts,
            "rejected": len(index.rejections),
            "digest": index.digest,
        }
    )
    return 0


def _progress_printer(total: int):
    state = {"done": 0}

    def tick(_stream: int) -> None:
        state["done"] += 1
        if state["done"] % 25 == 0 or state["done"] == total:
            _note(f"generated {state['done']}/{total}")

    return tick


def cmd_synth(args) -> int:
    store = AssetIndex.open(args.store)
    if args.modality == "image":
        edit_types = args.edit_types or IMAGE_EDIT_TYPES
        canvas = args.canvas
        bin_index = args.bin if canvas is None else None
        video_shape = None
    else:
        edit_types = args.edit_types or VIDEO_EDIT_TYPES
        canvas = None
        bin_index = None
        if (args.frames is None) != (args.size is None):
            raise SynthError("--frames and --size must be given together")
        video_shape = None
        if args.frames is not None:
            video_shape = (args.frames, args.size[0], args.size[1])
    config = GenerationConfig(
        seed=args.seed,
        edit_types=edit_types,
        canvas=canvas,
        bin_index=bin_index,
        video_shape=video_shape,
        shard_size=args.shard_size,
    )
    result = generate_dataset(
        store,
        config,
        args.count,
        args.out,
        workers=args.workers,
        progress=_progress_printer(args.count),
    )
    _emit(
        {
            "ok": True,
            "dataset": str(args.out),
            "count": result["count"],
            "written": result["written"],
            "shards": len(result["manifest"]["shards"]),
        }
    )
    return 0


def cmd_filter(args) -> int:
    root = args.dataset
    load_run_config(root)
    judge = (
        HttpJudge(args.judge_url)
        if args.judge_url
        else StubJudge(pass_rate=args.pass_rate)
    )
    rows: list[dict] = []
    accepted = 0
    records = list(iter_records(root))
    batch = 16
    for lo in range(0, len(records), batch):
        chunk = [open_sample(root, r) for r in records[lo : lo + batch]]
        results, rejections = filter_dataset(
            chunk,
            ssim_threshold=args.ssim_threshold,
            judge=judge,
            ssim_upper=args.ssim_upper,
            judge_parallelism=args.parallelism,
        )
        rejected_ids = {r.sample_id: r for r in rejections}
        for sample in chunk:
            if sample.sample_id in rejected_ids:
                rec = rejected_ids[sample.sample_id]
                rows.append(
                    {
                        "stream_id": sample.record["stream_id"],
                        "sample_id": sample.sample_id,
                        "status": rec.status,
                        "stage": rec.stage,
                        **({"ssim": rec.score} if rec.score is not None else {}),
                    }
                )
            else:
                result = next(r for r in results if r.sample.sample_id == sample.sample_id)
                accepted += 1
                rows.append(
                    {
                        "stream_id": sample.record["stream_id"],
                        "sample_id": sample.sample_id,
                        "status": "accepted",
                        "ssim": result.ssim,
                        "judge": list(result.verdicts),
                    }
                )
        _note(f"gated {min(lo + batch, len(records))}/{len(records)}")
    path = write_gates(root, rows)
    statuses: dict[str, int] = {}
    for row in rows:
        statuses[row["status"]] = statuses.get(row["status"], 0) + 1
    _emit({"ok": True, "gates": str(path), "total": len(rows), "statuses": statuses})
    return 0


def _preview_pairs(sample):
    if sample.is_video:
        last = len(sample.source) - 1
        picks = sorted({0, last // 2, last})
        return [(sample.source[i], sample.target[i], f"frame {i}") for i in picks]
    return [(sample.source, sample.target, "image")]


def _preview_grid(sample) -> np.ndarray:
    pairs = _preview_pairs(sample)
    gutter, header = 4, 16
    tile_h = max(p[0].shape[0] for p in pairs)
    tile_w = max(p[0].shape[1] for p in pairs)
    rows = len(pairs)
    grid = np.full(
        (header + rows * (tile_h + gutter), 2 * tile_w + gutter, 3), 24, dtype=np.uint8
    )
    draw_label(grid, "SOURCE", (230, 230, 230), (2, 2), 10)
    draw_label(grid, "TARGET", (230, 230, 230), (tile_w + gutter + 2, 2), 10)
    for row, (src, tgt, tag) in enumerate(pairs):
        top = header + row * (tile_h + gutter)
        grid[top : top + src.shape[0], : src.shape[1]] = src
        grid[top : top + tgt.shape[0], tile_w + gutter : tile_w + gutter + tgt.shape[1]] = tgt
        draw_label(grid, tag, (255, 255, 0), (2, top + 2), 10)
    return grid


def cmd_inspect(args) -> int:
    root = args.dataset
    wanted = args.sample
    record = None
    for candidate in iter_records(root):
        if candidate["sample_id"] == wanted or str(candidate["stream_id"]) == wanted:
            record = candidate
            break
    if record is None:
        raise DatasetError(f"sample not found: {wanted}")
    sample = open_sample(root, record)
    grid = _preview_grid(sample)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_png(args.out, grid)
    _emit(
        {
            "ok": True,
            "sample_id": record["sample_id"],
            "edit_type": record["edit_type"],
            "instruction": record["instruction"],
            "bin_or_shape": record["bin_or_shape"],
            "preview": str(args.out),
        }
    )
    return 0


def cmd_stats(args) -> int:
    stats = dataset_stats(args.dataset)
    _emit({"ok": True, **stats})
    return 0


def cmd_bins_list(args) -> int:
    rows = [
        {"index": b.index, "aspect": round(b.aspect, 6), "width": b.width, "height": b.height}
        for b in make_bins()
    ]
    _emit({"ok": True, "bins": rows})
    return 0


def cmd_verify_mix(args) -> int:
    rows = run_property_suite(seed=args.seed)
    for row in rows:
        mark = "pass" if row["passed"] else "FAIL"
        _note(f"[{mark}] {row['name']} ({row['seconds']:.3f}s)")
    ok = all(row["passed"] for row in rows)
    _emit(
        {
            "ok": ok,
            "checks": [
                {"name": r["name"], "passed": r["passed"], "seconds": round(r["seconds"], 4)}
                for r in rows
            ],
        }
    )
    return 0 if ok else 1


def cmd_verify_dataset(args) -> int:
    store = AssetIndex.open(args.store) if args.store else None
    report = verify_dataset(
        args.dataset, store, replay=args.replay, replay_seed=args.replay_seed
    )
    _emit({"ok": report["ok"], **{k: v for k, v in report.items() if k != "ok"}})
    return 0 if report["ok"] else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DOMAIN_ERRORS as exc:
        _emit({"ok": False, "error": f"{type(exc).__name__}: {exc}"})
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""On-disk dataset tests: sharding, byte determinism, resume, verification.

The oracles here are structural rather than numeric: independently computed
tree hashes, sha256 digests recomputed by the test, and fault injections
that must surface as specific errors or problem strings.
"""

import hashlib
import json
import shutil
from pathlib import Path

import numpy as np
import pytest
from conftest import tree_hashes

from editsynth.dataset import (
    DATASET_FORMAT,
    DatasetError,
    Shard,
    ShardPlan,
    canonical_json,
    dataset_stats,
    finalize_dataset,
    generate_dataset,
    generate_shard,
    init_dataset,
    iter_records,
    load_manifest,
    load_media,
    load_run_config,
    media_name,
    open_sample,
    read_gates,
    shard_plans,
    verify_dataset,
    write_gates,
)
from editsynth.layout import RngState
from editsynth.pngio import decode_png, encode_png
from editsynth.sampledata import StorePlan, build_store
from editsynth.synth.generators import GenerationConfig, generate_sample, regenerate

COUNT = 12
SHARD_SIZE = 5


def make_config(**overrides) -> GenerationConfig:
    base = dict(
        seed=5,
        edit_types=("remove", "add", "color", "text_add"),
        canvas=(256, 256),
        shard_size=SHARD_SIZE,
    )
    base.update(overrides)
    return GenerationConfig(**base)


def sample_at(store, config, stream):
    return generate_sample(store, RngState(config.seed, stream), config)


def copy_tree(src: Path, tmp_path: Path) -> Path:
    dst = tmp_path / "copy"
    shutil.copytree(src, dst)
    return dst


def rewrite_record(root: Path, shard_name: str, row: int, mutate) -> dict:
    """Edit one record in place and refresh manifest digests."""
    path = root / "shards" / shard_name / "manifest.jsonl"
    records = [json.loads(line) for line in path.read_text("utf-8").splitlines() if line]
    mutate(records[row])
    path.write_bytes("".join(canonical_json(r) + "\n" for r in records).encode("utf-8"))
    finalize_dataset(root)
    return records[row]


@pytest.fixture(scope="module")
def config():
    return make_config()


@pytest.fixture(scope="module")
def ds(store, config, tmp_path_factory):
    """A complete 12-sample dataset; mutating tests must copy it first."""
    root = tmp_path_factory.mktemp("ds")
    result = generate_dataset(store, config, COUNT, root)
    return root, result


@pytest.fixture(scope="module")
def video_ds(store, tmp_path_factory):
    root = tmp_path_factory.mktemp("vds")
    config = GenerationConfig(
        seed=6, edit_types=("video_add",), video_shape=(73, 416, 416), shard_size=1
    )
    generate_dataset(store, config, 1, root)
    return root, config


class TestCanonicalJson:
    def test_sorts_keys_and_strips_whitespace(self):
        assert canonical_json({"b": 1, "a": [2, 3]}) == '{"a":[2,3],"b":1}'

    def test_escapes_non_ascii(self):
        assert canonical_json({"s": "café"}) == '{"s":"caf\\u00e9"}'

    def test_round_trips(self):
        obj = {"nested": {"z": None, "a": [1.5, "x"]}, "n": 7}
        assert json.loads(canonical_json(obj)) == obj


class TestMediaName:
    def test_content_addressed_short_digest(self):
        data = b"not really a png"
        assert media_name(data) == hashlib.sha256(data).hexdigest()[:16] + ".png"

    def test_distinct_content_distinct_names(self):
        assert media_name(b"a") != media_name(b"b")


class TestShardPlans:
    def test_partitions_count_into_half_open_ranges(self):
        plans = shard_plans(10, 3)
        assert [(p.index, p.start, p.stop) for p in plans] == [
            (0, 0, 3),
            (1, 3, 6),
            (2, 6, 9),
            (3, 9, 10),
        ]

    def test_exact_multiple_has_no_stub_shard(self):
        plans = shard_plans(6, 3)
        assert [(p.start, p.stop) for p in plans] == [(0, 3), (3, 6)]

    def test_zero_count_is_empty(self):
        assert shard_plans(0, 10) == []

    def test_name_is_zero_padded(self):
        assert ShardPlan(0, 0, 5).name == "00000"
        assert ShardPlan(123, 0, 1).name == "00123"

    def test_rejects_negative_count(self):
        with pytest.raises(DatasetError):
            shard_plans(-1, 5)

    def test_rejects_non_positive_shard_size(self):
        with pytest.raises(DatasetError):
            shard_plans(5, 0)


class TestShardIO:
    def test_append_then_reopen_counts_records(self, store, config, tmp_path):
        plan = ShardPlan(0, 0, 3)
        with Shard(tmp_path, plan) as shard:
            shard.append_sample(sample_at(store, config, 0))
            shard.append_sample(sample_at(store, config, 1))
            assert shard.written == 2
            assert not shard.complete
        reopened = Shard(tmp_path, plan)
        assert reopened.written == 2
        assert reopened.next_stream == 2
        assert [r["stream_id"] for r in reopened.records()] == [0, 1]

    def test_record_schema(self, store, config, tmp_path):
        sample = sample_at(store, config, 0)
        with Shard(tmp_path, ShardPlan(0, 0, 1)) as shard:
            record = shard.append_sample(sample)
        assert set(record) == {
            "sample_id",
            "edit_type",
            "instruction",
            "seed",
            "stream_id",
            "bin_or_shape",
            "source",
            "target",
            "provenance",
        }
        assert record["seed"] == config.seed
        assert record["stream_id"] == 0
        assert record["bin_or_shape"] == record["provenance"]["canvas"]
        assert record["sample_id"] == sample.sample_id

    def test_rejects_out_of_order_stream(self, store, config, tmp_path):
        with Shard(tmp_path, ShardPlan(0, 0, 3)) as shard:
            with pytest.raises(DatasetError, match="expected 0, got 1"):
                shard.append_sample(sample_at(store, config, 1))

    def test_media_files_are_deduplicated(self, tmp_path):
        shard = Shard(tmp_path, ShardPlan(0, 0, 1))
        png = encode_png(np.zeros((4, 4, 4), dtype=np.uint8))
        first = shard.write_media(png)
        second = shard.write_media(png)
        assert first == second
        files = list((tmp_path / "shards" / "00000").glob("*.png"))
        assert len(files) == 1
        assert files[0].read_bytes() == png

    def test_torn_tail_is_truncated_on_reopen(self, store, config, tmp_path):
        plan = ShardPlan(0, 0, 3)
        with Shard(tmp_path, plan) as shard:
            shard.append_sample(sample_at(store, config, 0))
            shard.append_sample(sample_at(store, config, 1))
        path = shard.manifest_path
        intact = path.read_bytes()
        with open(path, "ab") as fh:
            fh.write(b'{"sample_id": "half-written')
        reopened = Shard(tmp_path, plan)
        assert reopened.written == 2
        assert path.read_bytes() == intact

    def test_corrupt_complete_line_raises(self, store, config, tmp_path):
        plan = ShardPlan(0, 0, 3)
        with Shard(tmp_path, plan) as shard:
            shard.append_sample(sample_at(store, config, 0))
        with open(shard.manifest_path, "ab") as fh:
            fh.write(b"not json at all\n")
        with pytest.raises(DatasetError, match="record 1 is corrupt"):
            Shard(tmp_path, plan)

    def test_interrupted_shard_resumes_bit_identical(self, store, config, tmp_path):
        plan = ShardPlan(0, 0, 3)
        full = tmp_path / "full"
        resumed = tmp_path / "resumed"
        generate_shard(store, config, plan, full)
        with Shard(resumed, plan) as shard:
            shard.append_sample(sample_at(store, config, 0))
        generate_shard(store, config, plan, resumed)
        assert tree_hashes(full) == tree_hashes(resumed)

    def test_generate_shard_reports_progress(self, store, config, tmp_path):
        seen = []
        result = generate_shard(store, config, ShardPlan(0, 0, 2), tmp_path, progress=seen.append)
        assert result == {"index": 0, "records": 2}
        assert seen == [0, 1]


class TestRunConfig:
    def test_init_writes_snapshot(self, store, config, tmp_path):
        payload = init_dataset(tmp_path, config, 7, store.digest)
        assert payload["format"] == DATASET_FORMAT
        assert payload["count"] == 7
        assert payload["config"]["store_digest"] == store.digest
        assert load_run_config(tmp_path) == payload

    def test_reinit_with_same_settings_is_idempotent(self, store, config, tmp_path):
        first = init_dataset(tmp_path, config, 7, store.digest)
        again = init_dataset(tmp_path, config, 7, store.digest)
        assert again == first

    def test_count_drift_refused(self, store, config, tmp_path):
        init_dataset(tmp_path, config, 7, store.digest)
        with pytest.raises(DatasetError, match="config drift"):
            init_dataset(tmp_path, config, 8, store.digest)

    def test_config_drift_refused(self, store, config, tmp_path):
        init_dataset(tmp_path, config, 7, store.digest)
        with pytest.raises(DatasetError, match="config drift"):
            init_dataset(tmp_path, make_config(seed=99), 7, store.digest)

    def test_store_drift_refused(self, store, config, tmp_path):
        init_dataset(tmp_path, config, 7, store.digest)
        with pytest.raises(DatasetError, match="config drift"):
            init_dataset(tmp_path, config, 7, "0" * 64)

    def test_missing_run_config(self, tmp_path):
        with pytest.raises(DatasetError, match="not a dataset"):
            load_run_config(tmp_path)

    def test_unsupported_format(self, tmp_path):
        (tmp_path / "run_config.json").write_text('{"format": "other/format@9"}')
        with pytest.raises(DatasetError, match="unsupported dataset format"):
            load_run_config(tmp_path)


class TestGenerateDataset:
    def test_summary_and_layout(self, ds):
        root, result = ds
        assert result["complete"] is True
        assert result["written"] == COUNT
        assert result["count"] == COUNT
        assert (root / "run_config.json").exists()
        assert (root / "manifest.json").exists()
        shard_dirs = sorted(p.name for p in (root / "shards").iterdir())
        assert shard_dirs == ["00000", "00001", "00002"]

    def test_stream_ids_cover_count_in_order(self, ds):
        root, _ = ds
        assert [r["stream_id"] for r in iter_records(root)] == list(range(COUNT))

    def test_worker_count_does_not_change_bytes(self, ds, store, config, tmp_path):
        root, _ = ds
        parallel = tmp_path / "parallel"
        result = generate_dataset(store, config, COUNT, parallel, workers=2)
        assert result["complete"] is True
        assert tree_hashes(parallel) == tree_hashes(root)

    def test_interrupt_then_resume_is_bit_identical(self, ds, store, config, tmp_path):
        root, _ = ds
        partial = tmp_path / "partial"
        stopped = generate_dataset(store, config, COUNT, partial, stop_after=4)
        assert stopped == {"count": COUNT, "written": 4, "complete": False}
        assert not (partial / "manifest.json").exists()
        resumed = generate_dataset(store, config, COUNT, partial)
        assert resumed["complete"] is True
        assert resumed["written"] == COUNT - 4
        assert tree_hashes(partial) == tree_hashes(root)

    def test_rerun_on_complete_dataset_writes_nothing(self, ds, store, config, tmp_path):
        root, _ = ds
        clone = copy_tree(root, tmp_path)
        before = tree_hashes(clone)
        result = generate_dataset(store, config, COUNT, clone)
        assert result["written"] == 0
        assert result["complete"] is True
        assert tree_hashes(clone) == before

    def test_media_paths_are_content_addressed(self, ds):
        root, _ = ds
        for record in iter_records(root):
            for entry in (record["source"], record["target"]):
                paths = entry["frames"] if "frames" in entry else [entry["path"]]
                for rel in paths:
                    path = root / rel
                    assert media_name(path.read_bytes()) == path.name


class TestFinalize:
    def test_manifest_digests_match_contents(self, ds):
        root, _ = ds
        manifest = load_manifest(root)
        assert manifest["format"] == DATASET_FORMAT
        assert manifest["records"] == COUNT
        assert [s["records"] for s in manifest["shards"]] == [5, 5, 2]
        for entry in manifest["shards"]:
            data = (root / entry["path"]).read_bytes()
            assert hashlib.sha256(data).hexdigest() == entry["digest"]

    def test_missing_shard_manifest_fails(self, ds, tmp_path):
        root, _ = ds
        clone = copy_tree(root, tmp_path)
        (clone / "shards" / "00001" / "manifest.jsonl").unlink()
        with pytest.raises(DatasetError, match="missing shard manifest"):
            finalize_dataset(clone)

    def test_load_manifest_requires_finalize(self, store, config, tmp_path):
        init_dataset(tmp_path, config, 3, store.digest)
        with pytest.raises(DatasetError, match="not finalized"):
            load_manifest(tmp_path)


class TestRecordAccess:
    def test_open_sample_decodes_media(self, ds):
        root, _ = ds
        record = next(iter_records(root))
        sample = open_sample(root, record)
        assert sample.sample_id == record["sample_id"]
        assert sample.instruction == record["instruction"]
        assert not sample.is_video
        assert sample.source.shape == (256, 256, 3)
        assert sample.target.shape == (256, 256, 3)
        assert sample.source.dtype == np.uint8

    def test_load_media_frames_form(self, ds):
        root, _ = ds
        record = next(iter_records(root))
        rel = record["source"]["path"]
        frames = load_media(root, {"frames": [rel, rel]})
        assert isinstance(frames, list) and len(frames) == 2
        assert np.array_equal(frames[0], frames[1])

    def test_stored_media_matches_provenance_replay(self, ds, store, config):
        root, _ = ds
        record = next(iter_records(root))
        sample = regenerate(record["provenance"], store, config)
        assert media_name(encode_png(sample.source)) == Path(record["source"]["path"]).name
        assert media_name(encode_png(sample.target)) == Path(record["target"]["path"]).name


class TestGates:
    ROWS = [
        {"stream_id": 2, "sample_id": "c", "status": "rejected", "stage": "ssim", "ssim": 0.41},
        {"stream_id": 0, "sample_id": "a", "status": "accepted", "ssim": 0.9, "judge": [True]},
        {"stream_id": 1, "sample_id": "b", "status": "deferred", "stage": "judge"},
    ]

    def test_round_trip_sorted_by_stream(self, tmp_path):
        write_gates(tmp_path, self.ROWS)
        rows = read_gates(tmp_path)
        assert [r["stream_id"] for r in rows] == [0, 1, 2]
        assert {r["sample_id"] for r in rows} == {"a", "b", "c"}

    def test_bytes_are_canonical(self, tmp_path):
        path = write_gates(tmp_path, self.ROWS)
        lines = path.read_text("utf-8").splitlines()
        assert lines == [canonical_json(r) for r in sorted(self.ROWS, key=lambda r: r["stream_id"])]

    def test_input_order_does_not_change_bytes(self, tmp_path):
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        a = write_gates(tmp_path / "a", self.ROWS).read_bytes()
        b = write_gates(tmp_path / "b", list(reversed(self.ROWS))).read_bytes()
        assert a == b

    def test_read_gates_missing_file(self, tmp_path):
        assert read_gates(tmp_path) == []


class TestStats:
    def test_counts_by_type_and_canvas(self, ds, config):
        root, _ = ds
        stats = dataset_stats(root)
        assert stats["records"] == COUNT
        assert sum(stats["by_edit_type"].values()) == COUNT
        assert set(stats["by_edit_type"]) <= set(config.edit_types)
        assert stats["by_canvas"] == {"256x256": COUNT}
        assert "gates" not in stats

    def test_gate_tallies_when_present(self, ds, tmp_path):
        root, _ = ds
        clone = copy_tree(root, tmp_path)
        write_gates(
            clone,
            [
                {"stream_id": 0, "sample_id": "a", "status": "accepted"},
                {"stream_id": 1, "sample_id": "b", "status": "accepted"},
                {"stream_id": 2, "sample_id": "c", "status": "rejected"},
            ],
        )
        assert dataset_stats(clone)["gates"] == {"accepted": 2, "rejected": 1}

    def test_video_canvas_key(self, video_ds):
        root, _ = video_ds
        stats = dataset_stats(root)
        assert stats["by_canvas"] == {"73f-416x416": 1}
        assert stats["by_edit_type"] == {"video_add": 1}


class TestVideoDataset:
    def test_records_reference_frame_lists(self, video_ds):
        root, _ = video_ds
        record = next(iter_records(root))
        assert len(record["source"]["frames"]) == 73
        assert len(record["target"]["frames"]) == 73

    def test_open_sample_decodes_frames(self, video_ds):
        root, _ = video_ds
        sample = open_sample(root, next(iter_records(root)))
        assert sample.is_video
        assert len(sample.source) == 73
        assert sample.source[0].shape == (416, 416, 3)

    def test_verify_with_replay(self, video_ds, store):
        root, _ = video_ds
        report = verify_dataset(root, store, replay=1, replay_seed=0)
        assert report["ok"], report["problems"]
        assert report["replayed"] == 1

    def test_dropped_frame_detected(self, video_ds, tmp_path):
        root, _ = video_ds
        clone = copy_tree(root, tmp_path)
        rewrite_record(clone, "00000", 0, lambda r: r["source"]["frames"].pop())
        report = verify_dataset(clone)
        assert any("frame count mismatch: 72 != 73" in p for p in report["problems"])


class TestVerify:
    def test_clean_dataset_passes(self, ds, store):
        root, _ = ds
        report = verify_dataset(root, store)
        assert report == {
            "ok": True,
            "records": COUNT,
            "expected": COUNT,
            "replayed": 0,
            "problems": [],
        }

    def test_replay_regenerates_samples(self, ds, store):
        root, _ = ds
        report = verify_dataset(root, store, replay=3, replay_seed=1)
        assert report["ok"], report["problems"]
        assert report["replayed"] == 3

    def test_missing_media_reported(self, ds, tmp_path):
        root, _ = ds
        clone = copy_tree(root, tmp_path)
        record = next(iter_records(clone))
        (clone / record["source"]["path"]).unlink()
        report = verify_dataset(clone)
        assert not report["ok"]
        assert any("missing media" in p for p in report["problems"])

    def test_tampered_media_reported(self, ds, tmp_path):
        root, _ = ds
        clone = copy_tree(root, tmp_path)
        record = next(iter_records(clone))
        path = clone / record["source"]["path"]
        path.write_bytes(encode_png(np.zeros((256, 256, 4), dtype=np.uint8)))
        report = verify_dataset(clone)
        assert any("media digest mismatch" in p for p in report["problems"])

    def test_wrong_dimensions_reported(self, ds, tmp_path):
        root, _ = ds
        clone = copy_tree(root, tmp_path)
        tiny = encode_png(np.zeros((8, 8, 4), dtype=np.uint8))
        rel = f"shards/00000/{media_name(tiny)}"
        (clone / rel).write_bytes(tiny)
        rewrite_record(clone, "00000", 0, lambda r: r["source"].update(path=rel))
        report = verify_dataset(clone)
        assert any("media dims 8x8" in p for p in report["problems"])

    def test_stream_id_tamper_reported(self, ds, tmp_path):
        root, _ = ds
        clone = copy_tree(root, tmp_path)
        rewrite_record(clone, "00000", 0, lambda r: r.update(stream_id=99))
        report = verify_dataset(clone)
        assert any("stream 99 != 0" in p for p in report["problems"])

    def test_shard_digest_drift_reported(self, ds, tmp_path):
        root, _ = ds
        clone = copy_tree(root, tmp_path)
        with open(clone / "shards" / "00002" / "manifest.jsonl", "ab") as fh:
            fh.write(b"\n")
        report = verify_dataset(clone)
        assert any("shard digest drift" in p for p in report["problems"])

    def test_unfinalized_dataset_reported(self, store, config, tmp_path):
        generate_dataset(store, config, COUNT, tmp_path, stop_after=4)
        report = verify_dataset(tmp_path)
        assert not report["ok"]
        assert any("not finalized" in p for p in report["problems"])
        assert any("missing shard" in p for p in report["problems"])
        assert any("expected 5" in p for p in report["problems"])

    def test_store_mismatch_reported(self, ds, tmp_path):
        root, _ = ds
        other = build_store(tmp_path / "other", StorePlan(seed=12))
        report = verify_dataset(root, other)
        assert any("store digest" in p for p in report["problems"])

    def test_replay_catches_provenance_stream_tamper(self, ds, store, tmp_path):
        # Replay guards the generative inputs: repoint one record's
        # provenance at another stream of the same edit type and the
        # regenerated media no longer matches the stored digests.
        root, _ = ds
        clone = copy_tree(root, tmp_path)
        records = list(iter_records(clone))
        first_of = {}
        pair = None
        for i, record in enumerate(records):
            j = first_of.setdefault(record["edit_type"], i)
            if j != i:
                pair = (j, i)
                break
        assert pair is not None
        donor, victim = pair

        def repoint(record):
            record["provenance"]["stream_id"] = records[donor]["stream_id"]

        rewrite_record(clone, f"{victim // SHARD_SIZE:05d}", victim % SHARD_SIZE, repoint)
        report = verify_dataset(clone, store, replay=COUNT, replay_seed=0)
        assert any("replay digest mismatch" in p for p in report["problems"])

    def test_replay_without_store_is_skipped(self, ds):
        root, _ = ds
        report = verify_dataset(root, replay=5)
        assert report["replayed"] == 0
        assert report["ok"]

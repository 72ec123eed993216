"""Quality gate: multi-scale SSIM scoring plus instruction-judge clients.

The SSIM path is self-contained numpy/scipy (11x11 Gaussian window, sigma
1.5, five-scale pyramid with 2x2 mean downsampling); the judge path speaks
a small JSON-over-HTTP protocol with a deterministic offline stub for
air-gapped runs.
"""

from __future__ import annotations

import base64
import hashlib
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import requests
from scipy.ndimage import correlate1d

from .pngio import encode_png

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
DATA_RANGE = 255.0
C1 = (0.01 * DATA_RANGE) ** 2
C2 = (0.03 * DATA_RANGE) ** 2
SCALE_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
LUMA_COEFFS = (0.299, 0.587, 0.114)

DEFAULT_SSIM_THRESHOLD = 0.5
VIDEO_SAMPLED_FRAMES = 5
VIDEO_MIN_PASSES = 4


class QualityError(ValueError):
    """Raised on malformed scoring inputs (dimension or length mismatches)."""


class JudgeError(RuntimeError):
    """Protocol-level judge failure (malformed response)."""


class JudgeUnavailableError(JudgeError):
    """Judge endpoint unreachable after retries; sample should be deferred."""


def _gaussian_window() -> np.ndarray:
    offsets = np.arange(WINDOW_SIZE, dtype=np.float64) - (WINDOW_SIZE - 1) / 2.0
    kernel = np.exp(-(offsets**2) / (2.0 * WINDOW_SIGMA**2))
    return kernel / kernel.sum()

_WINDOW = _gaussian_window()
_HALF = WINDOW_SIZE // 2


def to_luminance(pixels: np.ndarray) -> np.ndarray:
    """Float luminance grid from an RGB or already-gray pixel grid."""
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr @ np.asarray(LUMA_COEFFS, dtype=np.float64)
    raise QualityError(f"expected (H, W) or (H, W, 3) pixels, got shape {arr.shape}")


def _windowed_mean(grid: np.ndarray) -> np.ndarray:
    """Separable Gaussian window means over all fully valid positions."""
    smoothed = correlate1d(grid, _WINDOW, axis=0, mode="constant")
    smoothed = correlate1d(smoothed, _WINDOW, axis=1, mode="constant")
    return smoothed[_HALF:-_HALF, _HALF:-_HALF]


def _ssim_and_cs(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    mu1 = _windowed_mean(a)
    mu2 = _windowed_mean(b)
    var1 = _windowed_mean(a * a) - mu1 * mu1
    var2 = _windowed_mean(b * b) - mu2 * mu2
    cov = _windowed_mean(a * b) - mu1 * mu2
    cs_map = (2.0 * cov + C2) / (var1 + var2 + C2)
    lum_map = (2.0 * mu1 * mu2 + C1) / (mu1 * mu1 + mu2 * mu2 + C1)
    return float((lum_map * cs_map).mean()), float(cs_map.mean())


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    la = to_luminance(a)
    lb = to_luminance(b)
    if la.shape != lb.shape:
        raise QualityError(f"dimension mismatch: {la.shape} vs {lb.shape}")
    if min(la.shape) < WINDOW_SIZE:
        raise QualityError(
            f"inputs must be at least {WINDOW_SIZE}x{WINDOW_SIZE}, got {la.shape}"
        )
    return la, lb


def ssim_single_scale(a: np.ndarray, b: np.ndarray) -> float:
    """Mean single-scale SSIM over all valid 11x11 Gaussian windows."""
    la, lb = _check_pair(a, b)
    score, _ = _ssim_and_cs(la, lb)
    return score


def _downsample2(grid: np.ndarray) -> np.ndarray:
    h2, w2 = grid.shape[0] // 2, grid.shape[1] // 2
    return grid[: h2 * 2, : w2 * 2].reshape(h2, 2, w2, 2).mean(axis=(1, 3))


def usable_scale_count(height: int, width: int) -> int:
    """How many pyramid levels keep the minimum side at window width."""
    side = min(height, width)
    count = 0
    while count < len(SCALE_WEIGHTS) and side >= WINDOW_SIZE:
        count += 1
        side //= 2
    return count


@dataclass(frozen=True)
class SsimReport:
    per_scale_scores: tuple[float, ...]
    composite: float
    verdict: str
    threshold_used: float
    frame_scores: tuple[float, ...] | None = None

    def __post_init__(self):
        want = "accept" if self.composite >= self.threshold_used else "reject"
        if self.verdict != want:
            raise QualityError(
                f"verdict {self.verdict!r} inconsistent with composite "
                f"{self.composite} at threshold {self.threshold_used}"
            )


def _report(per_scale, composite, threshold, frame_scores=None) -> SsimReport:
    verdict = "accept" if composite >= threshold else "reject"
    return SsimReport(
        per_scale_scores=tuple(per_scale),
        composite=float(composite),
        verdict=verdict,
        threshold_used=float(threshold),
        frame_scores=None if frame_scores is None else tuple(frame_scores),
    )


def ms_ssim(
    a: np.ndarray, b: np.ndarray, threshold: float = DEFAULT_SSIM_THRESHOLD
) -> SsimReport:
    """Multi-scale SSIM of one pixel-grid pair.

    Contrast-structure terms accumulate at every scale, luminance enters
    only at the coarsest; small inputs drop coarse scales and the weights
    renormalize. The composite clamps negative factors to zero, so it lies
    in [0, 1].
    """
    la, lb = _check_pair(a, b)
    scales = usable_scale_count(*la.shape)
    weights = np.asarray(SCALE_WEIGHTS[:scales], dtype=np.float64)
    weights = weights / weights.sum()

    per_scale: list[float] = []
    composite = 1.0
    for level in range(scales):
        ssim_val, cs_val = _ssim_and_cs(la, lb)
        score = ssim_val if level == scales - 1 else cs_val
        per_scale.append(score)
        composite *= max(score, 0.0) ** weights[level]
        if level < scales - 1:
            la = _downsample2(la)
            lb = _downsample2(lb)
    return _report(per_scale, min(max(composite, 0.0), 1.0), threshold)


def sample_frame_indices(frame_count: int) -> tuple[int, ...]:
    """Five uniformly spread frame indices, endpoints inclusive."""
    if frame_count < VIDEO_SAMPLED_FRAMES:
        raise QualityError(
            f"need at least {VIDEO_SAMPLED_FRAMES} frames, got {frame_count}"
        )
    step = (frame_count - 1) / (VIDEO_SAMPLED_FRAMES - 1)
    return tuple(int(math.floor(i * step + 0.5)) for i in range(VIDEO_SAMPLED_FRAMES))


def ms_ssim_video(
    source_frames: Sequence[np.ndarray],
    target_frames: Sequence[np.ndarray],
    threshold: float = DEFAULT_SSIM_THRESHOLD,
) -> SsimReport:
    """Mean MS-SSIM over five sampled frame pairs of an aligned clip pair."""
    if len(source_frames) != len(target_frames):
        raise QualityError(
            f"frame count mismatch: {len(source_frames)} vs {len(target_frames)}"
        )
    indices = sample_frame_indices(len(source_frames))
    frame_scores = [
        ms_ssim(source_frames[i], target_frames[i], threshold).composite for i in indices
    ]
    return _report((), float(np.mean(frame_scores)), threshold, frame_scores)


@dataclass(frozen=True)
class JudgeVerdict:
    passed: bool
    reasons: tuple[str, ...]
    frame_index: int | None = None

    def __post_init__(self):
        if not self.passed and not self.reasons:
            raise QualityError("failing verdict must carry at least one reason")


class StubJudge:
    """Deterministic offline judge.

    Verdicts come from an explicit table when provided (bool per sample, or
    a list of bools per sampled frame), otherwise from a keyed hash of the
    sample id compared against pass_rate.
    """

    needs_media = False

    def __init__(self, pass_rate: float = 1.0, table: dict | None = None, salt: str = "stub"):
        if not 0.0 <= pass_rate <= 1.0:
            raise ValueError(f"pass rate must lie in [0, 1], got {pass_rate}")
        self.pass_rate = pass_rate
        self.table = dict(table or {})
        self.salt = salt

    def _hash_pass(self, sample_id: str, frame_index: int | None) -> bool:
        key = f"{self.salt}:{sample_id}:{frame_index}".encode()
        draw = int.from_bytes(hashlib.sha256(key).digest()[:8], "big") / 2.0**64
        return draw < self.pass_rate

    def judge(
        self,
        sample_id: str,
        instruction: str,
        source_media: bytes | None,
        target_media: bytes | None,
        frame_index: int | None = None,
    ) -> JudgeVerdict:
        entry = self.table.get(sample_id)
        if entry is None:
            passed = self._hash_pass(sample_id, frame_index)
        elif isinstance(entry, (list, tuple)):
            if frame_index is None:
                raise QualityError("per-frame verdict table used for an image sample")
            passed = bool(entry[frame_index])
        else:
            passed = bool(entry)
        reasons = () if passed else ("stub verdict",)
        return JudgeVerdict(passed=passed, reasons=reasons, frame_index=frame_index)


class HttpJudge:
    """JSON-over-HTTP judge client with exponential-backoff retries.

    Wire protocol: POST {sample_id, instruction, source_media, target_media,
    frame_index?} with base64 PNG media; response {pass: bool,
    reasons: [str]}.
    """

    needs_media = True

    def __init__(
        self,
        url: str,
        timeout: float = 10.0,
        retries: int = 3,
        backoff: float = 0.5,
        session: requests.Session | None = None,
    ):
        self.url = url
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.session = session or requests.Session()

    def judge(
        self,
        sample_id: str,
        instruction: str,
        source_media: bytes | None,
        target_media: bytes | None,
        frame_index: int | None = None,
    ) -> JudgeVerdict:
        payload = {
            "sample_id": sample_id,
            "instruction": instruction,
            "source_media": base64.b64encode(source_media or b"").decode(),
            "target_media": base64.b64encode(target_media or b"").decode(),
        }
        if frame_index is not None:
            payload["frame_index"] = frame_index

        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = self.session.post(self.url, json=payload, timeout=self.timeout)
                if response.status_code >= 500:
                    raise requests.ConnectionError(f"server error {response.status_code}")
                body = response.json()
                if "pass" not in body:
                    raise JudgeError(f"malformed judge response: {body!r}")
                passed = bool(body["pass"])
                reasons = tuple(str(r) for r in body.get("reasons", ()))
                if not passed and not reasons:
                    reasons = ("judge rejected without reasons",)
                return JudgeVerdict(passed=passed, reasons=reasons, frame_index=frame_index)
            except (requests.ConnectionError, requests.Timeout, ValueError) as exc:
                last_error = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * 2**attempt)
        raise JudgeUnavailableError(f"judge unavailable after {self.retries + 1} attempts: {last_error}")


def judge_pair(sample, client, parallelism: int = 1) -> list[JudgeVerdict]:
    """One verdict for an image pair; five per-frame verdicts for a video."""
    needs_media = getattr(client, "needs_media", True)

    def encode(frame) -> bytes | None:
        return encode_png(frame) if needs_media else None

    if not sample.is_video:
        return [
            client.judge(
                sample.sample_id, sample.instruction, encode(sample.source), encode(sample.target)
            )
        ]

    indices = sample_frame_indices(len(sample.source))

    def one(frame_index: int) -> JudgeVerdict:
        return client.judge(
            sample.sample_id,
            sample.instruction,
            encode(sample.source[frame_index]),
            encode(sample.target[frame_index]),
            frame_index=frame_index,
        )

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(one, indices))
    return [one(i) for i in indices]


def aggregate_video_verdicts(verdicts: Sequence[JudgeVerdict]) -> bool:
    """A clip passes when at least four of the five frame verdicts pass."""
    if len(verdicts) != VIDEO_SAMPLED_FRAMES:
        raise QualityError(f"expected {VIDEO_SAMPLED_FRAMES} verdicts, got {len(verdicts)}")
    return sum(v.passed for v in verdicts) >= VIDEO_MIN_PASSES


@dataclass(frozen=True)
class RejectionRecord:
    sample_id: str
    stage: str  # "ssim" | "judge"
    score: float | None = None
    verdicts: tuple[bool, ...] | None = None
    status: str = "rejected"  # "rejected" | "deferred"

    def to_dict(self) -> dict:
        record = {"sample_id": self.sample_id, "stage": self.stage, "status": self.status}
        if self.score is not None:
            record["score"] = self.score
        if self.verdicts is not None:
            record["verdicts"] = list(self.verdicts)
        return record


@dataclass(frozen=True)
class GateResult:
    sample: object
    ssim: float
    verdicts: tuple[bool, ...]

    @property
    def gate_dict(self) -> dict:
        return {"ssim": self.ssim, "judge": list(self.verdicts)}


def filter_dataset(
    samples,
    ssim_threshold: float = DEFAULT_SSIM_THRESHOLD,
    judge=None,
    ssim_upper: float | None = None,
    judge_parallelism: int = 1,
) -> tuple[list[GateResult], list[RejectionRecord]]:
    """Apply the SSIM gate then the judge gate, sample by sample.

    Decisions are per-sample, so the accepted set is independent of input
    order. Judge outages defer samples (logged, not accepted). The optional
    upper bound rejects near-identical pairs.
    """
    judge = judge if judge is not None else StubJudge()
    accepted: list[GateResult] = []
    rejections: list[RejectionRecord] = []
    for sample in samples:
        if sample.is_video:
            report = ms_ssim_video(sample.source, sample.target, ssim_threshold)
        else:
            report = ms_ssim(sample.source, sample.target, ssim_threshold)
        if report.composite < ssim_threshold or (
            ssim_upper is not None and report.composite > ssim_upper
        ):
            rejections.append(
                RejectionRecord(sample.sample_id, "ssim", score=report.composite)
            )
            continue
        try:
            verdicts = judge_pair(sample, judge, parallelism=judge_parallelism)
        except JudgeError:
            rejections.append(
                RejectionRecord(sample.sample_id, "judge", status="deferred")
            )
            continue
        flags = tuple(v.passed for v in verdicts)
        passed = aggregate_video_verdicts(verdicts) if sample.is_video else flags[0]
        if not passed:
            rejections.append(
                RejectionRecord(sample.sample_id, "judge", verdicts=flags)
            )
            continue
        accepted.append(GateResult(sample=sample, ssim=report.composite, verdicts=flags))
    return accepted, rejections

"""Reference kernels for paired source/target generation with K/V mixing.

A small seeded transformer generates a source/target pair in lockstep: the
target branch's attention reads the source branch's same-layer noise-token
keys and values for the first n_mix_layers blocks, while the source branch
never sees the target. Two condition-injection schemes are modeled
structurally: token concatenation with early drop, and channel
concatenation folded in before the first block. Everything is plain
float64 numpy so the invariants are checkable to tight tolerances.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

VARIANTS = ("joint_mmdit", "self_attention")
INJECTION_SCHEMES = ("token_concat_early_drop", "channel_concat")

# Mixing depth defaults per modality; the self-attention variant mixes only
# its first two blocks.
DEFAULT_MIX_LAYERS = {"image": 18, "video": 13, "self_attention": 2}

_LN_EPS = 1e-6


class MixingError(ValueError):
    """Raised on malformed token blocks, layer indices, or configs."""


def _as_matrix(name: str, value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2:
        raise MixingError(f"{name} must be a 2-D (tokens, width) array")
    return arr


def _split_heads(x: np.ndarray, head_count: int) -> np.ndarray:
    tokens, width = x.shape
    head_dim = width // head_count
    return x.reshape(tokens, head_count, head_dim).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    head_count, tokens, head_dim = x.shape
    return x.transpose(1, 0, 2).reshape(tokens, head_count * head_dim)


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def mixed_attention(
    q,
    k_tar,
    v_tar,
    k_src=None,
    v_src=None,
    head_count: int = 1,
    return_weights: bool = False,
):
    """Scaled dot-product attention over target keys/values extended with
    source keys/values.

    Keys and values are token-concatenated per stream; logits scale by
    1/sqrt(head_dim). With no source rows this is exactly plain attention.
    """
    q = _as_matrix("q", q)
    k_tar = _as_matrix("k_tar", k_tar)
    v_tar = _as_matrix("v_tar", v_tar)
    if q.shape[0] == 0:
        raise MixingError("empty query")
    width = q.shape[1]
    if k_tar.shape[1] != width or v_tar.shape[1] != width:
        raise MixingError("query/key/value widths disagree")
    if k_tar.shape[0] != v_tar.shape[0]:
        raise MixingError("target key/value token counts disagree")
    if head_count < 1 or width % head_count:
        raise MixingError(f"width {width} not divisible into {head_count} heads")

    if k_src is not None and np.size(k_src):
        k_src = _as_matrix("k_src", k_src)
        v_src = _as_matrix("v_src", v_src)
        if k_src.shape[1] != width or v_src.shape[1] != width:
            raise MixingError("source key/value widths disagree with query")
        if k_src.shape[0] != v_src.shape[0]:
            raise MixingError("source key/value token counts disagree")
        keys = np.concatenate([k_tar, k_src], axis=0)
        values = np.concatenate([v_tar, v_src], axis=0)
    else:
        keys, values = k_tar, v_tar

    head_dim = width // head_count
    qh = _split_heads(q, head_count)
    kh = _split_heads(keys, head_count)
    vh = _split_heads(values, head_count)
    weights = _softmax_rows(qh @ kh.transpose(0, 2, 1) / np.sqrt(head_dim))
    out = _merge_heads(weights @ vh)
    if return_weights:
        return out, weights
    return out


def self_mixed_attention(
    q_noise,
    k_noise_tar,
    v_noise_tar,
    k_noise_src=None,
    v_noise_src=None,
    head_count: int = 1,
    return_weights: bool = False,
):
    """Noise-only mixing for self-attention backbones.

    Queries come from the target noise stream alone; text tokens never
    enter this path. The arithmetic is the shared mixed-attention kernel.
    """
    return mixed_attention(
        q_noise,
        k_noise_tar,
        v_noise_tar,
        k_noise_src,
        v_noise_src,
        head_count=head_count,
        return_weights=return_weights,
    )


@dataclass(frozen=True)
class MixingConfig:
    """How many leading blocks of the target branch read source K/V."""

    n_mix_layers: int
    variant: str = "joint_mmdit"
    total_layers: int | None = None
    shared_init_noise: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise MixingError(f"unknown variant: {self.variant!r}")
        if self.n_mix_layers < 0:
            raise MixingError("n_mix_layers must be >= 0")
        if self.total_layers is not None and self.n_mix_layers > self.total_layers:
            raise MixingError(
                f"n_mix_layers {self.n_mix_layers} exceeds total layers {self.total_layers}"
            )


def default_mixing_config(modality: str = "image") -> MixingConfig:
    if modality not in DEFAULT_MIX_LAYERS:
        raise MixingError(f"unknown modality: {modality!r}")
    variant = "self_attention" if modality == "self_attention" else "joint_mmdit"
    return MixingConfig(n_mix_layers=DEFAULT_MIX_LAYERS[modality], variant=variant)


@dataclass(frozen=True)
class InjectionConfig:
    scheme: str = "token_concat_early_drop"
    drop_after_block: int = 4

    def __post_init__(self):
        if self.scheme not in INJECTION_SCHEMES:
            raise MixingError(f"unknown injection scheme: {self.scheme!r}")
        if self.drop_after_block < 0:
            raise MixingError("drop_after_block must be >= 0")


@dataclass(frozen=True)
class TokenBlockInput:
    noise_tokens: np.ndarray
    text_tokens: np.ndarray
    cond_tokens: np.ndarray | None = None
    head_count: int = 4

    def __post_init__(self):
        noise = _as_matrix("noise_tokens", self.noise_tokens)
        text = _as_matrix("text_tokens", self.text_tokens)
        object.__setattr__(self, "noise_tokens", noise)
        object.__setattr__(self, "text_tokens", text)
        width = noise.shape[1]
        if text.shape[1] != width:
            raise MixingError("noise and text widths disagree")
        if self.cond_tokens is not None:
            cond = _as_matrix("cond_tokens", self.cond_tokens)
            if cond.shape[1] != width:
                raise MixingError("condition token width disagrees")
            object.__setattr__(self, "cond_tokens", cond)
        if self.head_count < 1 or width % self.head_count:
            raise MixingError(f"width {width} not divisible into {self.head_count} heads")

    @property
    def width(self) -> int:
        return self.noise_tokens.shape[1]

    @property
    def head_dim(self) -> int:
        return self.width // self.head_count


def _layer_norm(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + _LN_EPS)


@dataclass(frozen=True)
class BlockWeights:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    # Cross-attention projections; present only on the self_attention variant.
    cq: np.ndarray | None = None
    ck: np.ndarray | None = None
    cv: np.ndarray | None = None
    co: np.ndarray | None = None


class ToyModel:
    """Seeded-random transformer used by the reference suite.

    Forward passes are pure; two models built with the same constructor
    arguments are numerically identical.
    """

    def __init__(
        self,
        depth: int = 8,
        width: int = 64,
        head_count: int = 4,
        variant: str = "joint_mmdit",
        model_seed: int = 0,
    ):
        if variant not in VARIANTS:
            raise MixingError(f"unknown variant: {variant!r}")
        if width % head_count:
            raise MixingError(f"width {width} not divisible into {head_count} heads")
        if depth < 1:
            raise MixingError("depth must be >= 1")
        self.depth = depth
        self.width = width
        self.head_count = head_count
        self.variant = variant
        self.model_seed = model_seed

        gen = np.random.Generator(
            np.random.Philox(key=np.array([model_seed % 2**64, 0xB10C], dtype=np.uint64))
        )
        scale = 1.0 / np.sqrt(width)
        hidden = 2 * width

        def mat(rows, cols):
            return gen.normal(0.0, scale, size=(rows, cols))

        blocks = []
        for _ in range(depth):
            cross = {}
            if variant == "self_attention":
                cross = {
                    "cq": mat(width, width),
                    "ck": mat(width, width),
                    "cv": mat(width, width),
                    "co": mat(width, width),
                }
            blocks.append(
                BlockWeights(
                    wq=mat(width, width),
                    wk=mat(width, width),
                    wv=mat(width, width),
                    wo=mat(width, width),
                    w1=mat(width, hidden),
                    w2=mat(hidden, width),
                    **cross,
                )
            )
        self.blocks = tuple(blocks)
        self.channel_fuse = gen.normal(0.0, 1.0 / np.sqrt(2 * width), size=(2 * width, width))


def fuse_condition_channels(
    model: ToyModel, noise_tokens: np.ndarray, cond_tokens: np.ndarray
) -> np.ndarray:
    """Channel-concat injection: width-wise concat projected back to model
    width before block 1. Condition tokens never exist past this call."""
    noise = _as_matrix("noise_tokens", noise_tokens)
    cond = _as_matrix("cond_tokens", cond_tokens)
    if noise.shape != cond.shape:
        raise MixingError(
            f"channel fusion needs matching token grids, got {noise.shape} vs {cond.shape}"
        )
    if noise.shape[1] != model.width:
        raise MixingError("token width disagrees with model width")
    return np.concatenate([noise, cond], axis=1) @ model.channel_fuse


def _attention_sublayer(
    weights: BlockWeights,
    seq: np.ndarray,
    head_count: int,
    mix_kv: tuple[np.ndarray, np.ndarray] | None,
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    normed = _layer_norm(seq)
    q = normed @ weights.wq
    k = normed @ weights.wk
    v = normed @ weights.wv
    # The cache exposes every row of this sublayer's K/V to the paired
    # branch. Caching all rows (not just the latent ones) means a branch
    # pair with equal captions mixes exact duplicates, which cancels in
    # the softmax; partial caches would re-weight latent vs caption rows.
    kv_cache = (k, v)
    k_src, v_src = mix_kv if mix_kv is not None else (None, None)
    attended = mixed_attention(q, k, v, k_src, v_src, head_count=head_count)
    return seq + attended @ weights.wo, kv_cache


def _ffn_sublayer(weights: BlockWeights, seq: np.ndarray) -> np.ndarray:
    return seq + np.tanh(_layer_norm(seq) @ weights.w1) @ weights.w2


def _joint_block(
    weights: BlockWeights,
    seq: np.ndarray,
    head_count: int,
    mix_kv,
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    seq, kv_cache = _attention_sublayer(weights, seq, head_count, mix_kv)
    return _ffn_sublayer(weights, seq), kv_cache


def _split_block(
    weights: BlockWeights,
    noise: np.ndarray,
    text: np.ndarray,
    head_count: int,
    mix_kv,
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    noise, kv_cache = _attention_sublayer(weights, noise, head_count, mix_kv)
    normed = _layer_norm(noise)
    text_normed = _layer_norm(text)
    cross = mixed_attention(
        normed @ weights.cq,
        text_normed @ weights.ck,
        text_normed @ weights.cv,
        head_count=head_count,
    )
    noise = noise + cross @ weights.co
    return _ffn_sublayer(weights, noise), kv_cache


def block_forward(
    model: ToyModel,
    layer: int,
    block_input: TokenBlockInput,
    mix_kv: tuple[np.ndarray, np.ndarray] | None = None,
    injection: InjectionConfig | None = None,
    trace: list | None = None,
) -> TokenBlockInput:
    """One transformer block; layer is 1-based (first block is layer 1).

    Under token-concat injection, condition tokens join the attended
    sequence through the drop boundary and their updates are discarded at
    it; supplying them past the boundary (or under channel concat) is an
    error. Noise and text token counts are always preserved.
    """
    if model.variant != "joint_mmdit":
        raise MixingError("block_forward models joint backbones; use paired_generate")
    if not 1 <= layer <= model.depth:
        raise MixingError(f"layer must lie in [1, {model.depth}], got {layer}")

    cond = block_input.cond_tokens
    active_cond = None
    if injection is None:
        if cond is not None:
            raise MixingError("condition tokens supplied without an injection scheme")
    elif injection.scheme == "channel_concat":
        if cond is not None:
            raise MixingError("channel-concat blocks never see condition tokens")
    else:
        if layer <= injection.drop_after_block:
            if cond is None:
                raise MixingError(f"condition tokens required at layer {layer}")
            active_cond = cond
        elif cond is not None:
            raise MixingError(f"condition tokens supplied past the drop boundary (layer {layer})")

    noise = block_input.noise_tokens
    text = block_input.text_tokens
    noise_len = noise.shape[0]
    cond_len = 0 if active_cond is None else active_cond.shape[0]

    parts = [noise] + ([active_cond] if active_cond is not None else []) + [text]
    seq = np.concatenate(parts, axis=0)
    if trace is not None:
        trace.append(
            {
                "layer": layer,
                "seq_len": seq.shape[0],
                "cond_len": cond_len,
                "mixed": mix_kv is not None,
            }
        )
    weights = model.blocks[layer - 1]
    seq, _ = _joint_block(weights, seq, block_input.head_count, mix_kv)

    noise_out = seq[:noise_len]
    text_out = seq[noise_len + cond_len:]
    cond_out = None
    if active_cond is not None and layer < injection.drop_after_block:
        cond_out = seq[noise_len:noise_len + cond_len]
    return TokenBlockInput(
        noise_tokens=noise_out,
        text_tokens=text_out,
        cond_tokens=cond_out,
        head_count=block_input.head_count,
    )


def run_injected(
    model: ToyModel,
    noise_tokens: np.ndarray,
    text_tokens: np.ndarray,
    cond_tokens: np.ndarray,
    injection: InjectionConfig,
    trace: list | None = None,
) -> np.ndarray:
    """Drive all blocks under one injection scheme; returns final noise tokens."""
    cond = None
    noise = _as_matrix("noise_tokens", noise_tokens)
    if injection.scheme == "channel_concat":
        noise = fuse_condition_channels(model, noise, cond_tokens)
    else:
        cond = cond_tokens if injection.drop_after_block >= 1 else None
    state = TokenBlockInput(
        noise_tokens=noise,
        text_tokens=text_tokens,
        cond_tokens=cond,
        head_count=model.head_count,
    )
    for layer in range(1, model.depth + 1):
        state = block_forward(model, layer, state, injection=injection, trace=trace)
    return state.noise_tokens


def caption_embedding(seed: int, tokens: int = 4, width: int = 64) -> np.ndarray:
    """Seeded stand-in for a caption encoder output."""
    gen = np.random.Generator(
        np.random.Philox(key=np.array([seed % 2**64, 0xCA9], dtype=np.uint64))
    )
    return gen.normal(0.0, 1.0, size=(tokens, width))


def _initial_noise(noise_seed: int, branch: int, tokens: int, width: int) -> np.ndarray:
    gen = np.random.Generator(
        np.random.Philox(key=np.array([noise_seed % 2**64, 0xA0 + branch], dtype=np.uint64))
    )
    return gen.normal(0.0, 1.0, size=(tokens, width))


def _velocity(
    model: ToyModel,
    noise: np.ndarray,
    text: np.ndarray,
    mix_cache: Sequence[tuple[np.ndarray, np.ndarray]] | None = None,
    n_mix: int = 0,
    collect: bool = False,
    mixed_layers: list | None = None,
) -> tuple[np.ndarray, list]:
    """One full forward pass; optionally collects per-layer attention K/V."""
    cache: list = []
    noise_len = noise.shape[0]
    x = noise
    t = text
    for layer in range(1, model.depth + 1):
        weights = model.blocks[layer - 1]
        mix_kv = None
        if mix_cache is not None and layer <= n_mix:
            mix_kv = mix_cache[layer - 1]
            if mixed_layers is not None:
                mixed_layers.append(layer)
        if model.variant == "joint_mmdit":
            seq = np.concatenate([x, t], axis=0)
            seq, kv_cache = _joint_block(weights, seq, model.head_count, mix_kv)
            x = seq[:noise_len]
            t = seq[noise_len:]
        else:
            x, kv_cache = _split_block(weights, x, t, model.head_count, mix_kv)
        if collect:
            cache.append(kv_cache)
    return _layer_norm(x), cache


def generate(
    model: ToyModel,
    caption_emb: np.ndarray,
    steps: int,
    noise_seed: int,
    noise_tokens: int = 16,
) -> np.ndarray:
    """Solo Euler sampling from t=1 to t=0 in equal steps."""
    if steps < 1:
        raise MixingError("steps must be >= 1")
    text = _as_matrix("caption_emb", caption_emb)
    x = _initial_noise(noise_seed, 0, noise_tokens, model.width)
    dt = 1.0 / steps
    for _ in range(steps):
        velocity, _ = _velocity(model, x, text)
        x = x - dt * velocity
    return x


def paired_generate(
    model: ToyModel,
    src_caption_emb: np.ndarray,
    tar_caption_emb: np.ndarray,
    mix: MixingConfig,
    steps: int,
    noise_seed: int,
    noise_tokens: int = 16,
    debug: dict | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Generate a (source, target) latent pair in lockstep.

    Both branches share the initial noise when configured; at every step
    the source branch runs first and the target branch's first
    n_mix_layers blocks extend their K/V with the source's same-layer
    noise K/V. Information never flows target -> source.
    """
    if steps < 1:
        raise MixingError("steps must be >= 1")
    if mix.variant != model.variant:
        raise MixingError(f"config variant {mix.variant!r} does not match model {model.variant!r}")
    total = mix.total_layers if mix.total_layers is not None else model.depth
    if total != model.depth:
        raise MixingError(f"config total_layers {total} does not match model depth {model.depth}")
    if mix.n_mix_layers > model.depth:
        raise MixingError(
            f"n_mix_layers {mix.n_mix_layers} exceeds model depth {model.depth}"
        )

    src_text = _as_matrix("src_caption_emb", src_caption_emb)
    tar_text = _as_matrix("tar_caption_emb", tar_caption_emb)
    src_x = _initial_noise(noise_seed, 0, noise_tokens, model.width)
    tar_x = src_x.copy() if mix.shared_init_noise else _initial_noise(
        noise_seed, 1, noise_tokens, model.width
    )
    if debug is not None:
        debug["initial_src"] = src_x.copy()
        debug["initial_tar"] = tar_x.copy()
        debug["mixed_layers"] = set()

    dt = 1.0 / steps
    for _ in range(steps):
        mixed: list = []
        src_v, cache = _velocity(model, src_x, src_text, collect=True)
        tar_v, _ = _velocity(
            model, tar_x, tar_text, mix_cache=cache, n_mix=mix.n_mix_layers,
            mixed_layers=mixed,
        )
        if debug is not None:
            debug["mixed_layers"].update(mixed)
        src_x = src_x - dt * src_v
        tar_x = tar_x - dt * tar_v
    return src_x, tar_x


def run_property_suite(seed: int = 0) -> list[dict]:
    """Exercise every mixing invariant; returns per-check rows with timings."""
    rows: list[dict] = []
    gen = np.random.default_rng(seed)

    def check(name: str):
        def wrap(fn):
            start = time.perf_counter()
            try:
                fn()
                ok, detail = True, ""
            except AssertionError as exc:
                ok, detail = False, str(exc)
            rows.append(
                {
                    "name": name,
                    "passed": ok,
                    "seconds": time.perf_counter() - start,
                    "detail": detail,
                }
            )
        return wrap

    @check("attention rows sum to 1")
    def _():
        for heads in (1, 2, 4):
            q = gen.normal(size=(6, 8))
            _, w = mixed_attention(
                q, gen.normal(size=(5, 8)), gen.normal(size=(5, 8)),
                gen.normal(size=(3, 8)), gen.normal(size=(3, 8)),
                head_count=heads, return_weights=True,
            )
            assert np.allclose(w.sum(axis=-1), 1.0, atol=1e-6), f"heads={heads}"

    @check("empty source reduces to plain attention exactly")
    def _():
        q = gen.normal(size=(4, 8))
        k = gen.normal(size=(5, 8))
        v = gen.normal(size=(5, 8))
        plain = mixed_attention(q, k, v)
        empty = mixed_attention(q, k, v, np.zeros((0, 8)), np.zeros((0, 8)))
        assert np.array_equal(plain, empty), "empty-source path diverged"

    @check("duplicated keys/values leave output unchanged")
    def _():
        for heads in (1, 2, 4):
            q = gen.normal(size=(4, 8))
            k = gen.normal(size=(5, 8))
            v = gen.normal(size=(5, 8))
            out = mixed_attention(q, k, v, head_count=heads)
            dup = mixed_attention(q, k, v, k, v, head_count=heads)
            assert np.abs(out - dup).max() <= 1e-6, f"heads={heads}"

    @check("two orthogonal keys average their values")
    def _():
        for heads in (1, 2, 4):
            d = 2 * heads
            q = np.zeros((1, d))
            k = np.vstack([np.ones((1, d)), -np.ones((1, d))])
            v = np.vstack([np.tile([1.0, 0.0], heads), np.tile([0.0, 1.0], heads)])
            out = mixed_attention(q, k[:1], v[:1], k[1:], v[1:], head_count=heads)
            assert np.abs(out - np.tile([0.5, 0.5], heads)).max() <= 1e-9, f"heads={heads}"

    @check("source branch is isolated from the target")
    def _():
        model = ToyModel(depth=4, width=32, head_count=4, model_seed=3)
        mix = MixingConfig(n_mix_layers=4)
        src_emb = caption_embedding(11, width=32)
        tar_emb = caption_embedding(12, width=32)
        src_a, _ = paired_generate(model, src_emb, tar_emb, mix, steps=3, noise_seed=5)
        solo = generate(model, src_emb, steps=3, noise_seed=5)
        assert np.array_equal(src_a, solo), "source drifted when paired"

    @check("mixing stops exactly at n_mix_layers")
    def _():
        model = ToyModel(depth=6, width=32, head_count=2, model_seed=1)
        debug: dict = {}
        paired_generate(
            model, caption_embedding(1, width=32), caption_embedding(2, width=32),
            MixingConfig(n_mix_layers=3), steps=2, noise_seed=9, debug=debug,
        )
        assert debug["mixed_layers"] == {1, 2, 3}, f"read layers {debug['mixed_layers']}"

    @check("shared initial noise is bit-identical across branches")
    def _():
        model = ToyModel(depth=2, width=32, head_count=2, model_seed=2)
        debug: dict = {}
        paired_generate(
            model, caption_embedding(3, width=32), caption_embedding(4, width=32),
            MixingConfig(n_mix_layers=2), steps=1, noise_seed=21, debug=debug,
        )
        assert np.array_equal(debug["initial_src"], debug["initial_tar"])

    @check("token-concat drops condition tokens after the boundary")
    def _():
        model = ToyModel(depth=8, width=32, head_count=2, model_seed=4)
        trace: list = []
        run_injected(
            model,
            gen.normal(size=(16, 32)), gen.normal(size=(8, 32)), gen.normal(size=(16, 32)),
            InjectionConfig(scheme="token_concat_early_drop", drop_after_block=4),
            trace=trace,
        )
        lens = [row["seq_len"] for row in trace]
        assert lens == [40] * 4 + [24] * 4, f"sequence lengths {lens}"

    @check("channel-concat never materializes condition tokens")
    def _():
        model = ToyModel(depth=8, width=32, head_count=2, model_seed=4)
        trace: list = []
        run_injected(
            model,
            gen.normal(size=(16, 32)), gen.normal(size=(8, 32)), gen.normal(size=(16, 32)),
            InjectionConfig(scheme="channel_concat"),
            trace=trace,
        )
        assert all(row["cond_len"] == 0 for row in trace), "condition tokens appeared"
        assert [row["seq_len"] for row in trace] == [24] * 8

    @check("identical captions and shared noise give identical branches")
    def _():
        for n_mix, depth in ((0, 8), (2, 8), (13, 18), (18, 18)):
            model = ToyModel(depth=depth, width=64, head_count=4, model_seed=6)
            emb = caption_embedding(7)
            src, tar = paired_generate(
                model, emb, emb, MixingConfig(n_mix_layers=n_mix), steps=3, noise_seed=13
            )
            assert np.abs(src - tar).max() <= 1e-6, f"n_mix={n_mix}"

    @check("zero mixing layers equals solo generation exactly")
    def _():
        model = ToyModel(depth=8, width=64, head_count=4, model_seed=6)
        emb_src = caption_embedding(7)
        emb_tar = caption_embedding(8)
        _, tar = paired_generate(
            model, emb_src, emb_tar, MixingConfig(n_mix_layers=0), steps=3, noise_seed=13
        )
        solo = generate(model, emb_tar, steps=3, noise_seed=13)
        assert np.array_equal(tar, solo), "unmixed target diverged from solo run"

    @check("full mixing makes the target depend on the source caption")
    def _():
        model = ToyModel(depth=8, width=64, head_count=4, model_seed=6)
        tar_emb = caption_embedding(8)
        mix = MixingConfig(n_mix_layers=model.depth)
        _, tar_a = paired_generate(model, caption_embedding(7), tar_emb, mix, 3, 13)
        _, tar_b = paired_generate(model, caption_embedding(9), tar_emb, mix, 3, 13)
        assert np.abs(tar_a - tar_b).max() > 1e-6, "source caption had no effect"

    return rows

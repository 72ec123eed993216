"""Attention mixing: kernel arithmetic, block plumbing, paired sampling."""

import math

import numpy as np
import pytest

from editsynth.mixing import (
    DEFAULT_MIX_LAYERS,
    INJECTION_SCHEMES,
    VARIANTS,
    InjectionConfig,
    MixingConfig,
    MixingError,
    TokenBlockInput,
    ToyModel,
    block_forward,
    caption_embedding,
    default_mixing_config,
    fuse_condition_channels,
    generate,
    mixed_attention,
    paired_generate,
    run_injected,
    run_property_suite,
    self_mixed_attention,
)


def manual_attention(q, keys, values, head_count=1):
    """Reference attention: per-head loops with explicit softmax."""
    q = np.asarray(q, dtype=np.float64)
    keys = np.asarray(keys, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    width = q.shape[1]
    head_dim = width // head_count
    out = np.zeros_like(q)
    for h in range(head_count):
        sl = slice(h * head_dim, (h + 1) * head_dim)
        qh, kh, vh = q[:, sl], keys[:, sl], values[:, sl]
        for i in range(qh.shape[0]):
            logits = [float(qh[i] @ kh[j]) / math.sqrt(head_dim) for j in range(kh.shape[0])]
            peak = max(logits)
            exp = [math.exp(x - peak) for x in logits]
            z = sum(exp)
            out[i, sl] = sum((e / z) * vh[j] for j, e in enumerate(exp))
    return out


class TestMixedAttentionKernel:
    def test_closed_form_single_head(self):
        q = np.array([[1.0, 0.0]])
        k = np.array([[1.0, 0.0], [0.0, 1.0]])
        v = np.array([[1.0, 2.0], [3.0, 4.0]])
        s = 1.0 / math.sqrt(2.0)
        w1 = math.exp(s) / (math.exp(s) + 1.0)
        expected = w1 * v[0] + (1.0 - w1) * v[1]
        got = mixed_attention(q, k, v, head_count=1)
        assert np.allclose(got[0], expected, atol=1e-9)

    def test_closed_form_with_source_rows(self):
        q = np.array([[1.0, 0.0]])
        k = np.array([[1.0, 0.0], [0.0, 1.0]])
        v = np.array([[1.0, 2.0], [3.0, 4.0]])
        k_src = np.array([[1.0, 1.0]])
        v_src = np.array([[5.0, 6.0]])
        s = 1.0 / math.sqrt(2.0)
        exp = [math.exp(s), 1.0, math.exp(s)]
        z = sum(exp)
        expected = (exp[0] * v[0] + exp[1] * v[1] + exp[2] * v_src[0]) / z
        got = mixed_attention(q, k, v, k_src, v_src, head_count=1)
        assert np.allclose(got[0], expected, atol=1e-9)

    def test_no_source_is_plain_attention(self):
        rng = np.random.default_rng(0)
        q, k, v = (rng.normal(size=(5, 8)) for _ in range(3))
        assert np.array_equal(
            mixed_attention(q, k, v), mixed_attention(q, k, v, None, None)
        )

    def test_duplicated_source_cancels(self):
        # Extending K/V with an exact copy of itself halves every weight
        # but leaves the weighted average untouched.
        rng = np.random.default_rng(1)
        q, k, v = (rng.normal(size=(6, 8)) for _ in range(3))
        plain = mixed_attention(q, k, v, head_count=2)
        doubled = mixed_attention(q, k, v, k_src=k, v_src=v, head_count=2)
        assert np.allclose(plain, doubled, atol=1e-12)

    def test_distinct_source_shifts_output(self):
        rng = np.random.default_rng(2)
        q, k, v = (rng.normal(size=(4, 8)) for _ in range(3))
        k_src, v_src = rng.normal(size=(3, 8)), rng.normal(size=(3, 8))
        assert not np.allclose(
            mixed_attention(q, k, v), mixed_attention(q, k, v, k_src, v_src)
        )

    @pytest.mark.parametrize("heads", [1, 2, 4])
    def test_multi_head_matches_manual(self, heads):
        rng = np.random.default_rng(10 + heads)
        q = rng.normal(size=(5, 8))
        k_tar = rng.normal(size=(7, 8))
        v_tar = rng.normal(size=(7, 8))
        k_src = rng.normal(size=(3, 8))
        v_src = rng.normal(size=(3, 8))
        got = mixed_attention(q, k_tar, v_tar, k_src, v_src, head_count=heads)
        want = manual_attention(
            q, np.vstack([k_tar, k_src]), np.vstack([v_tar, v_src]), head_count=heads
        )
        assert np.allclose(got, want, atol=1e-9)

    def test_weights_shape_and_rows(self):
        rng = np.random.default_rng(3)
        q = rng.normal(size=(4, 8))
        k = rng.normal(size=(6, 8))
        v = rng.normal(size=(6, 8))
        k_src = rng.normal(size=(2, 8))
        v_src = rng.normal(size=(2, 8))
        _, weights = mixed_attention(
            q, k, v, k_src, v_src, head_count=2, return_weights=True
        )
        assert weights.shape == (2, 4, 8)
        assert np.allclose(weights.sum(axis=-1), 1.0, atol=1e-12)
        assert weights.min() >= 0.0

    def test_validation(self):
        q = np.zeros((2, 8))
        k = np.zeros((3, 8))
        v = np.zeros((3, 8))
        with pytest.raises(MixingError):
            mixed_attention(np.zeros((0, 8)), k, v)
        with pytest.raises(MixingError):
            mixed_attention(q, np.zeros((3, 4)), v)
        with pytest.raises(MixingError):
            mixed_attention(q, k, np.zeros((2, 8)))
        with pytest.raises(MixingError):
            mixed_attention(q, k, v, head_count=3)
        with pytest.raises(MixingError):
            mixed_attention(q, k, v, np.zeros((2, 4)), np.zeros((2, 4)))
        with pytest.raises(MixingError):
            mixed_attention(q, k, v, np.zeros((2, 8)), np.zeros((1, 8)))
        with pytest.raises(MixingError):
            mixed_attention(np.zeros((2, 2, 2)), k, v)

    def test_self_variant_shares_kernel(self):
        rng = np.random.default_rng(4)
        args = [rng.normal(size=(4, 8)) for _ in range(5)]
        assert np.array_equal(
            self_mixed_attention(*args, head_count=2),
            mixed_attention(*args, head_count=2),
        )


class TestConfigs:
    def test_mixing_config_validation(self):
        with pytest.raises(MixingError):
            MixingConfig(n_mix_layers=2, variant="cross_only")
        with pytest.raises(MixingError):
            MixingConfig(n_mix_layers=-1)
        with pytest.raises(MixingError):
            MixingConfig(n_mix_layers=7, total_layers=6)
        MixingConfig(n_mix_layers=6, total_layers=6)

    def test_default_depths(self):
        image = default_mixing_config("image")
        assert (image.n_mix_layers, image.variant) == (18, "joint_mmdit")
        video = default_mixing_config("video")
        assert (video.n_mix_layers, video.variant) == (13, "joint_mmdit")
        attn = default_mixing_config("self_attention")
        assert (attn.n_mix_layers, attn.variant) == (2, "self_attention")
        with pytest.raises(MixingError):
            default_mixing_config("audio")
        assert DEFAULT_MIX_LAYERS == {"image": 18, "video": 13, "self_attention": 2}

    def test_injection_config_validation(self):
        assert set(INJECTION_SCHEMES) == {"token_concat_early_drop", "channel_concat"}
        with pytest.raises(MixingError):
            InjectionConfig(scheme="prefix")
        with pytest.raises(MixingError):
            InjectionConfig(drop_after_block=-1)

    def test_token_block_validation(self):
        noise = np.zeros((4, 8))
        with pytest.raises(MixingError):
            TokenBlockInput(noise, np.zeros((2, 4)))
        with pytest.raises(MixingError):
            TokenBlockInput(noise, np.zeros((2, 8)), cond_tokens=np.zeros((2, 4)))
        with pytest.raises(MixingError):
            TokenBlockInput(noise, np.zeros((2, 8)), head_count=3)
        block = TokenBlockInput(noise, np.zeros((2, 8)), head_count=2)
        assert block.width == 8 and block.head_dim == 4


class TestToyModel:
    def test_seeded_weights_reproducible(self):
        a = ToyModel(depth=3, width=16, head_count=2, model_seed=5)
        b = ToyModel(depth=3, width=16, head_count=2, model_seed=5)
        for wa, wb in zip(a.blocks, b.blocks):
            assert np.array_equal(wa.wq, wb.wq)
            assert np.array_equal(wa.w2, wb.w2)
        c = ToyModel(depth=3, width=16, head_count=2, model_seed=6)
        assert not np.array_equal(a.blocks[0].wq, c.blocks[0].wq)

    def test_variant_weight_sets(self):
        joint = ToyModel(depth=2, width=16, head_count=2)
        assert joint.blocks[0].cq is None
        split = ToyModel(depth=2, width=16, head_count=2, variant="self_attention")
        assert split.blocks[0].cq is not None

    def test_validation(self):
        with pytest.raises(MixingError):
            ToyModel(depth=0)
        with pytest.raises(MixingError):
            ToyModel(width=10, head_count=4)
        with pytest.raises(MixingError):
            ToyModel(variant="unet")


class TestBlockForward:
    def setup_method(self):
        self.model = ToyModel(depth=6, width=16, head_count=2, model_seed=1)
        rng = np.random.default_rng(0)
        self.noise = rng.normal(size=(5, 16))
        self.text = rng.normal(size=(3, 16))
        self.cond = rng.normal(size=(5, 16))

    def block(self, **kwargs):
        return TokenBlockInput(self.noise, self.text, head_count=2, **kwargs)

    def test_layer_bounds(self):
        with pytest.raises(MixingError):
            block_forward(self.model, 0, self.block())
        with pytest.raises(MixingError):
            block_forward(self.model, 7, self.block())

    def test_token_counts_preserved(self):
        out = block_forward(self.model, 1, self.block())
        assert out.noise_tokens.shape == (5, 16)
        assert out.text_tokens.shape == (3, 16)
        assert out.cond_tokens is None

    def test_cond_without_scheme_rejected(self):
        with pytest.raises(MixingError):
            block_forward(self.model, 1, self.block(cond_tokens=self.cond))

    def test_token_concat_lifecycle(self):
        injection = InjectionConfig("token_concat_early_drop", drop_after_block=4)
        trace: list = []
        state = self.block(cond_tokens=self.cond)
        for layer in range(1, 5):
            state = block_forward(self.model, layer, state, injection=injection, trace=trace)
            if layer < 4:
                assert state.cond_tokens is not None
                state = TokenBlockInput(
                    state.noise_tokens, state.text_tokens,
                    cond_tokens=state.cond_tokens, head_count=2,
                )
        assert state.cond_tokens is None  # dropped at the boundary
        assert [row["seq_len"] for row in trace] == [13, 13, 13, 13]
        out = block_forward(self.model, 5, state, injection=injection, trace=trace)
        assert trace[-1]["seq_len"] == 8
        assert out.cond_tokens is None

    def test_cond_required_inside_boundary(self):
        injection = InjectionConfig("token_concat_early_drop", drop_after_block=4)
        with pytest.raises(MixingError, match="required"):
            block_forward(self.model, 2, self.block(), injection=injection)

    def test_cond_past_boundary_rejected(self):
        injection = InjectionConfig("token_concat_early_drop", drop_after_block=4)
        with pytest.raises(MixingError, match="past the drop boundary"):
            block_forward(
                self.model, 5, self.block(cond_tokens=self.cond), injection=injection
            )

    def test_channel_concat_rejects_cond_tokens(self):
        injection = InjectionConfig("channel_concat")
        with pytest.raises(MixingError):
            block_forward(
                self.model, 1, self.block(cond_tokens=self.cond), injection=injection
            )

    def test_run_injected_traces(self):
        injection = InjectionConfig("token_concat_early_drop", drop_after_block=4)
        trace: list = []
        run_injected(self.model, self.noise, self.text, self.cond, injection, trace=trace)
        assert [row["seq_len"] for row in trace] == [13, 13, 13, 13, 8, 8]
        assert [row["cond_len"] for row in trace] == [5, 5, 5, 5, 0, 0]

        channel: list = []
        out = run_injected(
            self.model, self.noise, self.text, self.cond,
            InjectionConfig("channel_concat"), trace=channel,
        )
        assert [row["seq_len"] for row in channel] == [8] * 6
        assert out.shape == (5, 16)

    def test_channel_fuse_validation(self):
        with pytest.raises(MixingError):
            fuse_condition_channels(self.model, self.noise, self.cond[:3])
        with pytest.raises(MixingError):
            fuse_condition_channels(self.model, np.zeros((5, 8)), np.zeros((5, 8)))

    def test_injection_schemes_disagree(self):
        early = run_injected(
            self.model, self.noise, self.text, self.cond,
            InjectionConfig("token_concat_early_drop", drop_after_block=4),
        )
        fused = run_injected(
            self.model, self.noise, self.text, self.cond,
            InjectionConfig("channel_concat"),
        )
        assert not np.allclose(early, fused)


class TestPairedGenerate:
    def setup_method(self):
        self.model = ToyModel(depth=8, width=64, head_count=4, model_seed=3)
        self.caption = caption_embedding(11)
        self.other = caption_embedding(12)

    def test_equal_captions_equal_branches(self):
        for n_mix in (0, 2, 8):
            mix = MixingConfig(n_mix_layers=n_mix)
            src, tar = paired_generate(
                self.model, self.caption, self.caption, mix, steps=3, noise_seed=7
            )
            assert np.max(np.abs(src - tar)) <= 1e-6, n_mix

    def test_zero_mixing_equals_solo_generation(self):
        mix = MixingConfig(n_mix_layers=0)
        src, tar = paired_generate(
            self.model, self.caption, self.other, mix, steps=3, noise_seed=7
        )
        solo_src = generate(self.model, self.caption, steps=3, noise_seed=7)
        solo_tar = generate(self.model, self.other, steps=3, noise_seed=7)
        assert np.array_equal(src, solo_src)
        assert np.array_equal(tar, solo_tar)

    def test_mixing_depth_changes_output(self):
        shallow = paired_generate(
            self.model, self.caption, self.other,
            MixingConfig(n_mix_layers=2), steps=3, noise_seed=7,
        )[1]
        deep = paired_generate(
            self.model, self.caption, self.other,
            MixingConfig(n_mix_layers=8), steps=3, noise_seed=7,
        )[1]
        assert not np.allclose(shallow, deep)

    def test_source_never_sees_target(self):
        mix = MixingConfig(n_mix_layers=4)
        src_a, _ = paired_generate(
            self.model, self.caption, self.other, mix, steps=3, noise_seed=9
        )
        src_b, _ = paired_generate(
            self.model, self.caption, caption_embedding(99), mix, steps=3, noise_seed=9
        )
        assert np.array_equal(src_a, src_b)

    def test_debug_reports_mixed_layers(self):
        debug: dict = {}
        paired_generate(
            self.model, self.caption, self.other,
            MixingConfig(n_mix_layers=5), steps=2, noise_seed=1, debug=debug,
        )
        assert debug["mixed_layers"] == {1, 2, 3, 4, 5}
        assert np.array_equal(debug["initial_src"], debug["initial_tar"])

    def test_unshared_noise(self):
        debug: dict = {}
        paired_generate(
            self.model, self.caption, self.caption,
            MixingConfig(n_mix_layers=2, shared_init_noise=False),
            steps=1, noise_seed=1, debug=debug,
        )
        assert not np.array_equal(debug["initial_src"], debug["initial_tar"])

    def test_self_attention_variant(self):
        model = ToyModel(depth=4, width=32, head_count=4, variant="self_attention")
        mix = MixingConfig(n_mix_layers=2, variant="self_attention")
        cap = caption_embedding(5, width=32)
        src, tar = paired_generate(model, cap, cap, mix, steps=2, noise_seed=3)
        assert np.max(np.abs(src - tar)) <= 1e-6
        other = caption_embedding(6, width=32)
        _, tar2 = paired_generate(model, cap, other, mix, steps=2, noise_seed=3)
        assert not np.allclose(tar, tar2)

    def test_validation(self):
        mix = MixingConfig(n_mix_layers=2)
        with pytest.raises(MixingError):
            paired_generate(self.model, self.caption, self.caption, mix, steps=0, noise_seed=0)
        with pytest.raises(MixingError):
            paired_generate(
                self.model, self.caption, self.caption,
                MixingConfig(n_mix_layers=2, variant="self_attention"),
                steps=1, noise_seed=0,
            )
        with pytest.raises(MixingError):
            paired_generate(
                self.model, self.caption, self.caption,
                MixingConfig(n_mix_layers=2, total_layers=9),
                steps=1, noise_seed=0,
            )
        with pytest.raises(MixingError):
            paired_generate(
                self.model, self.caption, self.caption,
                MixingConfig(n_mix_layers=9), steps=1, noise_seed=0,
            )

    def test_generate_validation(self):
        with pytest.raises(MixingError):
            generate(self.model, self.caption, steps=0, noise_seed=0)

    def test_caption_embedding_seeded(self):
        assert np.array_equal(caption_embedding(4), caption_embedding(4))
        assert not np.array_equal(caption_embedding(4), caption_embedding(5))
        assert caption_embedding(4, tokens=6, width=32).shape == (6, 32)


class TestPropertySuite:
    def test_all_invariants_pass(self):
        rows = run_property_suite(seed=0)
        assert len(rows) >= 10
        names = [row["name"] for row in rows]
        assert len(set(names)) == len(names)
        failed = [row for row in rows if not row["passed"]]
        assert not failed, failed
        assert all("seconds" in row for row in rows)
        assert set(VARIANTS) == {"joint_mmdit", "self_attention"}

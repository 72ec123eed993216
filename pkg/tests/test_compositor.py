"""Rasterization and compositing: quantization, resampling, locality, shapes, text."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from editsynth.compositor import (
    ALPHA_SUPPORT,
    ANNOTATION_MODES,
    SHAPE_KINDS,
    AnnotationStyle,
    CompositorError,
    Placement,
    adjust_brightness,
    compose_collage,
    draw_label,
    fit_cover,
    matte_support,
    placement_box,
    placement_matte,
    quantize_u8,
    render_annotation,
    render_shape,
    render_text,
    resize_bilinear,
    scaled_size,
    shape_coverage,
    support_bbox,
    text_extent,
    validate_canvas,
)
from editsynth.font5x7 import FONT_HEIGHT


def checker(h, w, a=40, b=200):
    grid = np.indices((h, w)).sum(axis=0) % 2
    return np.where(grid[..., None].astype(bool), a, b).astype(np.uint8).repeat(3).reshape(h, w, 3)


def solid_rgba(h, w, color, alpha=255):
    out = np.zeros((h, w, 4), dtype=np.uint8)
    out[..., :3] = color
    out[..., 3] = alpha
    return out


class TestQuantize:
    def test_half_rounds_up(self):
        vals = np.array([0.0, 0.4999, 0.5, 1.5, 2.5, 254.5, 254.4999])
        got = quantize_u8(vals)
        assert got.tolist() == [0, 0, 1, 2, 3, 255, 254]
        assert got.dtype == np.uint8

    def test_clamps(self):
        assert quantize_u8(np.array([-3.0, 280.0])).tolist() == [0, 255]

    @given(st.floats(min_value=0.0, max_value=255.0, allow_nan=False))
    def test_within_half_of_input(self, x):
        q = float(quantize_u8(np.array([x]))[0])
        assert abs(q - x) <= 0.5

    @given(st.integers(min_value=0, max_value=255))
    def test_integers_are_fixed_points(self, n):
        assert int(quantize_u8(np.array([float(n)]))[0]) == n


class TestValidation:
    def test_canvas_shape_and_dtype(self):
        validate_canvas(np.zeros((16, 32, 3), dtype=np.uint8))
        with pytest.raises(CompositorError):
            validate_canvas(np.zeros((16, 32, 4), dtype=np.uint8))
        with pytest.raises(CompositorError):
            validate_canvas(np.zeros((16, 32, 3), dtype=np.float64))
        with pytest.raises(CompositorError):
            validate_canvas(np.zeros((17, 32, 3), dtype=np.uint8))
        with pytest.raises(CompositorError):
            validate_canvas(np.zeros((0, 0, 3), dtype=np.uint8))

    def test_scaled_size_rounds_half_up_and_floors_at_one(self):
        assert scaled_size(10, 10, 0.25) == (3, 3)  # 2.5 -> 3
        assert scaled_size(10, 4, 0.05) == (1, 1)
        assert scaled_size(7, 7, 1.0) == (7, 7)

    def test_placement_box_centering(self):
        box = placement_box(Placement("a", (50, 40), 1.0), (10, 8))
        assert box == (45, 36, 10, 8)


class TestResize:
    def test_identity(self):
        src = checker(8, 8)
        out = resize_bilinear(src, 8, 8)
        assert out.dtype == np.float64
        assert np.array_equal(out, src.astype(np.float64))

    def test_constant_preserved(self):
        src = np.full((5, 9, 3), 77, dtype=np.uint8)
        out = resize_bilinear(src, 13, 4)
        assert np.allclose(out, 77.0)

    def test_ramp_upscale_values(self):
        # Half-pixel centers: targets {-0.25, 0.25, 0.75, 1.25} clamp to the
        # ends, giving 0, 63.75, 191.25, 255 for a (0, 255) two-pixel ramp.
        src = np.array([[0.0], [255.0]])
        out = resize_bilinear(src, 4, 1)
        assert np.allclose(out[:, 0], [0.0, 63.75, 191.25, 255.0])

    def test_downscale_averages(self):
        src = np.array([[0.0, 100.0, 200.0, 300.0]])
        out = resize_bilinear(src, 1, 2)
        assert np.allclose(out[0], [50.0, 250.0])

    def test_rejects_degenerate_target(self):
        with pytest.raises(CompositorError):
            resize_bilinear(np.zeros((4, 4)), 0, 4)

    @given(
        st.integers(min_value=1, max_value=6),
        st.integers(min_value=1, max_value=6),
        st.integers(min_value=1, max_value=9),
        st.integers(min_value=1, max_value=9),
    )
    @settings(max_examples=40, deadline=None)
    def test_range_preserved(self, in_h, in_w, out_h, out_w):
        rng = np.random.default_rng(in_h * 1000 + in_w * 100 + out_h * 10 + out_w)
        src = rng.uniform(0.0, 255.0, size=(in_h, in_w, 3))
        out = resize_bilinear(src, out_h, out_w)
        assert out.shape == (out_h, out_w, 3)
        assert out.min() >= src.min() - 1e-9
        assert out.max() <= src.max() + 1e-9


class TestFitCover:
    def test_output_shape(self):
        src = checker(48, 80)
        out = fit_cover(src, 32, 32)
        assert out.shape == (32, 32, 3)
        assert out.dtype == np.uint8

    def test_constant_source(self):
        src = np.full((30, 70, 3), 140, dtype=np.uint8)
        assert np.all(fit_cover(src, 24, 24) == 140)

    def test_crops_wider_axis(self):
        # Left half black, right half white; covering a square from a wide
        # source must crop the sides, keeping both halves represented.
        src = np.zeros((20, 80, 3), dtype=np.uint8)
        src[:, 40:] = 255
        out = fit_cover(src, 16, 16)
        assert out[:, 0].max() == 0
        assert out[:, -1].min() == 255


class TestCompose:
    def test_opaque_layer_replaces_pixels(self):
        bg = checker(32, 32)
        layer = solid_rgba(8, 8, (255, 0, 0))
        out = compose_collage(bg, [Placement("a", (16, 16), 1.0)], {"a": layer})
        assert np.all(out[12:20, 12:20] == (255, 0, 0))

    def test_locality_outside_matte(self):
        bg = checker(48, 48)
        layer = solid_rgba(10, 6, (0, 200, 50))
        place = Placement("a", (20, 30), 1.3)
        base = compose_collage(bg, [], {})
        with_layer = compose_collage(bg, [place], {"a": layer})
        matte = placement_matte(layer, place, 48, 48)
        outside = matte == 0.0
        assert np.array_equal(with_layer[outside], base[outside])
        assert not np.array_equal(with_layer, base)

    def test_z_order_controls_stacking(self):
        bg = np.zeros((32, 32, 3), dtype=np.uint8)
        red = solid_rgba(8, 8, (255, 0, 0))
        blue = solid_rgba(8, 8, (0, 0, 255))
        placements = [
            Placement("red", (16, 16), 1.0, z_order=2),
            Placement("blue", (16, 16), 1.0, z_order=1),
        ]
        out = compose_collage(bg, placements, {"red": red, "blue": blue})
        assert tuple(out[16, 16]) == (255, 0, 0)
        flipped = [
            Placement("red", (16, 16), 1.0, z_order=0),
            Placement("blue", (16, 16), 1.0, z_order=5),
        ]
        out2 = compose_collage(bg, flipped, {"red": red, "blue": blue})
        assert tuple(out2[16, 16]) == (0, 0, 255)

    def test_single_quantize_semitransparent_stack(self):
        # Two 50 percent layers over gray: accumulate in float, quantize once.
        bg = np.full((16, 16, 3), 100, dtype=np.uint8)
        a = solid_rgba(4, 4, (255, 255, 255), alpha=128)
        b = solid_rgba(4, 4, (0, 0, 0), alpha=128)
        out = compose_collage(
            bg,
            [Placement("a", (8, 8), 1.0, 0), Placement("b", (8, 8), 1.0, 1)],
            {"a": a, "b": b},
        )
        al = 128.0 / 255.0
        expected = (100.0 * (1 - al) + 255.0 * al) * (1 - al) + 0.0 * al
        assert int(out[8, 8, 0]) == int(math.floor(expected + 0.5))

    def test_determinism(self):
        bg = checker(32, 32)
        layer = solid_rgba(6, 6, (10, 20, 30), alpha=190)
        args = ([Placement("a", (10, 10), 1.7)], {"a": layer})
        assert np.array_equal(compose_collage(bg, *args), compose_collage(bg, *args))

    def test_error_paths(self):
        bg = checker(32, 32)
        layer = solid_rgba(8, 8, (1, 2, 3))
        with pytest.raises(CompositorError):
            compose_collage(bg, [Placement("a", (16, 16), 0.0)], {"a": layer})
        with pytest.raises(CompositorError):
            compose_collage(bg, [Placement("a", (16, 16), 9.0)], {"a": layer})
        with pytest.raises(CompositorError):
            compose_collage(bg, [Placement("missing", (16, 16), 1.0)], {})
        with pytest.raises(CompositorError):
            compose_collage(bg, [Placement("a", (2, 2), 1.0)], {"a": layer})
        with pytest.raises(CompositorError):
            compose_collage(bg, [Placement("a", (16, 16), 1.0)], {"a": layer[..., :3]})

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_locality_property(self, seed):
        rng = np.random.default_rng(seed)
        bg = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
        h, w = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        layer = rng.integers(0, 256, size=(h, w, 4), dtype=np.uint8)
        cx = int(rng.integers(w, 32 - w))
        cy = int(rng.integers(h, 32 - h))
        place = Placement("a", (cx, cy), 1.0)
        out = compose_collage(bg, [place], {"a": layer})
        matte = placement_matte(layer, place, 32, 32)
        assert np.array_equal(out[matte == 0.0], bg[matte == 0.0])


class TestBrightness:
    def test_known_values(self):
        src = np.array([[[100, 200, 250]]], dtype=np.uint8)
        out = adjust_brightness(src, 1.2)
        assert out[0, 0].tolist() == [120, 240, 255]
        dim = adjust_brightness(src, 0.8)
        assert dim[0, 0].tolist() == [80, 160, 200]

    def test_factor_bounds(self):
        src = np.zeros((2, 2, 3), dtype=np.uint8)
        with pytest.raises(CompositorError):
            adjust_brightness(src, 0.4)
        with pytest.raises(CompositorError):
            adjust_brightness(src, 2.5)
        with pytest.raises(CompositorError):
            adjust_brightness(src.astype(np.float64), 1.0)


class TestShapeCoverage:
    CANVAS = 96

    def area(self, shape, size):
        cov = shape_coverage(shape, (48, 48), size, self.CANVAS, self.CANVAS)
        assert cov.min() >= 0.0 and cov.max() <= 1.0
        return cov.sum()

    def test_square_integer_aligned_exact(self):
        assert self.area("square", 40.0) == pytest.approx(1600.0, abs=1e-9)

    def test_circle_area(self):
        r = 17.0
        assert self.area("circle", 2 * r) == pytest.approx(math.pi * r * r, rel=0.01)

    def test_triangle_area(self):
        # Equilateral, circumradius r: area is (3 sqrt(3) / 4) r^2.
        r = 20.0
        assert self.area("triangle", 2 * r) == pytest.approx(
            0.75 * math.sqrt(3.0) * r * r, rel=0.01
        )

    def test_star_area_shoelace(self):
        # Shoelace over the ten analytic vertices, computed here from scratch.
        size = 44.0
        outer = size / 2.0
        inner = outer * 0.381966
        verts = []
        for i in range(10):
            ang = math.radians(-90.0 + 36.0 * i)
            rad = outer if i % 2 == 0 else inner
            verts.append((rad * math.cos(ang), rad * math.sin(ang)))
        shoelace = 0.0
        for i in range(10):
            x0, y0 = verts[i]
            x1, y1 = verts[(i + 1) % 10]
            shoelace += x0 * y1 - x1 * y0
        assert self.area("star", size) == pytest.approx(abs(shoelace) / 2.0, rel=0.02)

    def test_zero_outside_bbox(self):
        cov = shape_coverage("circle", (48, 48), 20.0, self.CANVAS, self.CANVAS)
        assert np.all(cov[:37] == 0.0)
        assert np.all(cov[:, :37] == 0.0)
        assert np.all(cov[59:] == 0.0)

    def test_bounds_and_kind_errors(self):
        with pytest.raises(CompositorError):
            shape_coverage("hexagon", (48, 48), 10.0, 96, 96)
        with pytest.raises(CompositorError):
            shape_coverage("circle", (48, 48), 0.0, 96, 96)
        with pytest.raises(CompositorError):
            shape_coverage("circle", (2, 48), 10.0, 96, 96)


class TestRenderShape:
    def test_pure_and_exact_interior(self):
        canvas = checker(64, 64)
        before = canvas.copy()
        out = render_shape(canvas, "square", (200, 10, 10), (32, 32), 20.0)
        assert np.array_equal(canvas, before)
        assert np.all(out[24:40, 24:40] == (200, 10, 10))
        cov = shape_coverage("square", (32, 32), 20.0, 64, 64)
        assert np.array_equal(out[cov == 0.0], canvas[cov == 0.0])

    def test_color_validation(self):
        canvas = checker(32, 32)
        with pytest.raises(CompositorError):
            render_shape(canvas, "circle", (300, 0, 0), (16, 16), 8.0)


class TestText:
    def test_extent_formula(self):
        # 7px glyphs: 5px wide chars with 1px spacing.
        assert text_extent("abc", 7) == (3 * 5 + 2 * 1, 7)
        # 14px glyphs: 10px chars, 2px spacing.
        assert text_extent("abcd", 14) == (4 * 10 + 3 * 2, 14)

    def test_render_and_erase_round_trip(self):
        canvas = checker(64, 128)
        out, matte = render_text(canvas, "Hello9", (250, 250, 0), (64, 32), 14)
        support = matte > 0.0
        assert support.any()
        assert np.all(out[support] == (250, 250, 0))
        assert np.array_equal(out[~support], canvas[~support])
        restored = out.copy()
        restored[support] = canvas[support]
        assert np.array_equal(restored, canvas)

    def test_matte_is_binary(self):
        canvas = checker(64, 128)
        _, matte = render_text(canvas, "abc", (0, 0, 0), (64, 32), 10)
        assert set(np.unique(matte)) <= {0.0, 1.0}

    def test_length_charset_and_height_errors(self):
        canvas = checker(64, 128)
        with pytest.raises(CompositorError):
            render_text(canvas, "ab", (0, 0, 0), (64, 32), 10)
        with pytest.raises(CompositorError):
            render_text(canvas, "a" * 13, (0, 0, 0), (64, 32), 10)
        with pytest.raises(CompositorError):
            render_text(canvas, "ab!", (0, 0, 0), (64, 32), 10)
        with pytest.raises(CompositorError):
            render_text(canvas, "abc", (0, 0, 0), (64, 32), FONT_HEIGHT - 1)
        with pytest.raises(CompositorError):
            render_text(canvas, "abc", (0, 0, 0), (3, 3), 10)

    def test_draw_label_clips_without_error(self):
        canvas = checker(32, 32)
        draw_label(canvas, "overflowing label text", (255, 255, 255), (2, 2), 7)
        draw_label(canvas, "x", (255, 255, 255), (31, 31), 7)
        draw_label(canvas, "", (255, 255, 255), (0, 0), 7)


class TestMatteSupport:
    def test_threshold_is_strict(self):
        matte = np.array([[0.0, 0.5, 0.500001, 1.0]])
        assert matte_support(matte).tolist() == [[False, False, True, True]]

    def test_uint8_matte(self):
        matte = np.array([[0, 127, 128, 255]], dtype=np.uint8)
        assert matte_support(matte).tolist() == [[False, False, True, True]]
        assert ALPHA_SUPPORT == 0.5

    def test_support_bbox(self):
        support = np.zeros((10, 12), dtype=bool)
        support[3:6, 4:9] = True
        assert support_bbox(support) == (3, 5, 4, 8)
        with pytest.raises(CompositorError):
            support_bbox(np.zeros((4, 4), dtype=bool))


class TestAnnotation:
    def make_matte(self):
        matte = np.zeros((48, 48), dtype=np.float64)
        matte[10:20, 14:30] = 1.0
        return matte

    def test_mask_fill_exact(self):
        canvas = checker(48, 48)
        matte = self.make_matte()
        out = render_annotation(canvas, matte, AnnotationStyle("mask_fill", (9, 99, 199)))
        support = matte > ALPHA_SUPPORT
        assert np.all(out[support] == (9, 99, 199))
        assert np.array_equal(out[~support], canvas[~support])

    def test_bbox_outline_ring(self):
        canvas = checker(48, 48)
        out = render_annotation(
            canvas, self.make_matte(), AnnotationStyle("bbox_outline", (255, 0, 0), 2)
        )
        ring = np.zeros((48, 48), dtype=bool)
        ring[10:20, 14:30] = True
        ring[12:18, 16:28] = False
        assert np.all(out[ring] == (255, 0, 0))
        assert np.array_equal(out[~ring], canvas[~ring])

    def test_thin_box_fills_solid(self):
        canvas = checker(48, 48)
        matte = np.zeros((48, 48))
        matte[5:9, 5:9] = 1.0
        out = render_annotation(canvas, matte, AnnotationStyle("bbox_outline", (0, 255, 0), 3))
        assert np.all(out[5:9, 5:9] == (0, 255, 0))

    def test_style_validation(self):
        with pytest.raises(CompositorError):
            AnnotationStyle("sketch", (0, 0, 0))
        with pytest.raises(CompositorError):
            AnnotationStyle("mask_fill", (0, 0, 300))
        with pytest.raises(CompositorError):
            AnnotationStyle("bbox_outline", (0, 0, 0), 0)
        assert set(ANNOTATION_MODES) == {"mask_fill", "bbox_outline"}
        assert set(SHAPE_KINDS) == {"circle", "square", "triangle", "star"}

    def test_matte_shape_mismatch(self):
        with pytest.raises(CompositorError):
            render_annotation(checker(48, 48), np.ones((10, 10)), AnnotationStyle("mask_fill", (0, 0, 0)))

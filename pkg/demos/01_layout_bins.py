"""Canvas geometry: the 31-entry aspect-bin table and video shape sampling.

Every generated image lands on one of 31 fixed (width, height) buckets that
sweep aspect 4:1 down to 1:4 at roughly constant area, sides snapped to
multiples of 16. Videos draw uniformly from four frame counts crossed with
five resolutions. Run: python3 demos/01_layout_bins.py
"""

from collections import Counter

from editsynth import BASE_SIDE, RngState, make_bins, sample_video_shape

bins = make_bins()
print(f"{len(bins)} aspect bins, target area {BASE_SIDE}x{BASE_SIDE} = {BASE_SIDE**2} px")
print(f"{'bin':>3} {'width':>6} {'height':>6} {'aspect':>7} {'area/target':>11}")
for b in bins:
    area = b.width * b.height / BASE_SIDE**2
    print(f"{b.index:>3} {b.width:>6} {b.height:>6} {b.width / b.height:>7.3f} {area:>11.3f}")

square = bins[len(bins) // 2]
print(f"\nmiddle bin {square.index} is the square canvas: {square.width}x{square.height}")
print(f"extremes: {bins[0].width}x{bins[0].height} and {bins[-1].width}x{bins[-1].height}")

# Video canvases: 4 frame counts x 5 resolutions, drawn uniformly. A seeded
# RngState makes the draw reproducible across runs and machines.
gen = RngState(seed=7, stream_id=0).generator()
tally = Counter()
for _ in range(10_000):
    shape = sample_video_shape(gen)
    tally[(shape.frame_count, shape.width, shape.height)] += 1

print(f"\n10,000 video shape draws over {len(tally)} combinations:")
for (frames, width, height), n in sorted(tally.items()):
    print(f"  {frames:>3} frames @ {width}x{height}: {n:>4}  ({n / 10_000:.1%})")
spread = max(tally.values()) - min(tally.values())
print(f"max-min spread {spread} (expected ~{10_000 // len(tally)} each)")

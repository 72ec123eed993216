"""PNG encode/decode helpers shared by the store, dataset, and judge layers."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

# Fixed compression level so media bytes are reproducible across runs.
_COMPRESS_LEVEL = 3


def encode_png(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG", compress_level=_COMPRESS_LEVEL)
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im)


def read_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im)


def write_png(path: str | Path, pixels: np.ndarray) -> None:
    Image.fromarray(pixels).save(path, format="PNG", compress_level=_COMPRESS_LEVEL)

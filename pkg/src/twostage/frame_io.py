"""Raw planar video input/output, block partitioning and distortion metrics.

Frames are plain 2-D ``uint8`` numpy arrays holding the luma plane only.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

#: chroma plane size as a fraction of the luma plane, per subsampling format
CHROMA_FACTORS = {"400": 0.0, "420": 0.5, "422": 1.0, "444": 2.0}


class TruncatedFileError(ValueError):
    """Raised when a raw file holds fewer frames than requested."""

    def __init__(self, frame_index: int, path):
        super().__init__(f"{path}: file ends inside frame {frame_index}")
        self.frame_index = frame_index


def _frame_bytes(width: int, height: int, chroma: str) -> tuple[int, int]:
    try:
        factor = CHROMA_FACTORS[chroma]
    except KeyError:
        raise ValueError(f"unknown chroma format {chroma!r}") from None
    luma = width * height
    if chroma == "420":
        chroma_bytes = 2 * ((width + 1) // 2) * ((height + 1) // 2)
    elif chroma == "422":
        chroma_bytes = 2 * ((width + 1) // 2) * height
    else:
        chroma_bytes = int(luma * factor)
    return luma, chroma_bytes


def pad_frame(frame: np.ndarray, block_size: int) -> np.ndarray:
    """Pad right/bottom edges by sample replication to block-size multiples."""
    h, w = frame.shape
    ph = -h % block_size
    pw = -w % block_size
    if ph == 0 and pw == 0:
        return frame
    return np.pad(frame, ((0, ph), (0, pw)), mode="edge")


def load_raw_video(path, width: int, height: int, count: int,
                   block_size: int = 16, chroma: str = "420") -> list[np.ndarray]:
    """Read ``count`` luma planes from an 8-bit planar raw file.

    Chroma planes are skipped according to ``chroma`` ("400", "420", "422",
    "444"). Each returned frame is padded to a multiple of ``block_size``.
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"invalid frame dimensions {width}x{height}")
    if count <= 0:
        raise ValueError(f"frame count must be positive, got {count}")
    luma, chroma_bytes = _frame_bytes(width, height, chroma)
    frames = []
    with open(path, "rb") as fh:
        for i in range(count):
            buf = fh.read(luma)
            if len(buf) < luma:
                raise TruncatedFileError(i, path)
            skipped = fh.read(chroma_bytes)
            if len(skipped) < chroma_bytes:
                raise TruncatedFileError(i, path)
            y = np.frombuffer(buf, dtype=np.uint8).reshape(height, width)
            frames.append(pad_frame(y.copy(), block_size))
    return frames


def write_raw_video(path, frames: Iterable[np.ndarray], width: int | None = None,
                    height: int | None = None, chroma: str = "420") -> None:
    """Write luma frames (cropped to ``width`` x ``height``) with flat grey chroma."""
    with open(path, "wb") as fh:
        for f in frames:
            f = np.asarray(f, dtype=np.uint8)
            h = height or f.shape[0]
            w = width or f.shape[1]
            fh.write(np.ascontiguousarray(f[:h, :w]).tobytes())
            _, chroma_bytes = _frame_bytes(w, h, chroma)
            fh.write(bytes([128]) * chroma_bytes)


def block_origins(height: int, width: int, block_size: int = 16) -> list[tuple[int, int]]:
    """Top-left ``(row, col)`` of every block, raster order."""
    if height % block_size or width % block_size:
        raise ValueError(f"{width}x{height} is not a multiple of block size {block_size}")
    return [(r, c) for r in range(0, height, block_size)
            for c in range(0, width, block_size)]


def split_blocks(frame: np.ndarray, block_size: int = 16) -> np.ndarray:
    """Return blocks as an array of shape (n_blocks, block_size, block_size)."""
    h, w = frame.shape
    if h % block_size or w % block_size:
        raise ValueError(f"{w}x{h} is not a multiple of block size {block_size}")
    return (frame.reshape(h // block_size, block_size, w // block_size, block_size)
            .swapaxes(1, 2).reshape(-1, block_size, block_size))


def merge_blocks(blocks: Sequence[np.ndarray], height: int, width: int) -> np.ndarray:
    blocks = np.asarray(blocks)
    bs = blocks.shape[-1]
    return (blocks.reshape(height // bs, width // bs, bs, bs)
            .swapaxes(1, 2).reshape(height, width))


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(d * d))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio for 8-bit samples; ``inf`` for identical inputs."""
    err = mse(a, b)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / err)


"""Deterministic block occlusion.

An occlusion replaces a single axis-aligned rectangular block covering a
target percentage of the image area with a constant fill value. Placement is
uniform over all fully-interior positions and is driven by a counter-based
RNG (numpy Philox) keyed by the spec seed, so identical (spec, image shape)
inputs always produce the identical block.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np

from .data import ImageTensor


@dataclass(frozen=True)
class OcclusionSpec:
    """Occlusion parameters: area ratio in percent, seed, and fill value."""

    ratio_percent: float
    seed: int
    fill_value: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.ratio_percent <= 100.0:
            raise ValueError(f"ratio_percent must be in [0, 100], got {self.ratio_percent}")
        if not 0.0 <= self.fill_value <= 1.0:
            raise ValueError(f"fill_value must be in [0, 1], got {self.fill_value}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class BlockPlacement:
    """A concrete block location, guaranteed fully inside the image."""

    top: int
    left: int
    block_h: int
    block_w: int


def block_dims(ratio_percent: float, height: int, width: int) -> tuple[int, int]:
    """Block size covering ratio_percent of an height x width image.

    The block is square in side *fraction*: each side is round(f * dim) with
    f = sqrt(ratio_percent / 100), rounding half away from zero. Ratio 0
    gives (0, 0); ratio 100 gives (height, width). The realized area
    |bh * bw - (p/100) * H * W| is always within H + W + 1 pixels of nominal.
    """
    if not 0.0 <= ratio_percent <= 100.0:
        raise ValueError(f"ratio_percent must be in [0, 100], got {ratio_percent}")
    if height < 1 or width < 1:
        raise ValueError("image dimensions must be >= 1")
    f = math.sqrt(ratio_percent / 100.0)
    block_h = int(math.floor(f * height + 0.5))
    block_w = int(math.floor(f * width + 0.5))
    return min(block_h, height), min(block_w, width)


def place_block(spec: OcclusionSpec, height: int, width: int) -> BlockPlacement:
    """Choose the seeded block placement for an image of the given shape.

    The top-left corner is uniform over all positions keeping the block
    fully interior. Philox is counter-based, so placement depends only on
    (seed, ratio, height, width), never on evaluation order.
    """
    bh, bw = block_dims(spec.ratio_percent, height, width)
    rng = np.random.Generator(np.random.Philox(spec.seed))
    top = int(rng.integers(0, height - bh + 1))
    left = int(rng.integers(0, width - bw + 1))
    return BlockPlacement(top=top, left=left, block_h=bh, block_w=bw)


def apply_occlusion(image: ImageTensor, spec: OcclusionSpec) -> ImageTensor:
    """Return a copy of the image with one seeded block set to the fill value.

    The block covers all channels. Every pixel outside the block is
    bit-identical to the input; ratio 0 returns a pixel-identical copy. The
    input tensor is never mutated.
    """
    placement = place_block(spec, image.height, image.width)
    pixels = np.array(image.pixels, dtype=np.float64)
    if placement.block_h > 0 and placement.block_w > 0:
        pixels[
            placement.top : placement.top + placement.block_h,
            placement.left : placement.left + placement.block_w,
            :,
        ] = spec.fill_value
    return ImageTensor(
        height=image.height, width=image.width, channels=image.channels, pixels=pixels
    )


def derive_seed(base_seed: int, image_index: int, ratio_percent: float, trial: int,
                report_index: int | None = None) -> int:
    """Derive a per-(image, ratio, trial) occlusion seed from a run seed.

    Hashes the components with BLAKE2b and folds the digest into a u64, so
    every image/trial gets an independent, schedule-free placement stream.
    ``report_index`` participates only in the per-report resampling mode.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(b"xmrbench.occlusion.v1")
    h.update(struct.pack("<Q", base_seed % 2**64))
    h.update(struct.pack("<q", image_index))
    h.update(struct.pack("<d", float(ratio_percent)))
    h.update(struct.pack("<q", trial))
    if report_index is not None:
        h.update(struct.pack("<q", report_index))
    return struct.unpack("<Q", h.digest())[0]

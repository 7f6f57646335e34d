"""Per-model image preprocessing profiles.

Each profile fixes the inference-time pipeline its model family published:
resize the shortest side, center-crop to the square input size, scale to
[0, 1], then channel-normalize. The profile is echoed verbatim in the hello
metadata so a run records exactly how pixels were prepared. Occlusion has
already happened upstream; this module sees the corrupted bytes as-is.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, asdict

import numpy as np
from PIL import Image

CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class PreprocessProfile:
    resize_shortest_side: int
    center_crop: int
    interpolation: str
    mean: tuple[float, float, float]
    std: tuple[float, float, float]

    def to_dict(self) -> dict:
        return asdict(self)


def profile_for(model_name: str, input_size: int) -> PreprocessProfile:
    """Published inference preprocessing for each supported model family."""
    if model_name in ("clip", "cxr-repair"):
        # cxr-repair fine-tunes CLIP and keeps its pipeline
        return PreprocessProfile(
            resize_shortest_side=input_size,
            center_crop=input_size,
            interpolation="bicubic",
            mean=CLIP_MEAN,
            std=CLIP_STD,
        )
    if model_name in ("medclip", "cxr-clip"):
        return PreprocessProfile(
            resize_shortest_side=input_size,
            center_crop=input_size,
            interpolation="bicubic",
            mean=IMAGENET_MEAN,
            std=IMAGENET_STD,
        )
    raise ValueError(f"no preprocessing profile for {model_name!r}")


_RESAMPLING = {
    "bicubic": Image.BICUBIC,
    "bilinear": Image.BILINEAR,
}


def preprocess_png(png_bytes: bytes, profile: PreprocessProfile) -> np.ndarray:
    """PNG/JPEG bytes to a (1, 3, size, size) float32 array, normalized."""
    with Image.open(io.BytesIO(png_bytes)) as im:
        im.load()
        im = im.convert("RGB")
        w, h = im.size
        scale = profile.resize_shortest_side / min(w, h)
        im = im.resize(
            (max(1, round(w * scale)), max(1, round(h * scale))),
            _RESAMPLING[profile.interpolation],
        )
        w, h = im.size
        size = profile.center_crop
        left = (w - size) // 2
        top = (h - size) // 2
        im = im.crop((left, top, left + size, top + size))
        arr = np.asarray(im, dtype=np.float32) / 255.0
    arr = (arr - np.asarray(profile.mean, dtype=np.float32)) / np.asarray(
        profile.std, dtype=np.float32
    )
    return arr.transpose(2, 0, 1)[np.newaxis]

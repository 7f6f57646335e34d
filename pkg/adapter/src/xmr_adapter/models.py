"""Checkpoint loading and embedding for the supported dual encoders.

clip and cxr-repair checkpoints are CLIP-format directories loadable with
transformers; medclip and cxr-clip need their own ecosystems, so those
loaders fail with an actionable message unless the packages are installed.
Loading failures raise AdapterLoadError before any protocol traffic.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .preprocess import PreprocessProfile, preprocess_png, profile_for

MODEL_NAMES = ("clip", "cxr-repair", "medclip", "cxr-clip")
MAX_TEXT_TOKENS = 77


class AdapterLoadError(Exception):
    """The requested checkpoint cannot be loaded."""


def checkpoint_digest(path: str) -> str:
    """BLAKE2b digest over the checkpoint directory's file names and bytes."""
    h = hashlib.blake2b(digest_size=16)
    p = Path(path)
    if p.is_file():
        files = [p]
    else:
        files = sorted(f for f in p.rglob("*") if f.is_file())
    for f in files:
        h.update(f.name.encode("utf-8") + b"\0")
        h.update(f.read_bytes())
    return h.hexdigest()


class ClipFamilyModel:
    """A CLIP-architecture dual encoder behind the embedding interface."""

    def __init__(self, model_name: str, checkpoint: str):
        try:
            import torch
            from transformers import CLIPModel, CLIPTokenizer
        except ImportError as e:
            raise AdapterLoadError(f"transformers/torch unavailable: {e}") from None
        try:
            self._model = CLIPModel.from_pretrained(checkpoint)
            self._tokenizer = CLIPTokenizer.from_pretrained(checkpoint)
        except Exception as e:
            raise AdapterLoadError(
                f"cannot load CLIP checkpoint from {checkpoint!r}: {e}"
            ) from None
        self._torch = torch
        self._model.eval()  # inference mode: deterministic, no dropout
        self.model_name = model_name
        self.dim = int(self._model.config.projection_dim)
        self.profile: PreprocessProfile = profile_for(
            model_name, int(self._model.config.vision_config.image_size)
        )

    def embed_image(self, png_bytes: bytes) -> list[float]:
        pixels = self._torch.from_numpy(preprocess_png(png_bytes, self.profile))
        with self._torch.no_grad():
            out = self._model.get_image_features(pixel_values=pixels)
        return _to_floats(out)

    def embed_text(self, text: str) -> list[float]:
        enc = self._tokenizer(
            [text], return_tensors="pt", truncation=True, max_length=MAX_TEXT_TOKENS
        )
        with self._torch.no_grad():
            out = self._model.get_text_features(
                input_ids=enc["input_ids"], attention_mask=enc["attention_mask"]
            )
        return _to_floats(out)


def _to_floats(out) -> list[float]:
    # transformers >= 5 returns an output object; older versions a tensor
    if hasattr(out, "pooler_output"):
        out = out.pooler_output
    vec = np.asarray(out.detach().cpu(), dtype=np.float64).reshape(-1)
    if not np.isfinite(vec).all():
        raise ValueError("model produced non-finite features")
    return [float(x) for x in vec]


def load_model(model_name: str, checkpoint: str):
    if model_name not in MODEL_NAMES:
        raise AdapterLoadError(
            f"unknown model {model_name!r}; expected one of {', '.join(MODEL_NAMES)}"
        )
    if model_name in ("clip", "cxr-repair"):
        return ClipFamilyModel(model_name, checkpoint)
    if model_name == "medclip":
        try:
            import medclip  # noqa: F401
        except ImportError:
            raise AdapterLoadError(
                "medclip support needs the 'medclip' package and its weights; "
                "install it and retry"
            ) from None
        raise AdapterLoadError("medclip loading is not wired up in this build")
    try:
        import cxr_clip  # noqa: F401
    except ImportError:
        raise AdapterLoadError(
            "cxr-clip support needs the model's own package and weights; "
            "install it and retry"
        ) from None
    raise AdapterLoadError("cxr-clip loading is not wired up in this build")

"""The adapter executable: load a checkpoint, serve embeddings on stdio.

Usage: adapter --model clip --checkpoint /path/to/checkpoint

Exits nonzero before answering anything when the checkpoint cannot be
loaded; afterwards every request gets a response ({"error": ...} on
per-request failures) until shutdown or EOF.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .models import MODEL_NAMES, AdapterLoadError, checkpoint_digest, load_model
from .protocol import serve


class Handler:
    def __init__(self, model, checkpoint_hash: str, text_sections: str):
        self._model = model
        self._checkpoint_hash = checkpoint_hash
        self._text_sections = text_sections

    def hello(self) -> dict:
        return {
            "name": self._model.model_name,
            "dim": self._model.dim,
            "adapter_version": __version__,
            "checkpoint_hash": self._checkpoint_hash,
            "preprocessing": self._model.profile.to_dict(),
            "text_sections": self._text_sections,
        }

    def embed_image(self, id_: str, png_bytes: bytes) -> list[float]:
        return self._model.embed_image(png_bytes)

    def embed_text(self, id_: str, text: str) -> list[float]:
        return self._model.embed_text(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="adapter",
        description="Serve a pretrained dual-encoder over the embedder wire protocol.",
    )
    parser.add_argument("--model", required=True, choices=MODEL_NAMES)
    parser.add_argument("--checkpoint", required=True,
                        help="local checkpoint directory (or file) to load")
    parser.add_argument("--text-sections", default="findings,impression",
                        help="report sections the caller is expected to send, "
                             "recorded in hello metadata")
    args = parser.parse_args(argv)

    try:  # keep progress bars off the streams the protocol does not own
        from transformers.utils import logging as hf_logging

        hf_logging.disable_progress_bar()
        hf_logging.set_verbosity_error()
    except Exception:
        pass

    try:
        model = load_model(args.model, args.checkpoint)
        digest = checkpoint_digest(args.checkpoint)
    except AdapterLoadError as e:
        print(f"adapter: {e}", file=sys.stderr)
        return 1

    handler = Handler(model, digest, args.text_sections)
    return serve(handler, sys.stdin.buffer, sys.stdout.buffer)


if __name__ == "__main__":
    sys.exit(main())

"""Loopback embedder process for protocol tests.

Runs the wire protocol over stdio around a deterministic builtin embedder:
by default seeded-random vectors keyed by request id, or a fixed vector for
echo tests. Start it with ``python -m xmrbench.loopback``.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .embedders import Embedder, RandomEmbedder
from .wire import serve_embedder


class FixedEmbedder(Embedder):
    """Returns one constant vector for every request."""

    def __init__(self, values: list[float], name: str = "loopback-fixed"):
        self._vec = np.asarray(values, dtype=np.float64)
        if self._vec.ndim != 1 or self._vec.size == 0:
            raise ValueError("fixed vector must be non-empty")
        self.name = name

    @property
    def dim(self) -> int:
        return int(self._vec.size)

    def embed_image(self, image_id, image=None):
        return self._vec

    def embed_text(self, text_id, text):
        return self._vec


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m xmrbench.loopback", description=__doc__
    )
    parser.add_argument("--dim", type=int, default=16)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--name", default="loopback")
    parser.add_argument(
        "--fixed", default=None,
        help="comma-separated floats; reply with this exact vector every time",
    )
    args = parser.parse_args(argv)
    if args.fixed is not None:
        embedder = FixedEmbedder([float(x) for x in args.fixed.split(",")], name=args.name)
    else:
        embedder = RandomEmbedder(dim=args.dim, seed=args.seed, name=args.name)
    return serve_embedder(embedder, sys.stdin.buffer, sys.stdout.buffer)


if __name__ == "__main__":
    sys.exit(main())

"""Walkthrough: the embedding file format and the external-embedder protocol.

Writes an embedding table to its binary format and reads it back, then
spawns the loopback embedder as a child process and exchanges the full
message sequence of the wire protocol: hello, embed_image, embed_text,
shutdown.
"""

import sys
from pathlib import Path

import numpy as np

from xmrbench.data import ImageTensor
from xmrbench.embedders import EmbeddingTable, read_embeddings, write_embeddings
from xmrbench.wire import ExternalEmbedder

OUT = Path(__file__).parent / "out"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(3)

    table = EmbeddingTable.from_pairs(
        [(f"study_{i:03d}", rng.normal(size=12)) for i in range(5)]
    )
    path = OUT / "reports.xemb"
    write_embeddings(table, path)
    back = read_embeddings(path)
    print(f"wrote {path} ({path.stat().st_size} bytes), "
          f"read back {len(back)} entries of dim {back.dim}, "
          f"lossless: {back == table}")

    command = [sys.executable, "-m", "xmrbench.loopback", "--dim", "8", "--name", "demo"]
    print(f"\nspawning: {' '.join(command[1:])}")
    with ExternalEmbedder(command) as embedder:
        print(f"hello -> name={embedder.name!r} dim={embedder.dim}")
        image = ImageTensor.from_array(rng.random((16, 16)))
        v = embedder.embed_image("img-1", image)
        print(f"embed_image('img-1') -> first entries {np.round(v[:3], 4).tolist()}")
        t = embedder.embed_text("txt-1", "t3 t14")
        print(f"embed_text('txt-1')  -> first entries {np.round(t[:3], 4).tolist()}")
    print("shutdown -> child exited cleanly")


if __name__ == "__main__":
    main()

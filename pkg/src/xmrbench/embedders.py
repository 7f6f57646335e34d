"""Embedding tables, their binary file format, and pluggable embedders.

An embedder turns images and report texts into fixed-length vectors. Four
builtin kinds cover testing and desk-scale runs (toy encoder, seeded random,
study-id oracle, precomputed files); external model processes are reached
through the wire protocol in :mod:`xmrbench.wire`.

Embedding file layout (little-endian): magic ``XEMB``, u32 version=1,
u32 count, u32 dim, then per entry a u16 id byte-length, the UTF-8 id, and
dim float32 values.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import ImageTensor, Manifest, ReportText
from .scoring import EmbeddingVector
from . import toymodel

TABLE_MAGIC = b"XEMB"
TABLE_VERSION = 1
DEFAULT_TEXT_SECTIONS = ("findings", "impression")


class EmbeddingFileError(Exception):
    """Base class for embedding-file failures."""


class MagicMismatchError(EmbeddingFileError):
    pass


class VersionMismatchError(EmbeddingFileError):
    pass


class TruncatedFileError(EmbeddingFileError):
    pass


class DuplicateIdError(EmbeddingFileError):
    pass


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Ordered id -> vector mapping with one shared dimension.

    Vectors are stored float32, matching the on-disk format exactly so that
    write -> read round-trips are lossless.
    """

    ids: tuple[str, ...]
    vectors: np.ndarray
    dim: int

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return (
            self.ids == other.ids
            and self.dim == other.dim
            and np.array_equal(self.vectors, other.vectors)
        )

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=np.float32)
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if vecs.shape != (len(self.ids), self.dim):
            raise ValueError(f"vector block shape {vecs.shape} != ({len(self.ids)}, {self.dim})")
        if vecs.size and not np.isfinite(vecs).all():
            raise ValueError("embedding table contains non-finite values")
        seen: set[str] = set()
        for i in self.ids:
            if i in seen:
                raise DuplicateIdError(f"duplicate id {i!r}")
            seen.add(i)
        vecs.flags.writeable = False
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "vectors", vecs)

    @classmethod
    def from_pairs(cls, pairs, dim: int | None = None) -> "EmbeddingTable":
        pairs = list(pairs)
        if dim is None:
            if not pairs:
                raise ValueError("cannot infer dim from an empty table")
            dim = int(np.asarray(pairs[0][1]).size)
        ids = tuple(p[0] for p in pairs)
        if pairs:
            vecs = np.stack([np.asarray(v, dtype=np.float32).reshape(-1) for _, v in pairs])
        else:
            vecs = np.empty((0, dim), dtype=np.float32)
        return cls(ids=ids, vectors=vecs, dim=dim)

    def __len__(self) -> int:
        return len(self.ids)

    def vector(self, id: str) -> np.ndarray:
        return self.vectors[self.ids.index(id)]

    def entries(self) -> list[EmbeddingVector]:
        return [EmbeddingVector(id=i, values=self.vectors[n]) for n, i in enumerate(self.ids)]


def write_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Serialize a table; identical tables produce byte-identical files."""
    with open(path, "wb") as f:
        f.write(TABLE_MAGIC)
        f.write(struct.pack("<III", TABLE_VERSION, len(table), table.dim))
        for n, id_ in enumerate(table.ids):
            raw_id = id_.encode("utf-8")
            if len(raw_id) > 0xFFFF:
                raise ValueError(f"id too long for the u16 length field: {id_[:32]!r}...")
            f.write(struct.pack("<H", len(raw_id)))
            f.write(raw_id)
            f.write(table.vectors[n].astype("<f4").tobytes())


def read_embeddings(path: str | Path) -> EmbeddingTable:
    """Read a table, enforcing declared sizes before every access."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 4 or raw[:4] != TABLE_MAGIC:
        raise MagicMismatchError(f"bad magic {raw[:4]!r}, expected {TABLE_MAGIC!r}")
    if len(raw) < 16:
        raise TruncatedFileError("file ends inside the header")
    version, count, dim = struct.unpack("<III", raw[4:16])
    if version != TABLE_VERSION:
        raise VersionMismatchError(f"unsupported version {version}")
    if dim == 0:
        raise EmbeddingFileError("declared dim must be >= 1")
    offset = 16
    ids: list[str] = []
    vec_bytes = 4 * dim
    vecs = np.empty((count, dim), dtype=np.float32)
    for n in range(count):
        if offset + 2 > len(raw):
            raise TruncatedFileError(f"entry {n}: file ends inside the id length")
        (id_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        if offset + id_len + vec_bytes > len(raw):
            raise TruncatedFileError(f"entry {n}: declared sizes exceed the file")
        ids.append(raw[offset : offset + id_len].decode("utf-8"))
        offset += id_len
        vecs[n] = np.frombuffer(raw, dtype="<f4", count=dim, offset=offset)
        offset += vec_bytes
    if offset != len(raw):
        raise EmbeddingFileError(f"{len(raw) - offset} trailing bytes after {count} entries")
    return EmbeddingTable(ids=tuple(ids), vectors=vecs, dim=dim)


def report_text_for_embedding(report: ReportText,
                              sections=DEFAULT_TEXT_SECTIONS) -> str:
    """Join the selected non-empty report sections into the embed input."""
    parts = [report.sections[s].strip() for s in sections if report.has_section(s)]
    return " ".join(parts)


def derived_vector(seed: int, domain: str, id: str, dim: int) -> np.ndarray:
    """Deterministic standard-normal vector keyed by (seed, domain, id)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(b"xmrbench.embed.v1\x00")
    h.update(struct.pack("<Q", seed % 2**64))
    h.update(domain.encode("utf-8") + b"\x00")
    h.update(id.encode("utf-8"))
    sub_seed = struct.unpack("<Q", h.digest())[0]
    rng = np.random.Generator(np.random.Philox(sub_seed))
    return rng.standard_normal(dim)


# ---------------------------------------------------------------------------
# Embedders
# ---------------------------------------------------------------------------

class Embedder:
    """Interface every embedder implements.

    ``needs_images`` tells the harness whether pixel data must be loaded and
    occluded at all; pixel-blind embedders accept image=None.
    """

    name: str = "embedder"
    needs_images: bool = True

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def embed_image(self, image_id: str, image: ImageTensor | None) -> np.ndarray:
        raise NotImplementedError

    def embed_text(self, text_id: str, text: str) -> np.ndarray:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class RandomEmbedder(Embedder):
    """Seeded random vectors per id; pixel-blind by construction."""

    needs_images = False

    def __init__(self, dim: int, seed: int, name: str = "builtin-random"):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self._dim = dim
        self.seed = seed
        self.name = name

    @property
    def dim(self) -> int:
        return self._dim

    def embed_image(self, image_id: str, image=None) -> np.ndarray:
        return derived_vector(self.seed, "image", image_id, self._dim)

    def embed_text(self, text_id: str, text: str) -> np.ndarray:
        return derived_vector(self.seed, "text", text_id, self._dim)


class OracleEmbedder(Embedder):
    """Pixel-blind perfect retriever: one-hot per study for both modalities.

    Images map to the one-hot unit of their owning study, report ids to the
    same unit, so the true pair always scores 1 under cosine and everything
    else scores 0.
    """

    needs_images = False
    name = "builtin-oracle"

    def __init__(self, manifest: Manifest):
        if manifest.report_count == 0:
            raise ValueError("oracle embedder needs a non-empty manifest")
        self._study_index = {s.study_id: i for i, s in enumerate(manifest.studies)}
        self._image_study = {
            ref: s.study_id for s in manifest.studies for ref in s.image_refs
        }
        self._dim = len(self._study_index)

    @property
    def dim(self) -> int:
        return self._dim

    def _one_hot(self, study_id: str) -> np.ndarray:
        v = np.zeros(self._dim)
        v[self._study_index[study_id]] = 1.0
        return v

    def embed_image(self, image_id: str, image=None) -> np.ndarray:
        if image_id not in self._image_study:
            raise KeyError(f"image {image_id!r} not in the oracle's manifest")
        return self._one_hot(self._image_study[image_id])

    def embed_text(self, text_id: str, text: str) -> np.ndarray:
        if text_id not in self._study_index:
            raise KeyError(f"study {text_id!r} not in the oracle's manifest")
        return self._one_hot(text_id)


class ToyEmbedder(Embedder):
    """Runs the trained toy dual encoder; text is tokenized by ``t<id>``."""

    name = "builtin-toy"

    def __init__(self, params: toymodel.ToyEncoderParams):
        self.params = params

    @classmethod
    def from_file(cls, path: str | Path) -> "ToyEmbedder":
        return cls(toymodel.load_params(path))

    @property
    def dim(self) -> int:
        return self.params.embed_dim

    def embed_image(self, image_id: str, image: ImageTensor | None) -> np.ndarray:
        if image is None:
            raise ValueError("toy embedder needs pixel data")
        return toymodel.encode_image(self.params, image)

    def embed_text(self, text_id: str, text: str) -> np.ndarray:
        tokens = toymodel.parse_tokens(text)
        if not tokens:
            raise ValueError(f"no t<id> tokens found in text for {text_id!r}")
        return toymodel.encode_text(self.params, tokens)


class FileEmbedder(Embedder):
    """Serves precomputed embeddings from table files; pixel-blind."""

    needs_images = False
    name = "file"

    def __init__(self, image_table: EmbeddingTable, text_table: EmbeddingTable):
        if image_table.dim != text_table.dim:
            raise ValueError(
                f"image/text table dims differ: {image_table.dim} vs {text_table.dim}"
            )
        self._images = {i: image_table.vectors[n] for n, i in enumerate(image_table.ids)}
        self._texts = {i: text_table.vectors[n] for n, i in enumerate(text_table.ids)}
        self._dim = image_table.dim

    @classmethod
    def from_files(cls, image_path: str | Path, text_path: str | Path) -> "FileEmbedder":
        return cls(read_embeddings(image_path), read_embeddings(text_path))

    @property
    def dim(self) -> int:
        return self._dim

    def embed_image(self, image_id: str, image=None) -> np.ndarray:
        try:
            return np.asarray(self._images[image_id], dtype=np.float64)
        except KeyError:
            raise KeyError(f"image id {image_id!r} not in the embedding file") from None

    def embed_text(self, text_id: str, text: str) -> np.ndarray:
        try:
            return np.asarray(self._texts[text_id], dtype=np.float64)
        except KeyError:
            raise KeyError(f"report id {text_id!r} not in the embedding file") from None


@dataclass(frozen=True)
class EmbedderSpec:
    """Parsed ``--embedder`` argument: exactly one kind plus its parameters."""

    kind: str  # toy | random | oracle | file | process
    toy_params_path: str | None = None
    random_dim: int | None = None
    image_table_path: str | None = None
    text_table_path: str | None = None
    command: tuple[str, ...] | None = None
    normalize: bool = False

    def __post_init__(self):
        if self.kind not in ("toy", "random", "oracle", "file", "process"):
            raise ValueError(f"unknown embedder kind {self.kind!r}")


def parse_embedder_spec(text: str, normalize: bool = False) -> EmbedderSpec:
    """Parse an embedder spec string.

    Grammar: ``toy:<params-file>`` | ``random:<dim>`` | ``oracle`` |
    ``file:<image-table>,<text-table>`` | ``process:<command line>``.
    """
    kind, _, rest = text.partition(":")
    if kind == "toy":
        if not rest:
            raise ValueError("toy embedder needs a parameter file: toy:<path>")
        return EmbedderSpec(kind="toy", toy_params_path=rest, normalize=normalize)
    if kind == "random":
        if not rest:
            raise ValueError("random embedder needs a dimension: random:<dim>")
        try:
            dim = int(rest)
        except ValueError:
            raise ValueError(f"random embedder dim must be an integer, got {rest!r}") from None
        return EmbedderSpec(kind="random", random_dim=dim, normalize=normalize)
    if kind == "oracle":
        if rest:
            raise ValueError("oracle embedder takes no parameters")
        return EmbedderSpec(kind="oracle", normalize=normalize)
    if kind == "file":
        paths = rest.split(",") if rest else []
        if len(paths) != 2:
            raise ValueError("file embedder needs two paths: file:<images>,<texts>")
        return EmbedderSpec(
            kind="file", image_table_path=paths[0], text_table_path=paths[1],
            normalize=normalize,
        )
    if kind == "process":
        import shlex

        argv = tuple(shlex.split(rest))
        if not argv:
            raise ValueError("process embedder needs a command line: process:<cmd ...>")
        return EmbedderSpec(kind="process", command=argv, normalize=normalize)
    raise ValueError(f"unknown embedder kind {kind!r}")


def build_embedder(spec: EmbedderSpec, manifest: Manifest | None = None,
                   seed: int = 0, timeout: float = 60.0) -> Embedder:
    """Instantiate the embedder an EmbedderSpec describes."""
    if spec.kind == "toy":
        return ToyEmbedder.from_file(spec.toy_params_path)
    if spec.kind == "random":
        return RandomEmbedder(dim=spec.random_dim, seed=seed)
    if spec.kind == "oracle":
        if manifest is None:
            raise ValueError("oracle embedder requires a manifest")
        return OracleEmbedder(manifest)
    if spec.kind == "file":
        return FileEmbedder.from_files(spec.image_table_path, spec.text_table_path)
    from .wire import ExternalEmbedder

    return ExternalEmbedder(list(spec.command), timeout=timeout)

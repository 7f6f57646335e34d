"""Domain types and ingestion for image/report study collections.

A benchmark run operates on a *manifest*: a line-delimited JSON file listing
studies, where each study pairs one or more image files with a single
sectioned report. Images are decoded to unit-interval float tensors so that
downstream corruption semantics are independent of the on-disk format.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

SECTION_NAMES = ("history", "comparison", "findings", "impression")


class ManifestError(Exception):
    """Base class for manifest ingestion failures."""


class ManifestParseError(ManifestError):
    """A manifest line is not a well-formed study record."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ManifestValidationError(ManifestError):
    """Parsed records violate a manifest invariant (e.g. duplicate ids)."""


class ImageDecodeError(Exception):
    """Raised when bytes cannot be decoded into a supported image."""


@dataclass(frozen=True)
class ImageTensor:
    """H x W x C pixel array with all values in [0, 1].

    ``pixels`` is row-major with shape (height, width, channels) and is
    treated as immutable after construction.
    """

    height: int
    width: int
    channels: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("image dimensions must be positive")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"pixel buffer shape {px.shape} does not match "
                f"({self.height}, {self.width}, {self.channels})"
            )
        if not np.isfinite(px).all() or px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, pixels: np.ndarray) -> "ImageTensor":
        """Build a tensor from an (H, W) or (H, W, C) array in [0, 1]."""
        px = np.asarray(pixels, dtype=np.float64)
        if px.ndim == 2:
            px = px[:, :, np.newaxis]
        if px.ndim != 3:
            raise ValueError(f"expected 2-D or 3-D array, got shape {px.shape}")
        h, w, c = px.shape
        return cls(height=h, width=w, channels=c, pixels=px)

    def flat(self) -> np.ndarray:
        """Row-major flattened pixel view of length H*W*C."""
        return self.pixels.reshape(-1)


@dataclass(frozen=True)
class ReportText:
    """Sectioned report text.

    ``sections`` maps lowercase section names (one of ``SECTION_NAMES``) to
    their text. Unknown sections are never stored here; they survive only in
    ``raw``.
    """

    sections: dict[str, str]
    raw: str

    def __post_init__(self):
        unknown = set(self.sections) - set(SECTION_NAMES)
        if unknown:
            raise ValueError(f"unknown report sections: {sorted(unknown)}")

    def section(self, name: str) -> str:
        return self.sections.get(name, "")

    def has_section(self, name: str) -> bool:
        """True if the section exists with at least one non-whitespace char."""
        return bool(self.sections.get(name, "").strip())


@dataclass(frozen=True)
class StudyRecord:
    """One study: a unique id, its image references, and the paired report."""

    study_id: str
    image_refs: tuple[str, ...]
    report: ReportText

    def __post_init__(self):
        if not self.image_refs:
            raise ValueError(f"study {self.study_id!r} has no image refs")
        object.__setattr__(self, "image_refs", tuple(self.image_refs))


@dataclass(frozen=True)
class Manifest:
    """An ordered collection of studies with cached image/report counts.

    Ground-truth relevance is implicit: each image matches exactly the
    report of its own study.
    """

    studies: tuple[StudyRecord, ...]
    image_count: int = field(init=False)
    report_count: int = field(init=False)

    def __post_init__(self):
        studies = tuple(self.studies)
        seen: set[str] = set()
        for s in studies:
            if s.study_id in seen:
                raise ManifestValidationError(f"duplicate study_id {s.study_id!r}")
            seen.add(s.study_id)
        object.__setattr__(self, "studies", studies)
        object.__setattr__(self, "image_count", sum(len(s.image_refs) for s in studies))
        object.__setattr__(self, "report_count", len(studies))


def _study_from_obj(obj: object, line_no: int) -> StudyRecord:
    if not isinstance(obj, dict):
        raise ManifestParseError(line_no, "study record must be a JSON object")
    try:
        study_id = obj["study_id"]
        images = obj["images"]
        report = obj["report"]
    except KeyError as e:
        raise ManifestParseError(line_no, f"missing field {e.args[0]!r}") from None
    if not isinstance(study_id, str) or not study_id:
        raise ManifestParseError(line_no, "study_id must be a non-empty string")
    if not isinstance(images, list) or not images or not all(isinstance(p, str) for p in images):
        raise ManifestParseError(line_no, "images must be a non-empty array of paths")
    if not isinstance(report, dict) or not isinstance(report.get("raw"), str):
        raise ManifestParseError(line_no, "report must be an object with a 'raw' string")
    sections = {}
    for name in SECTION_NAMES:
        if name in report:
            if not isinstance(report[name], str):
                raise ManifestParseError(line_no, f"report section {name!r} must be a string")
            sections[name] = report[name]
    return StudyRecord(
        study_id=study_id,
        image_refs=tuple(images),
        report=ReportText(sections=sections, raw=report["raw"]),
    )


def load_manifest(path: str | Path) -> Manifest:
    """Load a manifest from a UTF-8 file with one JSON study object per line.

    Blank lines are ignored. Malformed lines raise ManifestParseError naming
    the 1-based line number; duplicate study ids raise
    ManifestValidationError. Study order follows file order.
    """
    studies: list[StudyRecord] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestParseError(line_no, f"invalid JSON: {e.msg}") from None
            studies.append(_study_from_obj(obj, line_no))
    return Manifest(studies=tuple(studies))


def study_to_obj(study: StudyRecord) -> dict:
    """JSON-serializable form of a study, matching the manifest line schema."""
    report: dict[str, str] = {}
    for name in SECTION_NAMES:
        if name in study.report.sections:
            report[name] = study.report.sections[name]
    report["raw"] = study.report.raw
    return {"study_id": study.study_id, "images": list(study.image_refs), "report": report}


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    """Write a manifest as line-delimited JSON; load_manifest round-trips it."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for study in manifest.studies:
            f.write(json.dumps(study_to_obj(study), sort_keys=True) + "\n")


def filter_studies(manifest: Manifest) -> Manifest:
    """Keep only studies whose report has non-empty findings AND impression.

    Non-empty means at least one non-whitespace character. Counts are
    recomputed; filtering to an empty manifest is legal. Idempotent.
    """
    kept = tuple(
        s
        for s in manifest.studies
        if s.report.has_section("findings") and s.report.has_section("impression")
    )
    return Manifest(studies=kept)


def decode_image(data: bytes) -> ImageTensor:
    """Decode PNG or JPEG bytes to an ImageTensor scaled to [0, 1].

    Grayscale inputs stay single-channel; palette and alpha images are
    flattened to RGB. Unsupported or corrupt encodings raise
    ImageDecodeError.
    """
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode == "1":
                im = im.convert("L")
            elif im.mode in ("P", "RGBA", "CMYK", "YCbCr"):
                im = im.convert("RGB")
            elif im.mode == "LA":
                im = im.convert("L")
            if im.mode not in ("L", "RGB"):
                raise ImageDecodeError(f"unsupported image mode {im.mode!r}")
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except ImageDecodeError:
        raise
    except (UnidentifiedImageError, OSError, ValueError) as e:
        raise ImageDecodeError(f"cannot decode image: {e}") from None
    return ImageTensor.from_array(arr)


def load_image(path: str | Path) -> ImageTensor:
    """Read and decode an image file."""
    with open(path, "rb") as f:
        return decode_image(f.read())


def encode_image(image: ImageTensor, format: str = "PNG") -> bytes:
    """Encode a tensor as 8-bit PNG or JPEG bytes (values rounded to 0..255)."""
    arr = np.clip(np.rint(image.pixels * 255.0), 0, 255).astype(np.uint8)
    if image.channels == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(arr, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format=format)
    return buf.getvalue()


def save_image(image: ImageTensor, path: str | Path, format: str | None = None) -> None:
    """Write an image file, inferring the format from the suffix if not given."""
    if format is None:
        suffix = Path(path).suffix.lower()
        format = {".jpg": "JPEG", ".jpeg": "JPEG"}.get(suffix, "PNG")
    with open(path, "wb") as f:
        f.write(encode_image(image, format=format))

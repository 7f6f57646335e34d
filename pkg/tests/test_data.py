"""Manifest ingestion, study filtering, and image codec tests."""

import json

import numpy as np
import pytest

from xmrbench.data import (
    ImageDecodeError,
    ImageTensor,
    Manifest,
    ManifestParseError,
    ManifestValidationError,
    ReportText,
    StudyRecord,
    decode_image,
    encode_image,
    filter_studies,
    load_manifest,
    write_manifest,
)

from conftest import make_study


def write_lines(path, objs):
    with open(path, "w", encoding="utf-8") as f:
        for obj in objs:
            f.write(json.dumps(obj) + "\n")


def study_obj(study_id, images=("a.png",), **sections):
    report = {k: v for k, v in sections.items()}
    report.setdefault("raw", "raw text")
    return {"study_id": study_id, "images": list(images), "report": report}


class TestLoadManifest:
    def test_counts(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(path, [
            study_obj("s1", images=("a.png", "b.png")),
            study_obj("s2", images=("c.png",)),
        ])
        m = load_manifest(path)
        assert m.image_count == 3
        assert m.report_count == 2
        assert [s.study_id for s in m.studies] == ["s1", "s2"]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text("")
        m = load_manifest(path)
        assert m.image_count == 0 and m.report_count == 0

    def test_duplicate_study_id(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(path, [study_obj("dup"), study_obj("dup")])
        with pytest.raises(ManifestValidationError, match="dup"):
            load_manifest(path)

    @pytest.mark.parametrize("bad_line", [
        "{not json",
        '{"study_id": "s", "images": []}',
        '{"study_id": "s", "images": ["a.png"]}',
        '{"study_id": "s", "images": ["a.png"], "report": {}}',
        '[1, 2]',
    ])
    def test_malformed_line_names_line_number(self, tmp_path, bad_line):
        path = tmp_path / "m.jsonl"
        path.write_text(json.dumps(study_obj("ok")) + "\n" + bad_line + "\n")
        with pytest.raises(ManifestParseError, match="line 2"):
            load_manifest(path)

    def test_round_trip(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(path, [
            study_obj("s1", images=("a.png", "b.png"), findings="F", impression="I"),
            study_obj("s2", history="H", raw="full text"),
        ])
        m1 = load_manifest(path)
        out = tmp_path / "copy.jsonl"
        write_manifest(m1, out)
        m2 = load_manifest(out)
        assert m1 == m2

    def test_unknown_sections_survive_only_in_raw(self, tmp_path):
        path = tmp_path / "m.jsonl"
        obj = study_obj("s1", findings="F", raw="TECHNIQUE: pa\nFINDINGS: F")
        obj["report"]["technique"] = "pa"
        write_lines(path, [obj])
        m = load_manifest(path)
        assert "technique" not in m.studies[0].report.sections
        assert "TECHNIQUE" in m.studies[0].report.raw


class TestFilterStudies:
    def test_keeps_findings_and_impression(self):
        m = Manifest(studies=(make_study("keep", findings="F", impression="I"),))
        assert filter_studies(m).report_count == 1

    @pytest.mark.parametrize("kwargs", [
        {"impression": ""},
        {"findings": ""},
        {"findings": "   \n\t"},
        {"findings": "", "impression": ""},
    ])
    def test_drops_incomplete_reports(self, kwargs):
        m = Manifest(studies=(make_study("drop", **kwargs),))
        assert filter_studies(m).report_count == 0

    def test_idempotent_and_never_grows(self, small_manifest):
        once = filter_studies(small_manifest)
        twice = filter_studies(once)
        assert once == twice
        assert once.report_count <= small_manifest.report_count
        assert once.image_count <= small_manifest.image_count

    def test_recomputes_counts(self, small_manifest):
        filtered = filter_studies(small_manifest)
        assert filtered.report_count == 2
        assert filtered.image_count == 3


class TestImageTensor:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            ImageTensor.from_array(np.full((2, 2), 1.5))

    def test_rejects_bad_channels(self):
        with pytest.raises(ValueError, match="channels"):
            ImageTensor.from_array(np.zeros((2, 2, 4)))

    def test_pixels_immutable(self, gray_image):
        with pytest.raises(ValueError):
            gray_image.pixels[0, 0, 0] = 0.5

    def test_flat_is_row_major(self):
        arr = np.arange(6, dtype=np.float64).reshape(2, 3, 1) / 10.0
        t = ImageTensor.from_array(arr)
        assert t.flat().tolist() == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]


class TestImageCodec:
    def test_decode_normalizes_8bit(self):
        arr = np.array([[0, 128], [255, 17]], dtype=np.uint8)
        from PIL import Image
        import io
        buf = io.BytesIO()
        Image.fromarray(arr, mode="L").save(buf, format="PNG")
        t = decode_image(buf.getvalue())
        assert t.channels == 1
        assert t.pixels[0, 0, 0] == 0.0
        assert t.pixels[1, 0, 0] == 1.0
        assert t.pixels[0, 1, 0] == pytest.approx(128 / 255, abs=1e-12)

    def test_grayscale_stays_single_channel(self, gray_image):
        again = decode_image(encode_image(gray_image, format="PNG"))
        assert again.channels == 1
        assert (again.height, again.width) == (gray_image.height, gray_image.width)

    def test_rgb_round_trip_exact_for_8bit_values(self, rgb_image):
        # quantize first so the PNG round trip is lossless
        q = ImageTensor.from_array(np.rint(rgb_image.pixels * 255) / 255.0)
        again = decode_image(encode_image(q, format="PNG"))
        np.testing.assert_allclose(again.pixels, q.pixels, atol=1e-12)

    def test_decode_garbage_raises(self):
        with pytest.raises(ImageDecodeError):
            decode_image(b"definitely not an image")

    def test_jpeg_supported(self, gray_image):
        t = decode_image(encode_image(gray_image, format="JPEG"))
        assert (t.height, t.width) == (gray_image.height, gray_image.width)


class TestRecordValidation:
    def test_study_needs_images(self):
        with pytest.raises(ValueError, match="image refs"):
            StudyRecord(study_id="s", image_refs=(), report=ReportText(sections={}, raw=""))

    def test_report_rejects_unknown_section_keys(self):
        with pytest.raises(ValueError, match="unknown report sections"):
            ReportText(sections={"technique": "pa"}, raw="")

import io
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smotkit.data_io import (
    AffineTransform,
    Detection,
    SequencePair,
    build_pairs,
    load_affines,
    load_mot_sequences,
    parse_coco_vid,
    parse_mot,
    write_mot,
)
from smotkit.errors import PairingError, ValidationError
from smotkit.geometry import BoundingBox


def det(frame, tid, l=10.0, t=20.0, w=16.0, h=16.0, conf=1.0):
    return Detection(frame, tid, BoundingBox(l, t, w, h), conf)


class TestParseMot:
    def test_full_line(self):
        out = parse_mot("1,1,10,20,16,16,1,-1,-1,-1\n")
        assert out == [det(1, 1)]

    def test_raw_detection_without_id(self):
        out = parse_mot("3,-1,0,0,8,8,0.9\n")
        assert len(out) == 1
        assert out[0].track_id is None
        assert out[0].confidence == 0.9

    def test_seven_to_ten_fields_accepted(self):
        for extra in ("", ",-1", ",-1,-1", ",-1,-1,-1"):
            assert len(parse_mot(f"1,1,0,0,4,4,0.5{extra}\n")) == 1

    def test_preserves_file_order(self):
        out = parse_mot("2,1,0,0,4,4,1\n1,1,0,0,4,4,1\n")
        assert [d.frame for d in out] == [2, 1]

    @pytest.mark.parametrize("line,fragment", [
        ("1,1,10,20,0,16,1", "line 1"),
        ("1,1,10,20,16,-3,1", "line 1"),
        ("1,1,10,20,16", "line 1"),
        ("one,1,10,20,16,16,1", "line 1"),
        ("0,1,10,20,16,16,1", "line 1"),
        ("1,1,10,20,16,16,1.5", "line 1"),
    ])
    def test_bad_lines_carry_line_number(self, line, fragment):
        with pytest.raises(ValidationError, match=fragment):
            parse_mot(line + "\n")

    def test_error_names_later_line(self):
        text = "1,1,0,0,4,4,1\n2,1,0,0,4,4,1\n3,1,0,0,0,4,1\n"
        with pytest.raises(ValidationError, match="line 3"):
            parse_mot(text)

    def test_gt_consider_flag_zero_drops_row(self):
        text = "1,1,0,0,4,4,1\n1,2,9,9,4,4,0\n"
        out = parse_mot(text, is_gt=True)
        assert [d.track_id for d in out] == [1]
        assert out[0].confidence == 1.0

    def test_blank_lines_skipped(self):
        assert len(parse_mot("\n1,1,0,0,4,4,1\n\n")) == 1


class TestWriteMot:
    def test_exact_line_format(self):
        buf = io.StringIO()
        write_mot([det(1, 2, 10.5, 20.25, 16.125, 8.0, 0.5)], buf)
        assert buf.getvalue() == "1,2,10.500,20.250,16.125,8.000,0.5000,-1,-1,-1\n"

    def test_sorted_by_frame_then_id(self):
        buf = io.StringIO()
        write_mot([det(2, 1), det(1, 2), det(1, 1)], buf)
        heads = [line.split(",")[:2] for line in buf.getvalue().splitlines()]
        assert heads == [["1", "1"], ["1", "2"], ["2", "1"]]

    def test_empty_gives_empty_stream(self):
        buf = io.StringIO()
        write_mot([], buf)
        assert buf.getvalue() == ""

    def test_missing_id_written_as_minus_one(self):
        buf = io.StringIO()
        write_mot([det(1, None)], buf)
        assert buf.getvalue().startswith("1,-1,")


# quantized to the written precision so the round trip is exact
q3 = st.integers(0, 4_000_000).map(lambda n: n / 1000.0)
dim3 = st.integers(1, 2_000_000).map(lambda n: n / 1000.0)
q4 = st.integers(0, 10_000).map(lambda n: n / 10000.0)


@st.composite
def quantized_detections(draw):
    n = draw(st.integers(0, 12))
    dets = []
    used = set()
    for _ in range(n):
        frame = draw(st.integers(1, 6))
        tid = draw(st.integers(1, 5))
        if (frame, tid) in used:
            continue
        used.add((frame, tid))
        dets.append(Detection(frame, tid,
                              BoundingBox(draw(q3), draw(q3), draw(dim3), draw(dim3)),
                              draw(q4)))
    return dets


class TestRoundTrip:
    @settings(max_examples=40)
    @given(quantized_detections())
    def test_write_then_parse_is_identity(self, dets):
        buf = io.StringIO()
        write_mot(dets, buf)
        got = parse_mot(buf.getvalue())
        want = sorted(dets, key=lambda d: (d.frame, d.track_id))
        assert got == want

    @settings(max_examples=25)
    @given(quantized_detections(), st.randoms())
    def test_line_order_does_not_matter(self, dets, rnd):
        if not dets:
            return
        buf = io.StringIO()
        write_mot(dets, buf)
        lines = buf.getvalue().splitlines()
        rnd.shuffle(lines)
        a = SequencePair("s", parse_mot(buf.getvalue()), [])
        b = SequencePair("s", parse_mot("\n".join(lines) + "\n"), [])
        assert a == b


class TestSequencePair:
    def test_duplicate_frame_id_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            SequencePair("s", [det(1, 1), det(1, 1, l=50)], [])

    def test_frame_beyond_count_rejected(self):
        with pytest.raises(ValidationError, match="exceeds frame count"):
            SequencePair("s", [det(5, 1)], [], frame_count=3)

    def test_frame_count_inferred(self):
        pair = SequencePair("s", [det(3, 1)], [det(7, 1)])
        assert pair.frame_count == 7

    def test_gt_requires_ids(self):
        with pytest.raises(ValidationError, match="track id"):
            SequencePair("s", [det(1, None)], [])

    def test_detections_are_canonically_sorted(self):
        pair = SequencePair("s", [det(2, 1), det(1, 1)], [])
        assert [d.frame for d in pair.gt] == [1, 2]


class TestCocoVid:
    def _doc(self):
        return {
            "videos": [{"id": 1, "name": "clip_a", "frame_count": 4}],
            "images": [
                {"id": 100 + i, "video_id": 1, "frame_index": i + 1} for i in range(4)
            ],
            "annotations": [
                {"id": i, "image_id": 100 + i, "bbox": [1.0 * i, 2.0, 8.0, 8.0],
                 "track_id": 3, "category_id": 1} for i in range(4)
            ],
        }

    def test_minimal_document(self):
        pairs = parse_coco_vid(json.dumps(self._doc()))
        assert len(pairs) == 1
        pair = pairs[0]
        assert pair.name == "clip_a"
        assert pair.frame_count == 4
        assert len(pair.gt) == 4
        assert pair.gt[0].box == BoundingBox(0.0, 2.0, 8.0, 8.0)
        assert {d.track_id for d in pair.gt} == {3}

    def test_missing_image_reference(self):
        doc = self._doc()
        doc["annotations"][0]["image_id"] = 999
        with pytest.raises(ValidationError, match="image"):
            parse_coco_vid(json.dumps(doc))

    def test_missing_video_reference(self):
        doc = self._doc()
        doc["images"][0]["video_id"] = 42
        with pytest.raises(ValidationError, match="video"):
            parse_coco_vid(json.dumps(doc))

    def test_duplicate_frame_track_pair(self):
        doc = self._doc()
        doc["annotations"].append(
            {"id": 9, "image_id": 100, "bbox": [5, 5, 4, 4], "track_id": 3}
        )
        with pytest.raises(ValidationError, match="duplicate"):
            parse_coco_vid(json.dumps(doc))

    def test_frame_index_is_one_based(self):
        doc = self._doc()
        doc["images"][0]["frame_index"] = 0
        with pytest.raises(ValidationError):
            parse_coco_vid(json.dumps(doc))


class TestAffines:
    def test_identity_row(self):
        out = load_affines("2,1,0,0,0,1,0\n")
        assert out[2].is_identity

    def test_pure_translation(self):
        t = load_affines("2,1,0,5,0,1,-3\n")[2]
        import numpy as np
        got = t.apply_points(np.array([[0.0, 0.0], [1.0, 2.0]]))
        np.testing.assert_allclose(got, [[5.0, -3.0], [6.0, -1.0]])

    def test_singular_rejected(self):
        with pytest.raises(ValidationError, match="singular"):
            load_affines("2,1,1,0,1,1,0\n")

    def test_frame_below_two_rejected(self):
        with pytest.raises(ValidationError, match=">= 2"):
            load_affines("1,1,0,0,0,1,0\n")

    def test_duplicate_frame_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            load_affines("2,1,0,0,0,1,0\n2,1,0,1,0,1,0\n")

    def test_optional_header_skipped(self):
        out = load_affines("frame,a,b,tx,c,d,ty\n2,1,0,0,0,1,0\n")
        assert sorted(out) == [2]

    def test_inverse_composes_to_identity(self):
        import numpy as np
        t = AffineTransform(0.8, -0.2, 3.0, 0.1, 1.1, -4.0)
        pts = np.array([[0.0, 0.0], [10.0, -5.0], [3.3, 7.7]])
        np.testing.assert_allclose(t.inverse().apply_points(t.apply_points(pts)),
                                   pts, atol=1e-9)


class TestSequenceLoading:
    def test_directory_of_files(self, tmp_path):
        (tmp_path / "a.txt").write_text("1,1,0,0,4,4,1\n")
        (tmp_path / "b.csv").write_text("1,1,5,5,4,4,1\n")
        (tmp_path / "notes.md").write_text("ignored\n")
        out = load_mot_sequences(tmp_path, is_gt=True)
        assert sorted(out) == ["a", "b"]

    def test_single_file_named_by_stem(self, tmp_path):
        p = tmp_path / "seq01.txt"
        p.write_text("1,1,0,0,4,4,1\n")
        out = load_mot_sequences(p)
        assert list(out) == ["seq01"]

    def test_empty_directory_rejected(self, tmp_path):
        with pytest.raises(ValidationError, match="no detection files"):
            load_mot_sequences(tmp_path)

    def test_parse_error_names_file(self, tmp_path):
        (tmp_path / "bad.txt").write_text("1,1,0,0,0,4,1\n")
        with pytest.raises(ValidationError, match="bad.txt"):
            load_mot_sequences(tmp_path)


class TestBuildPairs:
    def test_pairs_by_name(self):
        gt = {"a": [det(1, 1)], "b": [det(1, 1)]}
        pred = {"b": [det(1, 2)], "a": [det(1, 2)]}
        pairs = build_pairs(gt, pred)
        assert [p.name for p in pairs] == ["a", "b"]

    def test_missing_pred_sequence_named(self):
        gt = {"a": [det(1, 1)], "b": [det(1, 1)]}
        with pytest.raises(PairingError, match="b"):
            build_pairs(gt, {"a": [det(1, 2)]})

    def test_unexpected_pred_sequence_named(self):
        gt = {"a": [det(1, 1)]}
        with pytest.raises(PairingError, match="stray"):
            build_pairs(gt, {"a": [det(1, 2)], "stray": [det(1, 2)]})

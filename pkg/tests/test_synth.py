import io
import math

import pytest

from smotkit.data_io import SequencePair, write_mot
from smotkit.errors import ValidationError
from smotkit.metrics import so_hota_suite
from smotkit.synth import (
    DISPLACEMENT_CSV_HEADER,
    CorruptionConfig,
    DisplacementStudyConfig,
    SceneConfig,
    corrupt,
    displacement_study,
    generate_scene,
    write_displacement_csv,
)


@pytest.fixture(scope="module")
def rows():
    return displacement_study(DisplacementStudyConfig())


class TestDisplacementStudy:

    def test_zero_shift_row_is_all_ones(self, rows):
        r = rows[0]
        assert (r.x, r.iou, r.dotd, r.hota, r.so_hota) == (0.0, 1.0, 1.0, 1.0, 1.0)

    def test_dotd_closed_form(self, rows):
        for r in rows:
            assert r.dotd == pytest.approx(math.exp(-r.x / 16.0), abs=1e-12)

    def test_box_size_shift_kills_overlap(self, rows):
        for r in rows:
            if r.x >= 16:
                assert r.iou == 0.0
                assert r.hota == 0.0

    def test_half_box_shift(self, rows):
        r8 = next(r for r in rows if r.x == 8)
        assert r8.iou == pytest.approx(1 / 3, abs=1e-9)
        assert r8.hota == pytest.approx(6 / 19, abs=1e-9)

    def test_displacement_tolerant_score_decays_monotonically(self, rows):
        scores = [r.so_hota for r in rows]
        assert all(a >= b for a, b in zip(scores, scores[1:]))

    def test_sixty_five_rows_for_default_shifts(self, rows):
        assert len(rows) == 65
        assert [r.x for r in rows] == [float(x) for x in range(65)]

    def test_scale_override_changes_decay(self):
        cfg = DisplacementStudyConfig(shifts=[0.0, 8.0], s_override=32.0)
        rows = displacement_study(cfg)
        assert rows[1].dotd == pytest.approx(math.exp(-8 / 32), abs=1e-12)

    def test_csv_output_format(self, rows):
        buf = io.StringIO()
        write_displacement_csv(rows[:2], buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == DISPLACEMENT_CSV_HEADER == "x,iou,dotd,hota,so_hota"
        assert lines[1] == "0.000000,1.000000,1.000000,1.000000,1.000000"
        assert all(len(part.split(".")[1]) == 6 for part in lines[2].split(","))

    def test_unsorted_shifts_rejected(self):
        with pytest.raises(ValidationError):
            DisplacementStudyConfig(shifts=[4.0, 2.0])

    def test_non_positive_box_rejected(self):
        with pytest.raises(ValidationError):
            DisplacementStudyConfig(box_size=0.0)


class TestGenerateScene:
    def test_same_seed_same_scene(self):
        a = generate_scene(SceneConfig(seed=13))
        b = generate_scene(SceneConfig(seed=13))
        assert a == b

    def test_same_seed_byte_identical_output(self):
        bufs = []
        for _ in range(2):
            scene = generate_scene(SceneConfig(n_objects=4, frames=60, seed=99))
            buf = io.StringIO()
            write_mot(scene.gt, buf)
            bufs.append(buf.getvalue())
        assert bufs[0] == bufs[1]

    def test_different_seed_differs(self):
        a = generate_scene(SceneConfig(seed=1))
        b = generate_scene(SceneConfig(seed=2))
        assert a != b

    def test_counts(self):
        scene = generate_scene(SceneConfig(n_objects=5, frames=100, seed=0))
        assert len(scene.gt) == 500
        assert len({d.track_id for d in scene.gt}) == 5
        assert scene.frame_count == 100

    @pytest.mark.parametrize("motion", ["linear", "sinusoidal", "flock"])
    def test_boxes_stay_in_arena(self, motion):
        cfg = SceneConfig(n_objects=6, frames=200, arena=(640, 480),
                          box_size_range=(8, 24), motion=motion,
                          speed_range=(2, 8), seed=7)
        scene = generate_scene(cfg)
        for d in scene.gt:
            assert d.box.left >= 0
            assert d.box.top >= 0
            assert d.box.left + d.box.width <= 640
            assert d.box.top + d.box.height <= 480

    def test_zero_speed_linear_track_is_static(self):
        scene = generate_scene(SceneConfig(n_objects=1, frames=10, motion="linear",
                                           speed_range=(0, 0), seed=1))
        positions = {(d.box.left, d.box.top) for d in scene.gt}
        assert len(positions) == 1

    def test_unknown_motion_rejected(self):
        with pytest.raises(ValidationError):
            SceneConfig(motion="brownian")

    def test_oversized_boxes_rejected(self):
        with pytest.raises(ValidationError):
            SceneConfig(arena=(100, 100), box_size_range=(8, 200))


class TestCorrupt:
    @pytest.fixture()
    def scene(self):
        return generate_scene(SceneConfig(n_objects=4, frames=50, seed=31))

    def test_identity_config_returns_gt(self, scene):
        assert corrupt(scene, CorruptionConfig()) == list(scene.gt)

    def test_full_miss_rate_empties(self, scene):
        assert corrupt(scene, CorruptionConfig(miss_rate=1.0)) == []

    def test_deterministic(self, scene):
        cfg = CorruptionConfig(center_noise_sigma=2.0, miss_rate=0.2,
                               fp_rate=0.3, id_switch_rate=0.05, seed=8)
        assert corrupt(scene, cfg) == corrupt(scene, cfg)

    def test_pure_jitter_keeps_counts_balanced(self, scene):
        # no drops and no injections: per-threshold fn and fp stay equal,
        # so detection recall equals precision
        pred = corrupt(scene, CorruptionConfig(center_noise_sigma=16.0, seed=3))
        assert len(pred) == len(scene.gt)
        res = so_hota_suite([SequencePair("s", scene.gt, pred)])
        assert res.pooled["so_detre"] == pytest.approx(res.pooled["so_detpr"], abs=1e-12)

    def test_jitter_moves_centers_not_sizes(self, scene):
        pred = corrupt(scene, CorruptionConfig(center_noise_sigma=2.0, seed=5))
        by_key = {(d.frame, d.track_id): d for d in scene.gt}
        for d in pred:
            src = by_key[(d.frame, d.track_id)]
            assert d.box.width == src.box.width
            assert d.box.height == src.box.height

    def test_false_positives_get_fresh_ids(self, scene):
        pred = corrupt(scene, CorruptionConfig(fp_rate=0.5, seed=4))
        gt_ids = {d.track_id for d in scene.gt}
        injected = [d for d in pred if d.track_id not in gt_ids]
        assert len(pred) == len(scene.gt) + len(injected)
        assert injected, "expected some injections at fp_rate 0.5"

    def test_id_switches_preserve_boxes(self, scene):
        pred = corrupt(scene, CorruptionConfig(id_switch_rate=0.1, seed=6))
        assert len(pred) == len(scene.gt)
        gt_boxes = sorted((d.frame, d.box.left, d.box.top) for d in scene.gt)
        pr_boxes = sorted((d.frame, d.box.left, d.box.top) for d in pred)
        assert gt_boxes == pr_boxes

    def test_drop_ids_strips_identities(self, scene):
        pred = corrupt(scene, CorruptionConfig(drop_ids=True))
        assert all(d.track_id is None for d in pred)

    def test_rates_validated(self):
        with pytest.raises(ValidationError):
            CorruptionConfig(miss_rate=1.5)
        with pytest.raises(ValidationError):
            CorruptionConfig(id_switch_rate=-0.1)
        with pytest.raises(ValidationError):
            CorruptionConfig(center_noise_sigma=-1.0)

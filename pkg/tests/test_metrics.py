import json
import math

import pytest

from smotkit.data_io import Detection, SequencePair
from smotkit.errors import ValidationError
from smotkit.geometry import BoundingBox
from smotkit.matching import DEFAULT_ALPHAS, MatchAccumulator
from smotkit.metrics import (
    clear_metrics,
    evaluate_sequences,
    hota_suite,
    idf1,
    pool,
    so_assa,
    so_deta,
    so_hota_suite,
)
from smotkit.synth import CorruptionConfig, SceneConfig, corrupt, generate_scene


def det(frame, tid, l=10.0, t=10.0, w=12.0, h=12.0, conf=1.0):
    return Detection(frame, tid, BoundingBox(l, t, w, h), conf)


def worked_pair():
    gt = [det(f, 1) for f in range(1, 5)]
    pred = [det(f, 7) for f in range(1, 4)]
    return SequencePair("w", gt, pred)


def perfect_pair(name="p", tracks=2, frames=6):
    gt = [det(f, k, l=40.0 * k) for k in range(1, tracks + 1) for f in range(1, frames + 1)]
    pred = [det(f, k + 50, l=40.0 * k) for k in range(1, tracks + 1) for f in range(1, frames + 1)]
    return SequencePair(name, gt, pred)


class TestScalarScores:
    def test_deta_from_counts(self):
        acc = MatchAccumulator(alpha=0.5, tp=3, fn=1, fp=0,
                               pair_tp={(1, 7): 3},
                               gt_track_size={1: 4}, pred_track_size={7: 3})
        assert so_deta(acc) == 0.75

    def test_deta_vacuous_is_one(self):
        acc = MatchAccumulator(alpha=0.5, tp=0, fn=0, fp=0, pair_tp={},
                               gt_track_size={}, pred_track_size={})
        assert so_deta(acc) == 1.0

    def test_deta_empty_pred_is_zero(self):
        acc = MatchAccumulator(alpha=0.5, tp=0, fn=4, fp=0, pair_tp={},
                               gt_track_size={1: 4}, pred_track_size={})
        assert so_deta(acc) == 0.0

    def test_assa_worked_example(self):
        acc = MatchAccumulator(alpha=0.5, tp=3, fn=1, fp=0,
                               pair_tp={(1, 7): 3},
                               gt_track_size={1: 4}, pred_track_size={7: 3})
        assert so_assa(acc) == 0.75

    def test_assa_no_tp_is_zero(self):
        acc = MatchAccumulator(alpha=0.5, tp=0, fn=2, fp=2, pair_tp={},
                               gt_track_size={1: 2}, pred_track_size={7: 2})
        assert so_assa(acc) == 0.0

    def test_assa_split_track_halves(self):
        # one gt track of 8 frames covered by two pred tracks of 4 each:
        # every A(c) = 4 / (8 + 4 - 4) = 0.5
        acc = MatchAccumulator(alpha=0.5, tp=8, fn=0, fp=0,
                               pair_tp={(1, 7): 4, (1, 8): 4},
                               gt_track_size={1: 8}, pred_track_size={7: 4, 8: 4})
        assert so_assa(acc) == 0.5


class TestSoHotaSuite:
    def test_worked_example_exact(self):
        res = so_hota_suite([worked_pair()])
        assert res.pooled["so_hota"] == pytest.approx(0.75, abs=1e-12)
        assert res.pooled["so_deta"] == pytest.approx(0.75, abs=1e-12)
        assert res.pooled["so_assa"] == pytest.approx(0.75, abs=1e-12)
        assert res.pooled["so_detre"] == pytest.approx(0.75, abs=1e-12)
        assert res.pooled["so_detpr"] == pytest.approx(1.0, abs=1e-12)

    def test_perfect_prediction_all_ones(self):
        res = so_hota_suite([perfect_pair()])
        for key in ("so_hota", "so_deta", "so_assa", "so_detre", "so_detpr"):
            assert res.pooled[key] == pytest.approx(1.0, abs=1e-12)

    def test_geometric_mean_identity_per_alpha(self):
        scene = generate_scene(SceneConfig(n_objects=4, frames=40, seed=21))
        pred = corrupt(scene, CorruptionConfig(center_noise_sigma=4.0, miss_rate=0.1,
                                               fp_rate=0.4, seed=22))
        res = so_hota_suite([SequencePair("s", scene.gt, pred)])
        curves = res.pooled_alpha
        for i in range(len(DEFAULT_ALPHAS)):
            want = math.sqrt(curves["so_deta"][i] * curves["so_assa"][i])
            assert curves["so_hota"][i] == pytest.approx(want, abs=1e-12)
        assert res.pooled["so_hota"] == pytest.approx(
            sum(curves["so_hota"]) / 19, abs=1e-12)

    def test_headline_uses_nineteen_thresholds(self):
        res = so_hota_suite([worked_pair()])
        assert len(res.pooled_alpha["so_hota"]) == 19


class TestHotaSuite:
    def test_perfect_prediction(self):
        res = hota_suite([perfect_pair()])
        assert res.pooled["hota"] == pytest.approx(1.0, abs=1e-12)

    def test_translated_prediction_zero_overlap(self):
        gt = [det(f, 1) for f in range(1, 6)]
        pred = [det(f, 7, l=10.0 + 13.0, t=10.0 + 13.0) for f in range(1, 6)]
        pair = SequencePair("s", gt, pred)
        assert hota_suite([pair]).pooled["hota"] == 0.0
        # the displacement-tolerant score stays positive on the same data
        assert so_hota_suite([pair]).pooled["so_hota"] > 0.0

    def test_one_third_overlap_passes_six_thresholds(self):
        # 16 px boxes offset 8 px: IoU = 1/3, above alphas .05 to .30
        gt = [det(f, 1, w=16.0, h=16.0) for f in range(1, 11)]
        pred = [det(f, 7, l=18.0, w=16.0, h=16.0) for f in range(1, 11)]
        res = hota_suite([SequencePair("s", gt, pred)])
        assert res.pooled["hota"] == pytest.approx(6 / 19, abs=1e-9)


class TestClear:
    def test_perfect_prediction(self):
        res = clear_metrics([perfect_pair()])
        assert res.pooled["mota"] == 1.0
        assert res.pooled["idsw"] == 0
        assert res.pooled["mt"] == 1.0
        assert res.pooled["ml"] == 0.0

    def test_ten_two_one_one_scenario(self):
        # 10 gt boxes; misses at frames 7 and 9; one far spurious box;
        # prediction identity changes at frame 5
        gt = [det(f, 1) for f in range(1, 11)]
        pred = [det(f, 5 if f <= 4 else 6) for f in range(1, 11) if f not in (7, 9)]
        pred.append(det(3, 9, l=400.0))
        res = clear_metrics([SequencePair("s", gt, pred)])
        assert res.pooled["fn"] == 2
        assert res.pooled["fp"] == 1
        assert res.pooled["idsw"] == 1
        assert res.pooled["mota"] == pytest.approx(0.6, abs=1e-12)

    def test_heavy_false_positives_go_negative(self):
        gt = [det(f, 1) for f in range(1, 11)]
        pred = [det(f, 1) for f in range(1, 11)]
        for f in range(1, 11):
            for j in range(3):
                pred.append(det(f, 20 + j, l=300.0 + 50 * j))
        res = clear_metrics([SequencePair("s", gt, pred)])
        assert res.pooled["mota"] < 0.0

    def test_match_carry_over_beats_greedy_switch(self):
        # pred 5 tracks gt loosely the whole time; pred 6 lands exactly on gt
        # from frame 4 on. The standing match must hold: no switches, 6 is FP.
        gt = [det(f, 1, w=16.0, h=16.0) for f in range(1, 9)]
        pred = [det(f, 5, l=14.0, w=16.0, h=16.0) for f in range(1, 9)]
        pred += [det(f, 6, w=16.0, h=16.0) for f in range(4, 9)]
        res = clear_metrics([SequencePair("s", gt, pred)])
        assert res.pooled["idsw"] == 0
        assert res.pooled["fp"] == 5

    def test_identity_switch_counted_across_gap(self):
        # gt matched by id 5, then unmatched for two frames, then id 6
        gt = [det(f, 1) for f in range(1, 9)]
        pred = [det(f, 5) for f in range(1, 4)] + [det(f, 6) for f in range(6, 9)]
        res = clear_metrics([SequencePair("s", gt, pred)])
        assert res.pooled["idsw"] == 1

    def test_mostly_tracked_boundary(self):
        # 8 of 10 frames matched -> 0.8 counts as mostly tracked
        gt = [det(f, 1) for f in range(1, 11)]
        pred = [det(f, 5) for f in range(1, 9)]
        res = clear_metrics([SequencePair("s", gt, pred)])
        assert res.pooled["mt"] == 1.0
        assert res.pooled["ml"] == 0.0

    def test_mostly_lost_boundary(self):
        # 2 of 10 frames matched -> 0.2 counts as mostly lost
        gt = [det(f, 1) for f in range(1, 11)]
        pred = [det(f, 5) for f in range(1, 3)]
        res = clear_metrics([SequencePair("s", gt, pred)])
        assert res.pooled["ml"] == 1.0

    def test_no_gt_rejected(self):
        pair = SequencePair("s", [], [det(1, 5)])
        with pytest.raises(ValidationError, match="ground-truth"):
            clear_metrics([pair])


class TestIdf1:
    def test_perfect_prediction(self):
        assert idf1([perfect_pair()]).pooled["idf1"] == 1.0

    def test_empty_prediction(self):
        pair = SequencePair("s", [det(f, 1) for f in range(1, 4)], [])
        assert idf1([pair]).pooled["idf1"] == 0.0

    def test_half_covered_track(self):
        # 4 gt frames, 2 covered: 2*2 / (2*2 + 0 + 2)
        gt = [det(f, 1) for f in range(1, 5)]
        pred = [det(f, 7) for f in range(1, 3)]
        res = idf1([SequencePair("s", gt, pred)])
        assert res.pooled["idf1"] == pytest.approx(2 / 3, abs=1e-12)

    def test_identity_split_caps_idf1(self):
        # one gt track, two pred tracks of half length each: only one can be
        # the identity partner
        gt = [det(f, 1) for f in range(1, 9)]
        pred = [det(f, 5) for f in range(1, 5)] + [det(f, 6) for f in range(5, 9)]
        res = idf1([SequencePair("s", gt, pred)])
        assert res.pooled["idf1"] == pytest.approx(2 * 4 / (2 * 4 + 4 + 4), abs=1e-12)


class TestPooling:
    def test_duplication_leaves_ratios_unchanged(self):
        scene = generate_scene(SceneConfig(n_objects=3, frames=30, seed=5))
        pred = corrupt(scene, CorruptionConfig(center_noise_sigma=3.0, miss_rate=0.1,
                                               fp_rate=0.2, seed=6))
        a = SequencePair("a", scene.gt, pred)
        b = SequencePair("b", scene.gt, pred)
        single = evaluate_sequences([a], metrics=["so_hota"], mean_size=16.0)
        double = evaluate_sequences([a, b], metrics=["so_hota"], mean_size=16.0)
        for key in ("so_hota", "so_deta", "so_assa", "so_detre", "so_detpr"):
            assert double.pooled[key] == pytest.approx(single.pooled[key], abs=1e-12)

    def test_perfect_plus_empty_pred_halves_recall(self):
        good = perfect_pair("good", tracks=1, frames=6)
        bad = SequencePair("bad", [det(f, 1) for f in range(1, 7)], [])
        res = evaluate_sequences([good, bad], metrics=["so_hota"], mean_size=12.0)
        assert res.pooled["so_detre"] == pytest.approx(0.5, abs=1e-12)

    def test_single_sequence_pooled_equals_per_sequence(self):
        pair = worked_pair()
        res = evaluate_sequences([pair], metrics=["so_hota"])
        for key, value in res.per_sequence["w"].items():
            if key == "vacuous":
                continue
            assert res.pooled[key] == pytest.approx(value, abs=1e-12)

    def test_pool_reports(self):
        a = evaluate_sequences([perfect_pair("a")], metrics=["so_hota"], mean_size=12.0)
        b = evaluate_sequences([worked_pair()], metrics=["so_hota"], mean_size=12.0)
        merged = pool([a, b])
        assert set(merged.per_sequence) == {"a", "w"}
        # pooled counts per alpha: tp 12+3 of gt 12+4
        assert merged.pooled["so_detre"] == pytest.approx(15 / 16, abs=1e-12)

    def test_pool_rejects_mismatched_config(self):
        a = evaluate_sequences([perfect_pair("a")], metrics=["so_hota"], mean_size=12.0)
        b = evaluate_sequences([worked_pair()], metrics=["so_hota"], mean_size=16.0)
        with pytest.raises(ValidationError, match="config"):
            pool([a, b])

    def test_pool_report_with_itself_is_ratio_invariant(self):
        report = evaluate_sequences([worked_pair()], metrics=["so_hota"],
                                    mean_size=12.0)
        doubled = pool([report, report])
        for key in ("so_hota", "so_deta", "so_assa", "so_detre", "so_detpr"):
            assert doubled.pooled[key] == pytest.approx(report.pooled[key], abs=1e-12)


class TestMonotonicity:
    def test_added_false_positive_never_helps(self):
        scene = generate_scene(SceneConfig(n_objects=3, frames=20, seed=9))
        pred = corrupt(scene, CorruptionConfig(center_noise_sigma=2.0, seed=10))
        base_pair = SequencePair("s", scene.gt, pred)
        extra = pred + [Detection(1, 999, BoundingBox(5000.0, 5000.0, 10.0, 10.0))]
        more_pair = SequencePair("s", scene.gt, extra, frame_count=base_pair.frame_count)
        base = evaluate_sequences([base_pair], metrics=["so_hota", "clear"])
        more = evaluate_sequences([more_pair], metrics=["so_hota", "clear"])
        assert more.pooled["so_detpr"] <= base.pooled["so_detpr"] + 1e-12
        assert more.pooled["so_deta"] <= base.pooled["so_deta"] + 1e-12
        assert more.pooled["mota"] <= base.pooled["mota"] + 1e-12

    def test_dropped_gt_cover_never_helps_recall(self):
        scene = generate_scene(SceneConfig(n_objects=3, frames=20, seed=11))
        full = SequencePair("s", scene.gt, list(scene.gt))
        partial = SequencePair("s", scene.gt, list(scene.gt)[:-5],
                               frame_count=full.frame_count)
        a = evaluate_sequences([full], metrics=["so_hota"])
        b = evaluate_sequences([partial], metrics=["so_hota"])
        assert b.pooled["so_detre"] <= a.pooled["so_detre"] + 1e-12


class TestVacuous:
    def test_empty_both_sides_scores_one_with_flag(self):
        pair = SequencePair("v", [], [], frame_count=3)
        res = evaluate_sequences([pair], metrics=["so_hota"], mean_size=10.0)
        assert res.pooled["so_hota"] == 1.0
        assert res.pooled["vacuous"] is True

    def test_vacuous_idf1(self):
        pair = SequencePair("v", [], [], frame_count=3)
        res = idf1([pair])
        assert res.pooled["idf1"] == 1.0
        assert res.pooled["vacuous"] is True


class TestReportShape:
    def _report(self):
        return evaluate_sequences([perfect_pair("a"), worked_pair()],
                                  metrics=["so_hota", "hota", "clear", "idf1"])

    def test_json_layout(self):
        doc = json.loads(self._report().to_json())
        assert set(doc) == {"pooled", "per_sequence", "config"}
        assert set(doc["config"]) == {"measure", "thresholds", "s_used"}
        assert doc["config"]["measure"] == "dotd"
        assert len(doc["config"]["thresholds"]) == 19
        assert set(doc["per_sequence"]) == {"a", "w"}
        for key in ("so_hota", "hota", "mota", "idf1", "mt", "ml", "idsw"):
            assert key in doc["pooled"]

    def test_json_is_plain_python_types(self):
        doc = json.loads(self._report().to_json())
        # a successful json round trip already proves it, but keep the
        # failure mode readable when a numpy scalar sneaks in
        assert all(isinstance(v, (int, float, bool, type(None)))
                   for v in doc["pooled"].values())

    def test_csv_has_pooled_row(self):
        text = self._report().to_csv()
        lines = text.strip().splitlines()
        assert lines[0].startswith("sequence,")
        names = [line.split(",")[0] for line in lines[1:]]
        assert "__pooled__" in names
        assert {"a", "w"} <= set(names)

    def test_requested_families_only(self):
        res = evaluate_sequences([perfect_pair("a")], metrics=["so_hota"])
        assert "mota" not in res.pooled
        assert "hota" not in res.pooled
        res2 = evaluate_sequences([perfect_pair("a")], metrics=["clear"])
        assert "so_hota" not in res2.pooled
        assert res2.config["measure"] == "iou"


class TestParallelEvaluation:
    def test_jobs_do_not_change_results(self):
        pairs = []
        for seed in range(6):
            scene = generate_scene(SceneConfig(n_objects=3, frames=25,
                                               seed=seed, name=f"s{seed}"))
            pred = corrupt(scene, CorruptionConfig(center_noise_sigma=2.0,
                                                   miss_rate=0.1, seed=seed + 50))
            pairs.append(SequencePair(scene.name, scene.gt, pred))
        serial = evaluate_sequences(pairs, metrics=["so_hota", "clear"], jobs=1)
        parallel = evaluate_sequences(pairs, metrics=["so_hota", "clear"], jobs=3)
        assert serial.to_json() == parallel.to_json()

    def test_duplicate_sequence_names_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            evaluate_sequences([perfect_pair("x"), perfect_pair("x")],
                               metrics=["so_hota"])

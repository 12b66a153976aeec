"""Evaluation metrics against independent oracles."""

import numpy as np
import pytest

from matt.errors import EmptyStratumError
from matt.evaluate import (
    Detection,
    Stratum,
    aggregate_daynight,
    average_precision,
    group_stat,
    iou_bbox,
    map_score,
    map_sweep,
    match_detections,
    pooled_category_ap,
    render_csv,
    render_table,
    report_to_json,
    stratified_report,
)
from matt.ingest import PERIODS
from matt.maskio import BBoxNorm, LabelFile, LabelRecord

from oracles import all_point_ap, greedy_match_oracle, raster_iou


def box(cx, cy, w, h):
    return BBoxNorm(cx=cx, cy=cy, w=w, h=h)


def det(bbox, confidence, pair_id="img", category_id=0):
    return Detection(pair_id=pair_id, category_id=category_id, bbox=bbox,
                     confidence=confidence)


class TestIoU:
    def test_identical(self):
        b = box(0.5, 0.5, 0.4, 0.4)
        assert iou_bbox(b, b) == 1.0

    def test_adjacent_disjoint(self):
        a = box(0.25, 0.5, 0.5, 0.5)
        b = box(0.75, 0.5, 0.5, 0.5)
        assert iou_bbox(a, b) == 0.0

    def test_derived_example_against_raster_oracle(self):
        a = box(0.5, 0.5, 0.5, 0.5)
        b = box(0.625, 0.5, 0.5, 0.5)
        expected = raster_iou(a.extents(), b.extents(), n=1000)
        assert expected == pytest.approx(0.6, abs=1e-9)
        assert iou_bbox(a, b) == pytest.approx(0.6, abs=1e-12)

    def test_symmetry_and_bounds(self, rng):
        for _ in range(50):
            a = box(*rng.uniform(0.3, 0.7, 2), *rng.uniform(0.05, 0.4, 2))
            b = box(*rng.uniform(0.3, 0.7, 2), *rng.uniform(0.05, 0.4, 2))
            v = iou_bbox(a, b)
            assert v == iou_bbox(b, a)
            assert 0.0 <= v <= 1.0
            assert iou_bbox(a, a) == 1.0


class TestMatching:
    def test_exact_hit(self):
        gt = [LabelRecord(0, box(0.5, 0.5, 0.2, 0.2))]
        flags, unmatched = match_detections([det(box(0.5, 0.5, 0.2, 0.2), 0.9)], gt, 0.5)
        assert flags == [True] and unmatched == 0

    def test_gt_consumed_once(self):
        gt = [LabelRecord(0, box(0.5, 0.5, 0.2, 0.2))]
        dets = [det(box(0.5, 0.5, 0.2, 0.2), 0.6), det(box(0.5, 0.5, 0.2, 0.2), 0.9)]
        flags, unmatched = match_detections(dets, gt, 0.5)
        assert flags == [False, True]  # higher-confidence det wins
        assert unmatched == 0

    def test_below_threshold_is_fp(self):
        gt = [LabelRecord(0, box(0.2, 0.2, 0.1, 0.1))]
        flags, unmatched = match_detections([det(box(0.8, 0.8, 0.1, 0.1), 0.9)], gt, 0.5)
        assert flags == [False] and unmatched == 1

    def test_matches_brute_force_oracle(self, rng):
        for _ in range(200):
            n_det = int(rng.integers(0, 11))
            n_gt = int(rng.integers(0, 7))
            dets = []
            confidences = list(rng.permutation(np.linspace(0.1, 0.99, n_det)))
            for conf in confidences:
                dets.append(det(box(*rng.uniform(0.25, 0.75, 2), *rng.uniform(0.05, 0.45, 2)),
                                float(conf)))
            gts = [LabelRecord(0, box(*rng.uniform(0.25, 0.75, 2), *rng.uniform(0.05, 0.45, 2)))
                   for _ in range(n_gt)]
            thresh = float(rng.choice([0.3, 0.5, 0.7]))
            flags, unmatched = match_detections(dets, gts, thresh)
            oracle_flags, oracle_unmatched = greedy_match_oracle(
                [d.bbox.extents() for d in dets],
                [d.confidence for d in dets],
                [g.geometry.extents() for g in gts],
                thresh,
            )
            assert flags == oracle_flags
            assert unmatched == oracle_unmatched


class TestAveragePrecision:
    def test_perfect_single(self):
        assert average_precision([True], 1) == 1.0

    def test_tp_fp_tp_example(self):
        # all-point oracle: 0.5*1.0 + 0.5*(2/3) = 0.8333...
        expected = all_point_ap([True, False, True], 2)
        assert expected == pytest.approx(5 / 6, abs=1e-12)
        got = average_precision([True, False, True], 2)
        assert abs(got - expected) <= 0.01

    def test_zero_recall(self):
        assert average_precision([False, False], 3) == 0.0

    def test_undefined_vs_zero(self):
        assert average_precision([], 0) is None
        assert average_precision([False], 0) == 0.0

    def test_101pt_within_001_of_all_point(self, rng):
        for _ in range(300):
            n = int(rng.integers(1, 12))
            total_gt = int(rng.integers(1, 7))
            flags = list(rng.random(n) < 0.5)
            while sum(flags) > total_gt:
                flags[flags.index(True)] = False
            got = average_precision(flags, total_gt)
            expected = all_point_ap(flags, total_gt)
            assert abs(got - expected) <= 0.01

    def test_invariant_under_monotone_confidence_rescale(self, rng):
        gts = {"a": [LabelRecord(0, box(0.5, 0.5, 0.2, 0.2)),
                     LabelRecord(0, box(0.2, 0.2, 0.1, 0.1))]}
        dets = [det(box(0.5, 0.5, 0.2, 0.2), 0.9, "a"),
                det(box(0.2, 0.2, 0.1, 0.1), 0.5, "a"),
                det(box(0.8, 0.8, 0.1, 0.1), 0.3, "a")]
        base = pooled_category_ap({"a": dets}, gts, 0.5)
        squashed = [Detection(d.pair_id, d.category_id, d.bbox, d.confidence ** 3)
                    for d in dets]
        assert pooled_category_ap({"a": squashed}, gts, 0.5) == base

    def test_trailing_fp_never_increases_ap(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 8))
            flags = list(rng.random(n) < 0.6)
            total_gt = max(1, sum(flags))
            base = average_precision(flags, total_gt)
            assert average_precision(flags + [False], total_gt) <= base + 1e-12


class TestMapScore:
    def test_mean(self):
        assert map_score({0: 1.0, 1: 0.5}) == 0.75

    def test_single(self):
        assert map_score({0: 0.7}) == 0.7

    def test_undefined_excluded(self):
        assert map_score({0: 0.8, 1: None}) == 0.8

    def test_all_undefined(self):
        with pytest.raises(EmptyStratumError):
            map_score({0: None})

    def test_permutation_invariant(self):
        values = {0: 0.1, 1: 0.5, 2: 0.9}
        assert map_score(values) == map_score(dict(reversed(list(values.items()))))


class TestGroupStat:
    def test_two_sample_example(self):
        # sample SD of {0.6, 0.8} = 0.1414..., / sqrt(2) = 0.1
        stat = group_stat([0.6, 0.8])
        assert stat.mean == pytest.approx(0.7, abs=1e-12)
        assert stat.se == pytest.approx(0.1, abs=1e-12)
        assert stat.bar_low == pytest.approx(0.6, abs=1e-12)
        assert stat.bar_high == pytest.approx(0.8, abs=1e-12)

    def test_single_sample_collapses(self):
        stat = group_stat([0.42])
        assert stat.se == 0.0
        assert stat.bar_low == stat.bar_high == 0.42

    def test_permutation_invariant(self, rng):
        values = list(rng.random(6))
        a = group_stat(values)
        b = group_stat(list(reversed(values)))
        assert a.mean == pytest.approx(b.mean, abs=1e-15)
        assert a.se == pytest.approx(b.se, abs=1e-15)


def _scene(n_periods=5, bands=("rgb",), methods=("Manual", "MATT"), elevations=(16.0, 47.0),
           images_per_cell=2):
    """Synthetic detections/gts/meta covering every stratum cell."""
    gts = {}
    meta = {}
    dets = []
    idx = 0
    for band in bands:
        for method in methods:
            for period in PERIODS[:n_periods]:
                for elevation in elevations:
                    for _ in range(images_per_cell):
                        pid = f"img{idx:04d}"
                        idx += 1
                        gts[pid] = LabelFile(pid, [LabelRecord(0, box(0.5, 0.5, 0.2, 0.2))])
                        meta[pid] = Stratum(elevation_m=elevation, period=period,
                                            band=band, method=method)
                        hit = (method == "Manual") or (period not in ("PreSunrise",))
                        if hit:
                            dets.append(det(box(0.5, 0.5, 0.2, 0.2), 0.9, pid))
    return dets, gts, meta


class TestStratifiedReport:
    def test_cell_sample_counts(self):
        dets, gts, meta = _scene(images_per_cell=5)
        report = stratified_report(dets, gts, meta, iou_thresh=0.5)
        for stat in report.by_period.values():
            assert stat.n_images == 10  # 2 elevations x 5 images

    def test_group_bars(self):
        dets, gts, meta = _scene()
        report = stratified_report(dets, gts, meta, iou_thresh=0.5)
        for stat in report.by_period.values():
            assert stat.bar_low == pytest.approx(stat.mean - stat.se, abs=1e-15)
            assert stat.bar_high == pytest.approx(stat.mean + stat.se, abs=1e-15)

    def test_zero_gt_cell_excluded(self):
        gts = {"a": LabelFile("a", []), "b": LabelFile("b", [LabelRecord(0, box(0.5, 0.5, 0.2, 0.2))])}
        meta = {
            "a": Stratum(16.0, "Noon", "rgb", "MATT"),
            "b": Stratum(47.0, "Noon", "rgb", "MATT"),
        }
        report = stratified_report([det(box(0.5, 0.5, 0.2, 0.2), 0.9, "b")], gts, meta)
        assert ("rgb", "MATT", "Noon", 16.0) in report.excluded
        assert len(report.cells) == 1

    def test_missing_meta_rejected(self):
        gts = {"a": LabelFile("a", [LabelRecord(0, box(0.5, 0.5, 0.2, 0.2))])}
        with pytest.raises(Exception):
            stratified_report([], gts, {})

    def test_renderers_produce_rows(self):
        dets, gts, meta = _scene()
        report = stratified_report(dets, gts, meta)
        assert "PreSunrise" in render_table(report)
        assert render_csv(report).count("\n") > 2
        payload = report_to_json(report)
        assert payload["iou_thresh"] == 0.5


class TestMapSweep:
    def test_monotone_in_threshold_and_mean(self):
        # a detection offset from its gt passes loose thresholds, fails tight ones
        gts = {"a": LabelFile("a", [LabelRecord(0, box(0.5, 0.5, 0.2, 0.2))])}
        dets = [det(box(0.54, 0.5, 0.2, 0.2), 0.9, "a")]
        sweep = map_sweep(dets, gts)
        values = [sweep["per_threshold"][round(t, 2)] for t in
                  (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)]
        assert values == sorted(values, reverse=True)
        assert sweep["per_threshold"][0.5] == 1.0
        assert sweep["per_threshold"][0.95] == 0.0
        assert sweep["mean"] == pytest.approx(sum(values) / len(values), abs=1e-12)


class TestDayNight:
    def test_grouping_rule(self):
        dets, gts, meta = _scene()
        report = stratified_report(dets, gts, meta)
        values = {p: report.by_period[("rgb", "MATT", p)].mean for p in PERIODS}
        summary = aggregate_daynight(report)
        assert summary.night[("rgb", "MATT")] == pytest.approx(
            (values["PreSunrise"] + values["PostSunset"]) / 2, abs=1e-12
        )
        assert summary.day[("rgb", "MATT")] == pytest.approx(
            (values["PostSunrise"] + values["Noon"] + values["PreSunset"]) / 3, abs=1e-12
        )

    def test_period_example_values(self):
        # {0.5, 0.6, 0.7, 0.8, 0.4} in PreSunrise..PostSunset order
        values = dict(zip(PERIODS, [0.5, 0.6, 0.7, 0.8, 0.4]))
        night = (values["PreSunrise"] + values["PostSunset"]) / 2
        day = (values["PostSunrise"] + values["Noon"] + values["PreSunset"]) / 3
        assert night == pytest.approx(0.45, abs=1e-12)
        assert day == pytest.approx(0.7, abs=1e-12)

    def test_all_equal(self):
        dets, gts, meta = _scene(methods=("Manual",))
        report = stratified_report(dets, gts, meta)
        summary = aggregate_daynight(report)
        assert summary.day[("rgb", "Manual")] == pytest.approx(1.0)
        assert summary.night[("rgb", "Manual")] == pytest.approx(1.0)

    def test_delta_sign_manual_minus_matt(self):
        dets, gts, meta = _scene()
        report = stratified_report(dets, gts, meta)
        summary = aggregate_daynight(report)
        # MATT misses every PreSunrise detection in the synthetic scene
        assert summary.delta_night["rgb"] > 0
        assert summary.delta_day["rgb"] == pytest.approx(0.0, abs=1e-12)

    def test_missing_period_warns(self):
        dets, gts, meta = _scene(n_periods=3)
        report = stratified_report(dets, gts, meta)
        with pytest.warns(UserWarning, match="partial day/night"):
            summary = aggregate_daynight(report)
        assert summary.partial

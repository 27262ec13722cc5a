import numpy as np
import pytest

from conftest import square
from rumexsim.errors import UnknownImageId
from rumexsim.field import (BBox, DetectorModel, filter_boxes, generate_field,
                            georef_and_merge, simulate_detections,
                            visibility_counts)
from rumexsim.geo import DEFAULT_CAMERA, CameraModel, GeoPoint, Pose, enu_to_wgs84
from rumexsim.mission import CaptureEvent, capture_schedule, plan_coverage

PERFECT = DetectorModel(detection_prob=1.0)


def capture_at(origin, east, north, image_id=0, heading=0.0, alt=10.0, t=0.0):
    from rumexsim.geo import LocalPoint
    pos = enu_to_wgs84(origin, LocalPoint(east, north))
    return CaptureEvent(time_s=t, pose=Pose(pos, alt, heading), image_id=image_id)


class TestGenerateField:
    def test_density_zero_empty(self, quarter_ha):
        truth = generate_field(1, quarter_ha, density_per_ha=0.0)
        assert len(truth) == 0

    def test_deterministic_per_seed(self, quarter_ha):
        a = generate_field(123, quarter_ha, 300.0)
        b = generate_field(123, quarter_ha, 300.0)
        assert a == b
        c = generate_field(124, quarter_ha, 300.0)
        assert a != c

    def test_all_plants_inside_polygon(self, quarter_ha):
        truth = generate_field(5, quarter_ha, 400.0)
        for p in truth.plants:
            assert quarter_ha.contains(p.position.east_m, p.position.north_m)
            assert p.diameter_m >= 0.02

    def test_poisson_mean_over_seeds(self, hectare):
        # mean of Poisson(300) over 1000 seeds: SE = sqrt(300/1000) ~ 0.55
        counts = [len(generate_field(s, hectare, 300.0)) for s in range(1000)]
        assert abs(np.mean(counts) - 300.0) < 3 * np.sqrt(300.0 / 1000)

    def test_negative_density_rejected(self, hectare):
        with pytest.raises(ValueError):
            generate_field(0, hectare, -1.0)


class TestSimulateDetections:
    def test_noiseless_box_per_plant_and_image(self, quarter_ha, origin):
        plan = plan_coverage(quarter_ha, 3.93)
        sched = capture_schedule(plan, DEFAULT_CAMERA, 0.1, origin)
        truth = generate_field(9, quarter_ha, 150.0, diameter_sigma_m=0.0)
        boxes = simulate_detections(truth, sched, DEFAULT_CAMERA, PERFECT, 1, origin)
        counts = visibility_counts(truth, sched, DEFAULT_CAMERA, origin)
        assert len(boxes) == counts.sum()
        # every box sits exactly at its plant's projected pixel
        by_image = {e.image_id: e for e in sched}
        from rumexsim.geo import ground_to_pixel
        for b in boxes:
            plant = truth.plants[b.source_plant]
            px = ground_to_pixel(origin, by_image[b.image_id].pose, DEFAULT_CAMERA,
                                 plant.position)
            assert b.cx_px == pytest.approx(px[0], abs=1e-6)
            assert b.cy_px == pytest.approx(px[1], abs=1e-6)

    def test_detection_prob_zero_only_false_positives(self, quarter_ha, origin):
        plan = plan_coverage(quarter_ha, 3.93)
        sched = capture_schedule(plan, DEFAULT_CAMERA, 0.1, origin)
        truth = generate_field(9, quarter_ha, 150.0)
        det = DetectorModel(detection_prob=0.0, false_positives_per_image=0.05)
        boxes = simulate_detections(truth, sched, DEFAULT_CAMERA, det, 1, origin)
        assert boxes  # Poisson(0.05) over ~290 images almost surely fires
        assert all(b.source_plant is None for b in boxes)

    def test_plant_in_overlap_strip_seen_twice(self, origin):
        # adjacent tracks 3.93 m apart share a 0.44 m wide cross-track strip;
        # its center sits exactly between the two track lines
        cross, _ = DEFAULT_CAMERA.footprint_size(10.0)
        overlap_lo, overlap_hi = 3.93 - cross / 2, cross / 2
        assert overlap_lo < overlap_hi  # the strip exists
        cap_a = capture_at(origin, 0.0, 0.0, image_id=0, heading=0.0)
        cap_b = capture_at(origin, 3.93, 0.0, image_id=1, heading=180.0)
        from rumexsim.field import GroundTruth, Plant
        from rumexsim.geo import LocalPoint
        plant = Plant(LocalPoint((overlap_lo + overlap_hi) / 2, 0.0), 0.10)
        truth = GroundTruth(plants=(plant,))
        boxes = simulate_detections(truth, [cap_a, cap_b], DEFAULT_CAMERA,
                                    PERFECT, 3, origin)
        assert {b.image_id for b in boxes} == {0, 1}

    def test_empty_truth_no_boxes(self, quarter_ha, origin):
        plan = plan_coverage(quarter_ha, 3.93)
        sched = capture_schedule(plan, DEFAULT_CAMERA, 0.1, origin)
        from rumexsim.field import GroundTruth
        boxes = simulate_detections(GroundTruth(plants=()), sched, DEFAULT_CAMERA,
                                    PERFECT, 1, origin)
        assert boxes == []

    def test_deterministic_given_seed(self, quarter_ha, origin):
        plan = plan_coverage(quarter_ha, 3.93)
        sched = capture_schedule(plan, DEFAULT_CAMERA, 0.1, origin)
        truth = generate_field(4, quarter_ha, 200.0)
        det = DetectorModel(detection_prob=0.8, false_positives_per_image=0.3,
                            position_noise_sigma_m=0.02, bbox_size_noise_rel=0.1)
        a = simulate_detections(truth, sched, DEFAULT_CAMERA, det, 77, origin)
        b = simulate_detections(truth, sched, DEFAULT_CAMERA, det, 77, origin)
        assert a == b

    def test_detection_rate_converges(self, origin):
        # empirical rate over many seeds within 3 sigma of the model value
        poly = square(20.0)
        plan = plan_coverage(poly, 3.93)
        sched = capture_schedule(plan, DEFAULT_CAMERA, 0.1, origin)
        truth = generate_field(11, poly, 2000.0, diameter_sigma_m=0.0)
        counts = visibility_counts(truth, sched, DEFAULT_CAMERA, origin)
        opportunities = int(counts.sum())
        det = DetectorModel(detection_prob=0.7)
        hits = 0
        trials = 30
        for seed in range(trials):
            boxes = simulate_detections(truth, sched, DEFAULT_CAMERA, det, seed, origin)
            hits += len(boxes)
        n = opportunities * trials
        assert abs(hits / n - 0.7) < 3 * np.sqrt(0.7 * 0.3 / n)


class TestFilterBoxes:
    GSD = 0.001  # 1 mm/px makes the arithmetic transparent

    def box(self, w_m, h_m, box_id=0):
        return BBox(image_id=0, box_id=box_id, cx_px=500, cy_px=500,
                    width_px=w_m / self.GSD, height_px=h_m / self.GSD, score=0.9)

    def test_small_box_removed(self):
        # 5 cm x 5 cm = 25 cm^2 < the 50 cm^2 gate
        kept = filter_boxes([self.box(0.05, 0.05)], self.GSD, 0.005, 0.0)
        assert kept == []

    def test_large_box_kept(self):
        kept = filter_boxes([self.box(0.10, 0.10)], self.GSD, 0.005, 0.04)
        assert len(kept) == 1

    def test_elongated_box_removed_by_ratio(self):
        # 40 cm x 2 cm: 80 cm^2 passes area, ratio 0.02 m fails the 0.04 m gate
        b = self.box(0.40, 0.02)
        assert filter_boxes([b], self.GSD, 0.005, 0.0) == [b]
        assert filter_boxes([b], self.GSD, 0.005, 0.04) == []

    def test_zero_thresholds_identity(self):
        boxes = [self.box(0.05, 0.05, 1), self.box(0.4, 0.02, 2)]
        assert filter_boxes(boxes, self.GSD, 0.0, 0.0) == boxes

    def test_idempotent(self):
        boxes = [self.box(0.05, 0.05, 1), self.box(0.1, 0.1, 2),
                 self.box(0.4, 0.02, 3)]
        once = filter_boxes(boxes, self.GSD, 0.005, 0.04)
        twice = filter_boxes(once, self.GSD, 0.005, 0.04)
        assert once == twice

    def test_order_preserved(self):
        boxes = [self.box(0.1, 0.1, i) for i in range(5)]
        kept = filter_boxes(boxes, self.GSD, 0.005, 0.04)
        assert [b.box_id for b in kept] == [0, 1, 2, 3, 4]

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            filter_boxes([], self.GSD, -1.0, 0.0)


class TestGeorefAndMerge:
    def _box_at(self, origin, cap, east, north, box_id):
        from rumexsim.geo import LocalPoint, ground_to_pixel
        px = ground_to_pixel(origin, cap.pose, DEFAULT_CAMERA,
                             LocalPoint(east, north))
        return BBox(image_id=cap.image_id, box_id=box_id, cx_px=px[0], cy_px=px[1],
                    width_px=100, height_px=100, score=0.9)

    def test_two_nearby_detections_merge_at_midpoint(self, origin):
        cap = capture_at(origin, 0.0, 0.0)
        boxes = [self._box_at(origin, cap, -0.1, 0.0, 0),
                 self._box_at(origin, cap, 0.1, 0.0, 1)]
        tl = georef_and_merge(boxes, [cap], DEFAULT_CAMERA, 0.3, origin)
        assert len(tl) == 1
        assert tl.targets[0].position.east_m == pytest.approx(0.0, abs=1e-9)
        assert tl.targets[0].support == (0, 1)

    def test_distant_detections_stay_separate(self, origin):
        cap = capture_at(origin, 0.0, 0.0)
        boxes = [self._box_at(origin, cap, -0.5, 0.0, 0),
                 self._box_at(origin, cap, 0.5, 0.0, 1)]
        tl = georef_and_merge(boxes, [cap], DEFAULT_CAMERA, 0.3, origin)
        assert len(tl) == 2

    def test_noiseless_single_detection_at_plant(self, origin):
        cap = capture_at(origin, 10.0, 20.0, heading=231.0)
        boxes = [self._box_at(origin, cap, 10.4, 19.7, 0)]
        tl = georef_and_merge(boxes, [cap], DEFAULT_CAMERA, 0.3, origin)
        assert tl.targets[0].position.east_m == pytest.approx(10.4, abs=1e-9)
        assert tl.targets[0].position.north_m == pytest.approx(19.7, abs=1e-9)

    def test_merge_is_order_insensitive(self, origin):
        cap = capture_at(origin, 0.0, 0.0)
        rng = np.random.default_rng(3)
        pts = rng.uniform(-1.5, 1.5, size=(12, 2))
        boxes = [self._box_at(origin, cap, e, n, i) for i, (e, n) in enumerate(pts)]
        tl_fwd = georef_and_merge(boxes, [cap], DEFAULT_CAMERA, 0.3, origin)
        tl_rev = georef_and_merge(boxes[::-1], [cap], DEFAULT_CAMERA, 0.3, origin)
        fwd = sorted((round(t.position.east_m, 9), round(t.position.north_m, 9))
                     for t in tl_fwd.targets)
        rev = sorted((round(t.position.east_m, 9), round(t.position.north_m, 9))
                     for t in tl_rev.targets)
        assert fwd == rev

    def test_pairwise_separation_invariant(self, origin):
        cap = capture_at(origin, 0.0, 0.0)
        rng = np.random.default_rng(8)
        pts = rng.uniform(-2, 2, size=(40, 2))
        boxes = [self._box_at(origin, cap, e, n, i) for i, (e, n) in enumerate(pts)]
        tl = georef_and_merge(boxes, [cap], DEFAULT_CAMERA, 0.3, origin)
        pos = tl.positions()
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                assert np.linalg.norm(pos[i] - pos[j]) >= 0.3 - 1e-12

    def test_unknown_image_id(self, origin):
        cap = capture_at(origin, 0.0, 0.0, image_id=0)
        box = self._box_at(origin, cap, 0.0, 0.0, 0)
        bad = BBox(image_id=99, box_id=1, cx_px=box.cx_px, cy_px=box.cy_px,
                   width_px=100, height_px=100, score=0.5)
        with pytest.raises(UnknownImageId):
            georef_and_merge([bad], [cap], DEFAULT_CAMERA, 0.3, origin)

    def test_empty_boxes(self, origin):
        cap = capture_at(origin, 0.0, 0.0)
        tl = georef_and_merge([], [cap], DEFAULT_CAMERA, 0.3, origin)
        assert len(tl) == 0


class TestEndToEndLocalization:
    def test_noiseless_error_below_one_gsd(self, origin, quarter_ha):
        plan = plan_coverage(quarter_ha, 3.93)
        sched = capture_schedule(plan, DEFAULT_CAMERA, 0.1, origin)
        gsd = DEFAULT_CAMERA.gsd_at(10.0)
        truth = generate_field(21, quarter_ha, 300.0, diameter_sigma_m=0.0)
        boxes = simulate_detections(truth, sched, DEFAULT_CAMERA, PERFECT, 2, origin)
        tl = georef_and_merge(boxes, sched, DEFAULT_CAMERA, 0.05, origin)
        by_plant = {}
        for t in tl.targets:
            for p in t.source_plants:
                by_plant[p] = t
        for idx, plant in enumerate(truth.plants):
            assert idx in by_plant
            err = by_plant[idx].position.distance_to(plant.position)
            assert err < gsd

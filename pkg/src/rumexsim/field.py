"""Plant populations, simulated detections and target-list construction.

The detector itself is out of scope; it is replaced by a parametric outcome
model: each plant that is fully visible in a capture is detected with a
fixed probability, detections get Gaussian position and size noise, and
spurious boxes arrive per image at a Poisson rate. Box midpoints are then
georeferenced and duplicate detections of the same plant are merged by
single-linkage clustering.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import UnknownImageId
from .geo import CameraModel, GeoPoint, LocalPoint, wgs84_to_enu
from .mission import CaptureEvent, FieldPolygon

MIN_PLANT_DIAMETER_M = 0.02


@dataclass(frozen=True)
class Plant:
    position: LocalPoint
    diameter_m: float


@dataclass(frozen=True)
class GroundTruth:
    plants: tuple[Plant, ...]

    def __len__(self) -> int:
        return len(self.plants)


@dataclass(frozen=True)
class DetectorModel:
    """Outcome model for the image-analysis stage.

    All values are scenario inputs; none of them are measured accuracies.
    """

    detection_prob: float
    false_positives_per_image: float = 0.0
    position_noise_sigma_m: float = 0.0
    bbox_size_noise_rel: float = 0.0
    fp_diameter_mean_m: float = 0.10
    fp_diameter_sigma_m: float = 0.02

    def __post_init__(self):
        if not (0.0 <= self.detection_prob <= 1.0):
            raise ValueError("detection_prob must be in [0, 1]")
        if self.false_positives_per_image < 0:
            raise ValueError("false positive rate must be >= 0")
        if self.position_noise_sigma_m < 0 or self.bbox_size_noise_rel < 0:
            raise ValueError("noise sigmas must be >= 0")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned detection box in pixel coordinates of one capture.

    ``source_plant`` is simulator provenance (index into the ground truth,
    None for a spurious detection); downstream consumers must not use it
    for anything but reporting.
    """

    image_id: int
    box_id: int
    cx_px: float
    cy_px: float
    width_px: float
    height_px: float
    score: float
    source_plant: int | None = None


@dataclass(frozen=True)
class Target:
    position: LocalPoint
    support: tuple[int, ...]            # contributing box ids
    source_plants: tuple[int, ...]      # provenance: plants behind the support


@dataclass(frozen=True)
class TargetList:
    targets: tuple[Target, ...]

    def __len__(self) -> int:
        return len(self.targets)

    def positions(self) -> np.ndarray:
        return np.array([t.position.xy for t in self.targets], dtype=float).reshape(-1, 2)


def _rng(seed, *extra) -> np.random.Generator:
    parts = list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]
    parts.extend(int(e) for e in extra)
    return np.random.default_rng(parts)


def _truncated_normal(rng: np.random.Generator, mean: float, sigma: float,
                      size: int, minimum: float) -> np.ndarray:
    """Normal draws resampled until all lie above ``minimum``."""
    if sigma <= 0:
        return np.full(size, max(mean, minimum))
    out = rng.normal(mean, sigma, size)
    for _ in range(100):
        bad = out < minimum
        if not bad.any():
            break
        out[bad] = rng.normal(mean, sigma, int(bad.sum()))
    return np.maximum(out, minimum)


def generate_field(seed, polygon: FieldPolygon, density_per_ha: float,
                   diameter_mean_m: float = 0.10,
                   diameter_sigma_m: float = 0.02) -> GroundTruth:
    """Poisson-distributed plants placed uniformly inside the polygon.

    The plant count is Poisson(density * area); positions are rejection
    sampled from the bounding box. Diameters follow a normal truncated at
    20 mm. Deterministic for a given seed.
    """
    if density_per_ha < 0:
        raise ValueError("density must be >= 0")
    rng = _rng(seed)
    area_ha = polygon.area_m2 / 10_000.0
    count = int(rng.poisson(density_per_ha * area_ha))
    if count == 0:
        return GroundTruth(plants=())
    xmin, ymin, xmax, ymax = polygon.bounds()
    pts: list[tuple[float, float]] = []
    while len(pts) < count:
        xs = rng.uniform(xmin, xmax, count)
        ys = rng.uniform(ymin, ymax, count)
        for x, y in zip(xs, ys):
            if len(pts) < count and polygon.contains(x, y):
                pts.append((float(x), float(y)))
    diameters = _truncated_normal(rng, diameter_mean_m, diameter_sigma_m,
                                  count, MIN_PLANT_DIAMETER_M)
    plants = tuple(Plant(LocalPoint(x, y), float(d))
                   for (x, y), d in zip(pts, diameters))
    return GroundTruth(plants=plants)


def _capture_frame(capture: CaptureEvent, cam: CameraModel, origin: GeoPoint):
    """Per-capture projection constants: (base_xy, right, forward, gsd)."""
    base = wgs84_to_enu(origin, capture.pose.position)
    h = math.radians(capture.pose.heading_deg)
    right = np.array([math.cos(h), -math.sin(h)])
    forward = np.array([math.sin(h), math.cos(h)])
    gsd = cam.gsd_at(capture.pose.altitude_agl_m)
    return np.array(base.xy), right, forward, gsd


def _project_plants(plant_xy: np.ndarray, capture: CaptureEvent,
                    cam: CameraModel, origin: GeoPoint) -> tuple[np.ndarray, np.ndarray, float]:
    base, right, forward, gsd = _capture_frame(capture, cam, origin)
    delta = plant_xy - base
    px = cam.width_px / 2.0 + (delta @ right) / gsd
    py = cam.height_px / 2.0 - (delta @ forward) / gsd
    return px, py, gsd


def visibility_counts(truth: GroundTruth, captures: list[CaptureEvent],
                      cam: CameraModel, origin: GeoPoint) -> np.ndarray:
    """How many captures contain each plant in full (disc entirely in frame)."""
    counts = np.zeros(len(truth.plants), dtype=int)
    if not truth.plants or not captures:
        return counts
    plant_xy = np.array([p.position.xy for p in truth.plants])
    radii = np.array([p.diameter_m / 2.0 for p in truth.plants])
    for cap in captures:
        px, py, gsd = _project_plants(plant_xy, cap, cam, origin)
        r_px = radii / gsd
        inside = ((px - r_px >= 0) & (px + r_px <= cam.width_px) &
                  (py - r_px >= 0) & (py + r_px <= cam.height_px))
        counts += inside
    return counts


def simulate_detections(truth: GroundTruth, captures: list[CaptureEvent],
                        cam: CameraModel, detector: DetectorModel,
                        seed, origin: GeoPoint) -> list[BBox]:
    """Detector outcome per capture, deterministic given the seed.

    A plant is eligible in a capture only when its disc lies fully inside
    the frame (partially visible plants are picked up by the overlapping
    neighbour image instead, so noise-free boxes are never cropped). Each
    capture consumes an independent random stream derived from
    (seed, image_id), so per-image simulation order does not matter.
    """
    boxes: list[BBox] = []
    plant_xy = np.array([p.position.xy for p in truth.plants]).reshape(-1, 2)
    diameters = np.array([p.diameter_m for p in truth.plants])
    box_id = 0
    for cap in captures:
        rng = _rng(seed, cap.image_id)
        n = len(truth.plants)
        if n:
            px, py, gsd = _project_plants(plant_xy, cap, cam, origin)
            r_px = diameters / (2.0 * gsd)
            visible = ((px - r_px >= 0) & (px + r_px <= cam.width_px) &
                       (py - r_px >= 0) & (py + r_px <= cam.height_px))
            detected = visible & (rng.random(n) < detector.detection_prob)
            noise_px = rng.normal(0.0, 1.0, (n, 2)) * \
                (detector.position_noise_sigma_m / gsd)
            size_scale = 1.0 + rng.normal(0.0, 1.0, n) * detector.bbox_size_noise_rel
            scores = rng.uniform(0.5, 1.0, n)
            for idx in np.flatnonzero(detected):
                side = max(diameters[idx] / gsd * size_scale[idx], 1.0)
                box = _clipped_box(px[idx] + noise_px[idx, 0],
                                   py[idx] + noise_px[idx, 1],
                                   side, side, cam)
                if box is None:
                    continue
                cx, cy, w, h = box
                boxes.append(BBox(cap.image_id, box_id, cx, cy, w, h,
                                  float(scores[idx]), source_plant=int(idx)))
                box_id += 1
        else:
            gsd = cam.gsd_at(cap.pose.altitude_agl_m)
        n_fp = int(rng.poisson(detector.false_positives_per_image))
        if n_fp:
            fx = rng.uniform(0, cam.width_px, n_fp)
            fy = rng.uniform(0, cam.height_px, n_fp)
            fd = _truncated_normal(rng, detector.fp_diameter_mean_m,
                                   detector.fp_diameter_sigma_m, n_fp,
                                   MIN_PLANT_DIAMETER_M)
            fs = rng.uniform(0.5, 1.0, n_fp)
            for j in range(n_fp):
                side = max(fd[j] / gsd, 1.0)
                box = _clipped_box(fx[j], fy[j], side, side, cam)
                if box is None:
                    continue
                cx, cy, w, h = box
                boxes.append(BBox(cap.image_id, box_id, cx, cy, w, h,
                                  float(fs[j]), source_plant=None))
                box_id += 1
    return boxes


def _clipped_box(cx: float, cy: float, w: float, h: float,
                 cam: CameraModel) -> tuple[float, float, float, float] | None:
    """Clip a box to the image; None when nothing remains."""
    x0 = max(cx - w / 2.0, 0.0)
    x1 = min(cx + w / 2.0, float(cam.width_px))
    y0 = max(cy - h / 2.0, 0.0)
    y1 = min(cy + h / 2.0, float(cam.height_px))
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        return None
    return ((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)


def filter_boxes(boxes: list[BBox], gsd_m_per_px: float, min_area_m2: float,
                 min_area_to_length_m: float) -> list[BBox]:
    """Keep boxes passing both the ground-area and area-to-length gates.

    Area is w*h*gsd^2; the area-to-length ratio divides it by the longer
    side in meters, which equals the shorter side. Order is preserved and
    the filter is idempotent.
    """
    if min_area_m2 < 0 or min_area_to_length_m < 0:
        raise ValueError("thresholds must be >= 0")
    kept = []
    for b in boxes:
        w_m = b.width_px * gsd_m_per_px
        h_m = b.height_px * gsd_m_per_px
        area = w_m * h_m
        ratio = area / max(w_m, h_m)
        if area >= min_area_m2 and ratio >= min_area_to_length_m:
            kept.append(b)
    return kept


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def _single_linkage(points: np.ndarray, radius: float) -> list[list[int]]:
    uf = _UnionFind(len(points))
    if len(points) > 1 and radius > 0:
        tree = cKDTree(points)
        for a, b in sorted(tree.query_pairs(radius)):
            uf.union(a, b)
    clusters: dict[int, list[int]] = {}
    for i in range(len(points)):
        clusters.setdefault(uf.find(i), []).append(i)
    return [clusters[k] for k in sorted(clusters, key=lambda r: min(clusters[r]))]


def georef_and_merge(boxes: list[BBox], captures: list[CaptureEvent],
                     cam: CameraModel, merge_radius_m: float,
                     origin: GeoPoint) -> TargetList:
    """Georeference box midpoints and merge duplicates into targets.

    Single-linkage clustering with the merge radius as link distance;
    target position is the centroid of the cluster. In rare chain-shaped
    clusters two centroids can still fall within the radius, so centroids
    are re-merged (member-weighted) until pairwise separation holds.
    """
    if merge_radius_m < 0:
        raise ValueError("merge radius must be >= 0")
    cap_by_id = {c.image_id: c for c in captures}
    positions = np.zeros((len(boxes), 2))
    for i, b in enumerate(boxes):
        cap = cap_by_id.get(b.image_id)
        if cap is None:
            raise UnknownImageId(f"box {b.box_id} references unknown image {b.image_id}")
        base, right, forward, gsd = _capture_frame(cap, cam, origin)
        right_m = (b.cx_px - cam.width_px / 2.0) * gsd
        forward_m = (cam.height_px / 2.0 - b.cy_px) * gsd
        positions[i] = base + right_m * right + forward_m * forward

    if not boxes:
        return TargetList(targets=())

    clusters = _single_linkage(positions, merge_radius_m)
    centroids = np.array([positions[c].mean(axis=0) for c in clusters])
    weights = np.array([len(c) for c in clusters], dtype=float)
    members: list[list[int]] = [list(c) for c in clusters]

    # enforce pairwise separation >= radius between final targets
    while len(centroids) > 1:
        regroup = _single_linkage(centroids, merge_radius_m)
        if len(regroup) == len(centroids):
            break
        new_c, new_w, new_m = [], [], []
        for grp in regroup:
            w = weights[grp]
            new_c.append(np.average(centroids[grp], axis=0, weights=w))
            new_w.append(w.sum())
            new_m.append(sorted(i for g in grp for i in members[g]))
        centroids = np.array(new_c)
        weights = np.array(new_w)
        members = new_m

    targets = []
    for c, mem in zip(centroids, members):
        support = tuple(boxes[i].box_id for i in mem)
        plants = tuple(sorted({boxes[i].source_plant for i in mem
                               if boxes[i].source_plant is not None}))
        targets.append(Target(position=LocalPoint(float(c[0]), float(c[1])),
                              support=support, source_plants=plants))
    return TargetList(targets=tuple(targets))

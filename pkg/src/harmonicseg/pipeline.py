"""Instance extraction from predicted (or oracle) distance and encoding maps.

The chain mirrors what runs after a shape-prediction network: upsample the
map heads to input resolution, find distance-map peaks as instance
centroids, average the SH encodings in a 5x5x5 window around each peak
(weighted by the predicted distance values), and voxelize every encoding
into a label volume, resolving overlaps by radial interiority.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .basis import coefficient_count
from .codec import ShapeEncoding, radial_interiority
from .errors import DegenerateDetectionError
from .targets import compute_distance_map, compute_encoding_map

ALLOWED_SCALES = (1, 2, 4, 8)
AGGREGATION_RADIUS = 2   # 5x5x5 window
SUPPORT_THRESHOLD = 0.2  # distance level delimiting an instance's support


@dataclass(frozen=True)
class PredictionMaps:
    """Distance map plus R-channel encoding map, possibly downsampled."""

    distance: np.ndarray          # (x, y, z)
    encodings: np.ndarray         # (x, y, z, R)
    scale_factor: int = 1

    def __post_init__(self):
        if self.distance.ndim != 3 or self.encodings.ndim != 4:
            raise ValueError("distance must be 3-d, encodings 4-d")
        if self.distance.shape != self.encodings.shape[:3]:
            raise ValueError("distance and encoding maps must share extents")
        if self.scale_factor not in ALLOWED_SCALES:
            raise ValueError(f"scale_factor must be one of {ALLOWED_SCALES}")

    @property
    def channel_count(self):
        return self.encodings.shape[3]


@dataclass(frozen=True)
class DetectionParams:
    t_det: float = 0.5
    d_min: int = 10

    def __post_init__(self):
        if not 0.0 <= self.t_det <= 1.0:
            raise ValueError("t_det must be in [0, 1]")
        if self.d_min < 1:
            raise ValueError("d_min must be >= 1")


@dataclass(frozen=True)
class InstanceSegmentation:
    labels: np.ndarray
    encodings: dict
    detections: np.ndarray   # (k, 3) peak coordinates in detection order


def _upsample_distance(distance, scale, target_dims):
    coords = np.meshgrid(
        *(np.arange(t, dtype=float) / scale for t in target_dims), indexing="ij"
    )
    return ndimage.map_coordinates(
        distance, np.stack([c.ravel() for c in coords]), order=1, mode="nearest"
    ).reshape(target_dims).astype(distance.dtype)


def upsample_maps(maps, target_dims):
    """Bring prediction maps to input resolution (scale factor 1).

    Distance values are interpolated trilinearly; encoding channels are
    piecewise constant per instance and therefore upsampled with
    nearest-neighbor lookup.
    """
    target_dims = tuple(int(d) for d in target_dims)
    s = maps.scale_factor
    for t, d in zip(target_dims, maps.distance.shape):
        if abs(t - d * s) > s:
            raise ValueError(
                f"target dims {target_dims} do not match map dims "
                f"{maps.distance.shape} at scale {s}"
            )
    if s == 1 and target_dims == maps.distance.shape:
        return maps
    distance = _upsample_distance(maps.distance, s, target_dims)
    idx = [np.minimum(np.arange(t) // s, d - 1)
           for t, d in zip(target_dims, maps.distance.shape)]
    encodings = maps.encodings[np.ix_(*idx)]
    return PredictionMaps(distance=distance, encodings=encodings, scale_factor=1)


def detect_peaks(distance, params):
    """Distance-map peaks: window maxima above ``t_det`` with greedy
    suppression so returned peaks are pairwise more than ``2 * d_min``
    apart (Chebyshev).

    Candidates are voxels >= every value in the cubic window of side
    ``2 * d_min + 1`` around them; they are then accepted in decreasing
    value order (ties: lexicographically smallest coordinate), skipping
    any candidate within ``2 * d_min`` of an accepted peak.  Returned as
    an ``(k, 3)`` int array in acceptance order.
    """
    distance = np.asarray(distance)
    window = 2 * params.d_min + 1
    local_max = ndimage.maximum_filter(distance, size=window, mode="constant",
                                       cval=-np.inf)
    cand = np.argwhere((distance >= params.t_det) & (distance >= local_max))
    if cand.size == 0:
        return np.empty((0, 3), dtype=int)
    values = distance[cand[:, 0], cand[:, 1], cand[:, 2]]
    order = np.lexsort((cand[:, 2], cand[:, 1], cand[:, 0],
                        -values.astype(np.float64)))
    cand = cand[order]
    accepted = []
    min_sep = 2 * params.d_min
    for c in cand:
        if all(np.max(np.abs(c - a)) > min_sep for a in accepted):
            accepted.append(c)
    return np.array(accepted, dtype=int)


def _aggregate(distance_full, encodings, scale, centroid):
    """Distance-weighted mean encoding over the 5x5x5 window at a peak.

    ``encodings`` may still be at a reduced scale; values are read through
    the nearest-neighbor index mapping, equivalent to aggregating on the
    materialized upsampled map.
    """
    dims = np.asarray(distance_full.shape)
    c = np.asarray(centroid, dtype=int)
    if np.any(c < 0) or np.any(c >= dims):
        raise ValueError(f"centroid {tuple(centroid)} outside the volume")
    lo = np.maximum(c - AGGREGATION_RADIUS, 0)
    hi = np.minimum(c + AGGREGATION_RADIUS, dims - 1)
    slices = tuple(slice(l, h + 1) for l, h in zip(lo, hi))
    weights = np.maximum(
        distance_full[slices].astype(np.float64), 0.0
    )
    total = weights.sum()
    if total == 0.0:
        raise DegenerateDetectionError(
            f"all aggregation weights are zero around {tuple(c)}"
        )
    idx = [np.minimum(np.arange(l, h + 1) // scale, e - 1)
           for l, h, e in zip(lo, hi, encodings.shape[:3])]
    values = encodings[np.ix_(*idx)].astype(np.float64)
    coeffs = np.tensordot(weights, values, axes=3) / total
    l_max = int(round(math.sqrt(coeffs.size))) - 1
    return ShapeEncoding(centroid=c.astype(float), l_max=l_max,
                         coefficients=coeffs)


def aggregate_encoding(maps, centroid):
    """Robust shape encoding at a detected centroid (scale-1 maps)."""
    if maps.scale_factor != 1:
        raise ValueError("aggregate_encoding expects maps at scale 1")
    return _aggregate(maps.distance, maps.encodings, 1, centroid)


def _refine_centroid(distance_full, peak, radius_hint, scale):
    """Sub-voxel instance centroid: center of mass of the local distance-map
    support (values above :data:`SUPPORT_THRESHOLD`) around a peak.

    For oracle maps this recovers the voxel-mask centroid the encoding was
    expressed about; the ``(scale - 1) / 2`` shift compensates the content
    displacement of corner-aligned upsampling after mean pooling.
    """
    dims = np.asarray(distance_full.shape)
    c = np.asarray(peak, dtype=int)
    box = int(math.ceil(1.3 * max(radius_hint, 1.0))) + 2
    lo = np.maximum(c - box, 0)
    hi = np.minimum(c + box, dims - 1)
    slices = tuple(slice(l, h + 1) for l, h in zip(lo, hi))
    support = distance_full[slices] >= SUPPORT_THRESHOLD
    if not support.any():
        return c.astype(float)
    # keep only the connected support containing the peak so a neighboring
    # instance inside the box cannot bias the center of mass
    components, _ = ndimage.label(support)
    peak_component = components[tuple(c - lo)]
    if peak_component > 0:
        support = components == peak_component
    grids = np.meshgrid(*(np.arange(l, h + 1) for l, h in zip(lo, hi)),
                        indexing="ij")
    com = np.array([g[support].mean() for g in grids])
    return com + (scale - 1) / 2.0


def assemble_instances(detections, encodings, dims):
    """Voxelize encodings into a label volume.

    Contested voxels go to the instance with the smallest normalized
    radial coordinate (most interior); labels are numbered in detection
    order starting at 1.
    """
    dims = tuple(int(d) for d in dims)
    labels = np.zeros(dims, dtype=np.uint16)
    best = np.full(dims, np.inf, dtype=np.float64)
    out_encodings = {}
    for k, enc in enumerate(encodings, start=1):
        out_encodings[k] = enc
        slices, ratio = radial_interiority(enc, dims)
        claim = (ratio <= 1.0) & (ratio < best[slices])
        labels[slices][claim] = k
        best[slices][claim] = ratio[claim]
    detections = (np.asarray(detections, dtype=int).reshape(-1, 3)
                  if len(detections) else np.empty((0, 3), dtype=int))
    return InstanceSegmentation(labels=labels, encodings=out_encodings,
                                detections=detections)


def _block_mean_downsample(values, scale):
    dims = values.shape
    pad = [(0, (-d) % scale) for d in dims]
    if any(p[1] for p in pad):
        values = np.pad(values, pad, mode="edge")
    nx, ny, nz = (s // scale for s in values.shape)
    return values.reshape(nx, scale, ny, scale, nz, scale).mean(axis=(1, 3, 5),
                                                                dtype=np.float64)


def make_oracle_predictions(volume, encodings, scale_factor=1, noise_sigma=0.0,
                            seed=0):
    """Ground-truth-derived stand-in for the network's prediction heads.

    Computes the exact target maps, downsamples (mean pooling for the
    distance map, nearest-neighbor for the label-wise constant encoding
    map), and optionally adds zero-mean Gaussian noise scaled by each
    map's value range.  Deterministic per seed.
    """
    if scale_factor not in ALLOWED_SCALES:
        raise ValueError(f"scale_factor must be one of {ALLOWED_SCALES}")
    volume = np.asarray(volume)
    distance = compute_distance_map(volume)
    if scale_factor > 1:
        distance = _block_mean_downsample(distance, scale_factor).astype(np.float32)
        low_labels = volume[::scale_factor, ::scale_factor, ::scale_factor]
    else:
        low_labels = volume
    enc_map = compute_encoding_map(low_labels, encodings)
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        dist_scale = float(distance.max()) if distance.size else 0.0
        distance = distance + (noise_sigma * dist_scale) * rng.standard_normal(
            distance.shape
        ).astype(np.float32)
        enc_scale = float(np.abs(enc_map).max()) if enc_map.size else 0.0
        enc_map = enc_map + (noise_sigma * enc_scale) * rng.standard_normal(
            enc_map.shape
        ).astype(np.float32)
    return PredictionMaps(distance=distance.astype(np.float32),
                          encodings=enc_map.astype(np.float32),
                          scale_factor=scale_factor)


def segment_maps(maps, target_dims, params):
    """Full post-processing chain: upsample, detect, aggregate, assemble."""
    target_dims = tuple(int(d) for d in target_dims)
    if maps.scale_factor == 1 and target_dims == maps.distance.shape:
        distance_full = maps.distance
    else:
        distance_full = _upsample_distance(maps.distance, maps.scale_factor,
                                           target_dims)
    peaks = detect_peaks(distance_full, params)
    encodings = []
    kept = []
    for peak in peaks:
        try:
            agg = _aggregate(distance_full, maps.encodings,
                             maps.scale_factor, peak)
        except DegenerateDetectionError:
            continue
        centroid = _refine_centroid(distance_full, peak, agg.mean_radius,
                                    maps.scale_factor)
        encodings.append(ShapeEncoding(centroid=centroid, l_max=agg.l_max,
                                       coefficients=agg.coefficients))
        kept.append(peak)
    return assemble_instances(kept, encodings, target_dims)

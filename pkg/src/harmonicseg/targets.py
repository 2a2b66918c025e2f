"""Training targets and reference loss functions.

Targets are what a shape-prediction network would regress: a per-voxel
relative boundary distance map and a per-voxel copy of the containing
instance's SH coefficients.  The losses are plain L1 terms: the distance
loss balances foreground (target >= 0.5) and background by class-count
normalization; the encoding loss is the mean absolute coefficient error
over foreground voxels only.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .basis import coefficient_count


def _check_label_volume(volume):
    volume = np.asarray(volume)
    if volume.ndim != 3:
        raise ValueError("label volume must be 3-d")
    return volume


def compute_distance_map(volume, dtype=np.float32):
    """Per-instance normalized Euclidean boundary distance; background 0.

    Each instance gets the exact Euclidean distance to its nearest
    non-instance voxel, divided by the per-instance maximum, so every
    instance peaks at 1.
    """
    volume = _check_label_volume(volume)
    out = np.zeros(volume.shape, dtype=dtype)
    objects = ndimage.find_objects(volume)
    for label, slc in enumerate(objects, start=1):
        if slc is None:
            continue
        padded = tuple(
            slice(max(s.start - 1, 0), min(s.stop + 1, dim))
            for s, dim in zip(slc, volume.shape)
        )
        mask = volume[padded] == label
        dist = ndimage.distance_transform_edt(mask)
        peak = dist.max()
        if peak > 0:
            out[padded][mask] = (dist[mask] / peak).astype(dtype)
    return out


def compute_encoding_map(volume, encodings, dtype=np.float32):
    """Broadcast per-instance coefficients to member voxels.

    Returns an ``(x, y, z, R)`` array; background voxels are all-zero.
    """
    volume = _check_label_volume(volume)
    labels = np.unique(volume)
    labels = labels[labels > 0]
    missing = [int(k) for k in labels if k not in encodings]
    if missing:
        raise ValueError(f"no encoding for instance id(s) {missing}")
    l_maxes = {encodings[int(k)].l_max for k in labels}
    if len(l_maxes) > 1:
        raise ValueError("encodings must share a common l_max")
    l_max = l_maxes.pop() if l_maxes else 0
    r = coefficient_count(l_max)
    out = np.zeros(volume.shape + (r,), dtype=dtype)
    for k in labels:
        out[volume == k] = encodings[int(k)].coefficients.astype(dtype)
    return out


@dataclass(frozen=True)
class LossWeights:
    lambda_dist: float = 0.5
    lambda_harm: float = 0.5

    def __post_init__(self):
        if self.lambda_dist < 0 or self.lambda_harm < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lambda_dist == 0 and self.lambda_harm == 0:
            raise ValueError("at least one loss weight must be positive")


def loss_dist(x_t, x_p):
    """Class-balanced L1 distance-map loss.

    Foreground is ``x_t >= 0.5``; each class contributes the mean absolute
    error over its own voxels (0 for an empty class).
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    x_p = np.asarray(x_p, dtype=np.float64)
    if x_t.shape != x_p.shape:
        raise ValueError("distance maps must have equal shapes")
    fg = x_t >= 0.5
    diff = np.abs(x_t - x_p)
    total = 0.0
    n_fg = int(fg.sum())
    if n_fg:
        total += float(diff[fg].sum()) / n_fg
    n_bg = diff.size - n_fg
    if n_bg:
        total += float(diff[~fg].sum()) / n_bg
    return total


def loss_harm(y_t, y_p, x_t):
    """Mean absolute coefficient error over foreground voxels (``x_t > 0``)."""
    y_t = np.asarray(y_t, dtype=np.float64)
    y_p = np.asarray(y_p, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    if y_t.shape != y_p.shape:
        raise ValueError("encoding maps must have equal shapes")
    if y_t.shape[:-1] != x_t.shape:
        raise ValueError("encoding and distance maps must share spatial extents")
    fg = x_t > 0
    n_fg = int(fg.sum())
    if n_fg == 0:
        return 0.0
    channels = y_t.shape[-1]
    return float(np.abs(y_t[fg] - y_p[fg]).sum()) / (n_fg * channels)


def loss_combined(x_t, x_p, y_t, y_p, weights=LossWeights()):
    """Weighted sum of the distance and encoding losses."""
    return (weights.lambda_dist * loss_dist(x_t, x_p)
            + weights.lambda_harm * loss_harm(y_t, y_p, x_t))

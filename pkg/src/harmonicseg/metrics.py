"""Instance-level evaluation: Dice overlap, greedy matching, and the
encoding accuracy-vs-coefficient-count trade-off curve."""

from dataclasses import dataclass

import numpy as np

from .basis import build_basis_matrix, coefficient_count
from .codec import (ShapeEncoding, decode_to_volume, fit_coefficients,
                    instance_centroid, sample_radii)
from .errors import DegenerateCentroidError, EvaluationError


def dice(a, b):
    """Dice overlap of two binary masks; 1 when both are empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError("masks must have equal shapes")
    size = int(a.sum()) + int(b.sum())
    if size == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / size


@dataclass(frozen=True)
class InstanceMatching:
    pairs: list            # (gt id, pred id), each id at most once
    unmatched_gt: list
    unmatched_pred: list
    overlaps: dict         # (gt id, pred id) -> shared voxel count


def _overlap_table(gt, pred):
    both = (gt > 0) & (pred > 0)
    if not both.any():
        return {}
    pairs = np.stack([gt[both].astype(np.int64), pred[both].astype(np.int64)],
                     axis=1)
    uniq, counts = np.unique(pairs, axis=0, return_counts=True)
    return {(int(g), int(p)): int(c) for (g, p), c in zip(uniq, counts)}


def match_instances(gt, pred):
    """Greedy one-to-one matching by descending overlap voxel count.

    Ties are broken by the smaller ``(gt id, pred id)`` pair.
    """
    gt = np.asarray(gt)
    pred = np.asarray(pred)
    if gt.shape != pred.shape:
        raise ValueError("label volumes must have equal shapes")
    overlaps = _overlap_table(gt, pred)
    order = sorted(overlaps.items(), key=lambda kv: (-kv[1], kv[0]))
    used_gt, used_pred, pairs = set(), set(), []
    for (g, p), _count in order:
        if g in used_gt or p in used_pred:
            continue
        pairs.append((g, p))
        used_gt.add(g)
        used_pred.add(p)
    gt_ids = [int(k) for k in np.unique(gt) if k > 0]
    pred_ids = [int(k) for k in np.unique(pred) if k > 0]
    return InstanceMatching(
        pairs=pairs,
        unmatched_gt=[g for g in gt_ids if g not in used_gt],
        unmatched_pred=[p for p in pred_ids if p not in used_pred],
        overlaps=overlaps,
    )


def averaged_instance_dice(gt, pred):
    """Mean Dice over ground-truth instances; unmatched instances score 0."""
    gt = np.asarray(gt)
    pred = np.asarray(pred)
    matching = match_instances(gt, pred)
    gt_ids, gt_counts = np.unique(gt[gt > 0], return_counts=True)
    if gt_ids.size == 0:
        raise ValueError("ground truth contains no instances")
    pred_ids, pred_counts = np.unique(pred[pred > 0], return_counts=True)
    gt_sizes = dict(zip(gt_ids.astype(int), gt_counts.astype(int)))
    pred_sizes = dict(zip(pred_ids.astype(int), pred_counts.astype(int)))
    matched = dict(matching.pairs)
    scores = []
    for g in gt_sizes:
        p = matched.get(g)
        if p is None:
            scores.append(0.0)
        else:
            inter = matching.overlaps[(g, p)]
            scores.append(2.0 * inter / (gt_sizes[g] + pred_sizes[p]))
    return float(np.mean(scores))


@dataclass(frozen=True)
class TradeoffCurve:
    points: list           # (R, mean round-trip Dice)
    skipped_instances: int


def tradeoff_curve(gt, orders, orientations):
    """Round-trip Dice of encode+decode at each SH order.

    Radii are sampled once per instance and refitted with truncated bases,
    so the curve isolates the effect of the coefficient count R.
    Instances whose centroid falls outside themselves are skipped and
    counted in ``skipped_instances``.
    """
    gt = np.asarray(gt)
    orders = sorted(int(l) for l in orders)
    if not orders:
        raise ValueError("orders must be non-empty")
    ids = [int(k) for k in np.unique(gt) if k > 0]
    if not ids:
        raise ValueError("ground truth contains no instances")
    basis = build_basis_matrix(orientations, max(orders))
    sampled = {}
    skipped = 0
    for k in ids:
        centroid = instance_centroid(gt, k)
        try:
            sampled[k] = sample_radii(gt, k, centroid, orientations), centroid
        except DegenerateCentroidError:
            skipped += 1
    if not sampled:
        raise EvaluationError("every instance has a degenerate centroid")
    points = []
    for l in orders:
        sub = basis.truncated(l)
        scores = []
        for k, (samples, centroid) in sampled.items():
            coeffs, _ = fit_coefficients(samples, sub)
            enc = ShapeEncoding(centroid=centroid, l_max=l, coefficients=coeffs)
            scores.append(dice(decode_to_volume(enc, gt.shape), gt == k))
        points.append((coefficient_count(l), float(np.mean(scores))))
    return TradeoffCurve(points=points, skipped_instances=skipped)

"""Command-line interface tying the modules into file-based pipelines.

Volumes travel as ``.shv`` files (see :mod:`harmonicseg.volume_io`), shape
encodings as JSON documents, orientation sets as ``theta,phi`` CSV.  An
R-channel encoding map is stored as a single float32 volume with the
channels stacked along z (extents ``x, y, z * R``); the channel count is
recovered from the accompanying distance map.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""

import argparse
import json
import sys

import numpy as np

from .basis import build_basis_matrix, coefficient_count
from .codec import (ShapeEncoding, decode_to_volume, encode_instance,
                    load_encodings, radial_interiority, save_encodings)
from .config import RunConfig
from .errors import VolumeFormatError
from .metrics import averaged_instance_dice, match_instances, tradeoff_curve
from .phantom import (PhantomSpec, Psf, add_gaussian_noise, apply_psf,
                      generate_phantom)
from .pipeline import PredictionMaps, make_oracle_predictions, segment_maps, \
    DetectionParams
from .sampling import (fibonacci_lattice, load_orientations,
                       repulsion_optimize, save_orientations)
from .targets import (LossWeights, compute_distance_map, loss_combined,
                      loss_dist, loss_harm)
from .volume_io import read_volume, write_volume


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_triple(text, kind=int):
    parts = [kind(p) for p in text.split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected 1 or 3 values, got {text!r}")
    return tuple(parts)


def _parse_range(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo,hi, got {text!r}")
    return tuple(parts)


def _json_line(record):
    return json.dumps(
        {k: (float(f"{v:.9g}") if isinstance(v, float) else v)
         for k, v in record.items()}
    )


def _load_orientation_file(path, cfg):
    if path is None:
        return fibonacci_lattice(cfg.n_orientations, seed=cfg.seed)
    return load_orientations(path, seed=cfg.seed)


def _split_encoding_map(stacked, z):
    x, y, zr = stacked.shape
    if zr % z:
        raise ValueError(
            f"encoding map z extent {zr} is not a multiple of the distance "
            f"map z extent {z}"
        )
    channels = zr // z
    return np.moveaxis(stacked.reshape(x, y, channels, z), 2, 3)


def _stack_encoding_map(enc):
    x, y, z, channels = enc.shape
    return np.moveaxis(enc, 3, 2).reshape(x, y, z * channels)


def cmd_sample(args, cfg):
    orientations = fibonacci_lattice(args.n or cfg.n_orientations,
                                     seed=cfg.seed)
    if args.iters > 0:
        orientations = repulsion_optimize(orientations, max_iters=args.iters)
    save_orientations(orientations, args.out)
    print(_json_line({"n": len(orientations),
                      "energy": orientations.energy,
                      "min_pairwise_angle": orientations.min_pairwise_angle}))
    return 0


def cmd_encode(args, cfg):
    volume = read_volume(getattr(args, "in"))
    orientations = _load_orientation_file(args.orient, cfg)
    l_max = args.lmax if args.lmax is not None else cfg.l_max
    basis = build_basis_matrix(orientations, l_max)
    encodings = {}
    for k in np.unique(volume):
        if k == 0:
            continue
        encodings[int(k)] = encode_instance(volume, int(k), orientations, basis)
    save_encodings(encodings, l_max, args.out, orientation_seed=cfg.seed)
    print(_json_line({"instances": len(encodings),
                      "coefficients": coefficient_count(l_max)}))
    return 0


def cmd_decode(args, cfg):
    encodings, _l_max, _seed = load_encodings(args.enc)
    dims = args.dims
    labels = np.zeros(dims, dtype=np.uint16)
    best = np.full(dims, np.inf)
    for k in sorted(encodings):
        slices, ratio = radial_interiority(encodings[k], dims)
        claim = (ratio <= 1.0) & (ratio < best[slices])
        labels[slices][claim] = k
        best[slices][claim] = ratio[claim]
    write_volume(labels, args.out)
    print(_json_line({"instances": len(encodings),
                      "foreground_voxels": int((labels > 0).sum())}))
    return 0


def cmd_distmap(args, cfg):
    volume = read_volume(getattr(args, "in"))
    write_volume(compute_distance_map(volume), args.out)
    return 0


def cmd_losses(args, cfg):
    x_t = read_volume(args.true_dist)
    x_p = read_volume(args.pred_dist)
    weights = LossWeights(cfg.lambda_dist, cfg.lambda_harm)
    record = {"loss_dist": loss_dist(x_t, x_p)}
    if args.true_enc and args.pred_enc:
        y_t = _split_encoding_map(read_volume(args.true_enc), x_t.shape[2])
        y_p = _split_encoding_map(read_volume(args.pred_enc), x_p.shape[2])
        record["loss_harm"] = loss_harm(y_t, y_p, x_t)
    else:
        record["loss_harm"] = 0.0
        y_t = y_p = np.zeros(x_t.shape + (1,))
    record["loss_combined"] = (weights.lambda_dist * record["loss_dist"]
                               + weights.lambda_harm * record["loss_harm"])
    print(_json_line(record))
    return 0


def cmd_simulate(args, cfg):
    spec = PhantomSpec(dims=args.dims, n_cells=args.cells,
                       radius_range=args.radius, l_max=cfg.l_max,
                       perturbation=args.perturbation,
                       min_separation=args.sep, seed=cfg.seed)
    scene = generate_phantom(spec)
    image = scene.intensity
    if any(s > 0 for s in args.psf_sigma):
        image = apply_psf(image, Psf(args.psf_sigma))
    if args.noise > 0:
        image = add_gaussian_noise(image, args.noise, seed=cfg.seed)
    if args.out_image:
        write_volume(image.astype(np.float32), args.out_image)
    write_volume(scene.labels, args.out_labels)
    save_encodings(scene.encodings, spec.l_max, args.out_enc,
                   orientation_seed=cfg.seed)
    print(_json_line({"cells": len(scene.encodings)}))
    return 0


def cmd_oracle(args, cfg):
    volume = read_volume(args.labels)
    encodings, _l_max, _seed = load_encodings(args.enc)
    maps = make_oracle_predictions(volume, encodings,
                                   scale_factor=args.scale,
                                   noise_sigma=args.noise_sigma,
                                   seed=cfg.seed)
    write_volume(maps.distance, args.out_dist)
    write_volume(_stack_encoding_map(maps.encodings), args.out_enc)
    print(_json_line({"scale": maps.scale_factor,
                      "channels": maps.channel_count}))
    return 0


def cmd_extract(args, cfg):
    distance = read_volume(args.dist)
    enc_map = _split_encoding_map(read_volume(args.enc_map), distance.shape[2])
    maps = PredictionMaps(distance=distance, encodings=enc_map,
                          scale_factor=args.scale)
    if args.dims is not None:
        target = args.dims
    else:
        target = tuple(int(d * args.scale) for d in distance.shape)
    params = DetectionParams(
        t_det=args.t_det if args.t_det is not None else cfg.t_det,
        d_min=args.d_min if args.d_min is not None else cfg.d_min,
    )
    result = segment_maps(maps, target, params)
    write_volume(result.labels, args.out_labels)
    l_max = int(round(np.sqrt(maps.channel_count))) - 1
    save_encodings(result.encodings, l_max, args.out_enc,
                   orientation_seed=cfg.seed)
    print(_json_line({"detections": len(result.encodings)}))
    return 0


def cmd_evaluate(args, cfg):
    gt = read_volume(args.gt)
    pred = read_volume(args.pred)
    matching = match_instances(gt, pred)
    record = {
        "mean_dice": averaged_instance_dice(gt, pred),
        "matched": len(matching.pairs),
        "missed": len(matching.unmatched_gt),
        "spurious": len(matching.unmatched_pred),
    }
    print(_json_line(record))
    return 0


def cmd_tradeoff(args, cfg):
    volume = read_volume(args.labels)
    orientations = _load_orientation_file(args.orient, cfg)
    orders = [int(o) for o in args.orders.split(",")]
    curve = tradeoff_curve(volume, orders, orientations)
    with open(args.out, "w") as fh:
        fh.write("R,mean_dice\n")
        for r, score in curve.points:
            fh.write(f"{r},{score:.9g}\n")
    print(_json_line({"points": len(curve.points),
                      "skipped": curve.skipped_instances}))
    return 0


def build_parser():
    parser = _Parser(prog="harmonicseg",
                     description="Spherical-harmonics shape encoding for 3D "
                                 "instance segmentation")
    parser.add_argument("--config", help="JSON run configuration file")
    parser.add_argument("--seed", type=int, default=None,
                        help="RNG seed (default 0)")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("sample", help="generate an orientation sampling pattern")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--iters", type=int, default=200,
                   help="repulsion iterations (0 = raw Fibonacci lattice)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("encode", help="encode a label volume to SH coefficients")
    p.add_argument("--in", required=True)
    p.add_argument("--orient", default=None, help="orientation CSV")
    p.add_argument("--lmax", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="voxelize an encoding JSON")
    p.add_argument("--enc", required=True)
    p.add_argument("--dims", type=_parse_triple, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("distmap", help="normalized boundary distance map")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_distmap)

    p = sub.add_parser("losses", help="reference losses between map files")
    p.add_argument("--true-dist", required=True)
    p.add_argument("--pred-dist", required=True)
    p.add_argument("--true-enc")
    p.add_argument("--pred-enc")
    p.set_defaults(func=cmd_losses)

    p = sub.add_parser("simulate", help="generate a synthetic nuclei scene")
    p.add_argument("--dims", type=_parse_triple, default=(256, 128, 128))
    p.add_argument("--cells", type=int, default=30)
    p.add_argument("--radius", type=_parse_range, default=(8.0, 14.0))
    p.add_argument("--perturbation", type=float, default=0.15)
    p.add_argument("--sep", type=float, default=30.0)
    p.add_argument("--psf-sigma", type=lambda s: _parse_triple(s, float),
                   default=(0.0, 0.0, 0.0))
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--out-image")
    p.add_argument("--out-labels", required=True)
    p.add_argument("--out-enc", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="oracle prediction maps from ground truth")
    p.add_argument("--labels", required=True)
    p.add_argument("--enc", required=True)
    p.add_argument("--scale", type=int, default=1)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--out-dist", required=True)
    p.add_argument("--out-enc", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("extract", help="instances from prediction maps")
    p.add_argument("--dist", required=True)
    p.add_argument("--enc-map", required=True)
    p.add_argument("--scale", type=int, default=1)
    p.add_argument("--dims", type=_parse_triple, default=None,
                   help="input-resolution extents (default: map dims * scale)")
    p.add_argument("--t-det", type=float, default=None)
    p.add_argument("--d-min", type=int, default=None)
    p.add_argument("--out-labels", required=True)
    p.add_argument("--out-enc", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("evaluate", help="averaged instance-level Dice")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tradeoff", help="accuracy vs coefficient count curve")
    p.add_argument("--labels", required=True)
    p.add_argument("--orient", default=None)
    p.add_argument("--orders", default="0,1,2,3,4,5")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tradeoff)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
        cfg = cfg.updated(seed=args.seed)
    except (OSError, ValueError) as exc:
        print(f"harmonicseg: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args, cfg)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"harmonicseg: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

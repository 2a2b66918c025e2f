"""Spherical-harmonics shape encoding for 3D cell instance segmentation."""

from .basis import (BasisMatrix, HarmonicIndex, build_basis_matrix,
                    coefficient_count, evaluate_basis, index_table)
from .codec import (RadialSampleSet, ShapeEncoding, TriangleMesh,
                    decode_to_mesh, decode_to_volume, encode_instance,
                    evaluate_radius, fit_coefficients, instance_centroid,
                    sample_radii)
from .config import RunConfig
from .estimator import SphericalHarmonicShapeEncoder
from .metrics import (InstanceMatching, TradeoffCurve, averaged_instance_dice,
                      dice, match_instances, tradeoff_curve)
from .phantom import (PhantomSpec, Psf, ScenePair, add_gaussian_noise,
                      apply_psf, generate_phantom, random_shape)
from .pipeline import (DetectionParams, InstanceSegmentation, PredictionMaps,
                       aggregate_encoding, assemble_instances, detect_peaks,
                       make_oracle_predictions, segment_maps, upsample_maps)
from .sampling import (OrientationSet, coulomb_energy, fibonacci_lattice,
                       ideal_packing_angle, load_orientations,
                       repulsion_optimize, save_orientations)
from .targets import (LossWeights, compute_distance_map, compute_encoding_map,
                      loss_combined, loss_dist, loss_harm)
from .volume_io import read_volume, write_volume

__version__ = "0.1.0"

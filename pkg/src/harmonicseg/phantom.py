"""Synthetic labeled 3D nuclei scenes.

Cells are random SH shapes (a uniform mean radius plus Gaussian
higher-order coefficients with a 1/(l+1) amplitude decay) placed at
rejection-sampled centroids, voxelized into a label volume, and imaged as
a binary intensity volume that can be blurred with a Gaussian PSF and
corrupted with additive Gaussian noise.
"""

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .basis import SQRT_4PI, build_basis_matrix, coefficient_count
from .codec import ShapeEncoding, radial_interiority
from .errors import ShapeGenerationError
from .sampling import fibonacci_lattice

_PROBE_COUNT = 500
_MIN_RADIUS_FRACTION = 0.2
_MAX_SHAPE_ATTEMPTS = 100


@dataclass(frozen=True)
class Psf:
    """Separable Gaussian point-spread function (per-axis sigma, voxels)."""

    sigma: tuple = (1.0, 1.0, 3.0)

    def __post_init__(self):
        sigma = tuple(float(s) for s in np.asarray(self.sigma).reshape(3))
        if any(s < 0 for s in sigma):
            raise ValueError("PSF sigmas must be >= 0")
        object.__setattr__(self, "sigma", sigma)


# presets emulating the structurally different train/test optics
PSF_TRAIN = Psf((1.0, 1.0, 3.0))
PSF_TEST = Psf((1.5, 1.5, 4.0))


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple = (256, 128, 128)
    n_cells: int = 30
    radius_range: tuple = (8.0, 14.0)
    l_max: int = 5
    perturbation: float = 0.15
    min_separation: float = 30.0
    seed: int = 0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        radius_range = tuple(float(r) for r in self.radius_range)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "radius_range", radius_range)
        if radius_range[0] <= 0 or radius_range[1] < radius_range[0]:
            raise ValueError("radius_range must satisfy 0 < r_min <= r_max")
        if not 0.0 <= self.perturbation < 1.0:
            raise ValueError("perturbation must be in [0, 1)")
        if self.min_separation < 2.0 * radius_range[0]:
            warnings.warn("min_separation below twice the minimum radius; "
                          "cells are likely to touch", stacklevel=2)


@dataclass(frozen=True)
class ScenePair:
    intensity: np.ndarray   # [0, 1] image before noise
    labels: np.ndarray
    encodings: dict         # id -> generating ShapeEncoding


@lru_cache(maxsize=8)
def _probe_basis(l_max):
    return build_basis_matrix(fibonacci_lattice(_PROBE_COUNT), l_max).values


def random_shape(rng, radius_range, l_max=5, perturbation=0.15):
    """Draw a random star-convex SH shape centered at the origin.

    Rejects draws whose minimum probe radius falls below 20% of the mean
    radius; raises :class:`ShapeGenerationError` after 100 rejections.
    """
    if not 0.0 <= perturbation < 1.0:
        raise ValueError("perturbation must be in [0, 1)")
    probe = _probe_basis(l_max)
    r_count = coefficient_count(l_max)
    for _ in range(_MAX_SHAPE_ATTEMPTS):
        mean_radius = rng.uniform(radius_range[0], radius_range[1])
        coeffs = np.zeros(r_count)
        coeffs[0] = mean_radius * SQRT_4PI
        for l in range(1, l_max + 1):
            start = l * l
            coeffs[start:start + 2 * l + 1] = rng.normal(
                0.0, perturbation * mean_radius / (l + 1), size=2 * l + 1
            )
        radii = probe @ coeffs
        if radii.min() > _MIN_RADIUS_FRACTION * mean_radius:
            return ShapeEncoding(centroid=np.zeros(3), l_max=l_max,
                                 coefficients=coeffs)
    raise ShapeGenerationError(
        f"no acceptable shape in {_MAX_SHAPE_ATTEMPTS} draws; "
        "perturbation too large"
    )


def generate_phantom(spec):
    """Generate a labeled scene from a :class:`PhantomSpec`; fully
    determined by its seed.

    Centroids are rejection-sampled with pairwise distance >=
    ``min_separation``; cells that would cross the volume border are
    rejected so stored encodings stay exact.  Placement stops after
    ``50 * n_cells`` attempts with however many cells fit.
    """
    rng = np.random.default_rng(spec.seed)
    dims = np.asarray(spec.dims)
    if 2.0 * (spec.radius_range[0] + 1.0) >= dims.min():
        raise ValueError(f"dims {spec.dims} too small for any cell")
    labels = np.zeros(spec.dims, dtype=np.uint16)
    intensity = np.zeros(spec.dims, dtype=np.float32)
    encodings = {}
    centroids = []
    attempts = 0
    budget = 50 * spec.n_cells
    while len(encodings) < spec.n_cells and attempts < budget:
        attempts += 1
        shape = random_shape(rng, spec.radius_range, spec.l_max,
                             spec.perturbation)
        probe_max = float((_probe_basis(spec.l_max) @ shape.coefficients).max())
        margin = probe_max + 1.0
        if np.any(dims - 1 - 2 * margin <= 0):
            continue
        centroid = rng.uniform(margin, dims - 1 - margin)
        if centroids and np.min(
            np.linalg.norm(np.asarray(centroids) - centroid, axis=1)
        ) < spec.min_separation:
            continue
        placed = ShapeEncoding(centroid=centroid, l_max=spec.l_max,
                               coefficients=shape.coefficients)
        slices, ratio = radial_interiority(placed, spec.dims)
        claim = (ratio <= 1.0) & (labels[slices] == 0)
        if not claim.any():
            continue
        label = len(encodings) + 1
        labels[slices][claim] = label
        intensity[slices][claim] = 1.0
        encodings[label] = placed
        centroids.append(centroid)
    return ScenePair(intensity=intensity, labels=labels, encodings=encodings)


def apply_psf(image, psf):
    """Separable Gaussian blur with reflective boundaries."""
    image = np.asarray(image)
    if all(s == 0 for s in psf.sigma):
        return image.copy()
    return ndimage.gaussian_filter(image.astype(np.float32, copy=False),
                                   sigma=psf.sigma, mode="reflect")


def add_gaussian_noise(image, sigma, seed=0):
    """Additive i.i.d. zero-mean Gaussian noise, not clipped."""
    image = np.asarray(image)
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return image.copy()
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(image.shape).astype(np.float32)
    return image.astype(np.float32, copy=False) + np.float32(sigma) * noise

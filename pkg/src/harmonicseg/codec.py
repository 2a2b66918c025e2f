"""Conversion between voxel instance masks and spherical-harmonic shape
encodings.

An encoding is a centroid plus ``(l_max + 1)**2`` real SH coefficients of
the radial function ``r(theta, phi)`` in voxel units.  Encoding casts rays
from the centroid along a sampling pattern and least-squares fits the
measured radii; decoding tests every voxel against the expanded radial
function directly, which is exact with respect to the coefficient
representation (a Delaunay surface mesh is available for export and
cross-checks).
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .basis import SQRT_4PI, build_basis_matrix, coefficient_count, evaluate_basis
from .errors import DegenerateCentroidError, NumericalRankError, TriangulationError
from .sampling import fibonacci_lattice, vectors_to_angles

RAY_STEP = 0.25  # voxels

# dense probe used to bound the maximal radius of an encoding
_PROBE = fibonacci_lattice(500)


@dataclass(frozen=True)
class ShapeEncoding:
    """SH shape descriptor of one instance (coefficients in voxel units)."""

    centroid: np.ndarray   # (x, y, z), sub-voxel precision
    l_max: int
    coefficients: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "centroid",
                           np.asarray(self.centroid, dtype=float).reshape(3))
        coeffs = np.asarray(self.coefficients, dtype=float).ravel()
        if coeffs.size != coefficient_count(self.l_max):
            raise ValueError(
                f"expected {coefficient_count(self.l_max)} coefficients for "
                f"l_max={self.l_max}, got {coeffs.size}"
            )
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def mean_radius(self):
        return self.coefficients[0] / SQRT_4PI


@dataclass(frozen=True)
class RadialSampleSet:
    """Radii measured along the directions of an orientation set."""

    orientations: object
    radii: np.ndarray

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float)
        if radii.size != len(self.orientations):
            raise ValueError("radii count must match orientation count")
        if not np.all(np.isfinite(radii)) or np.any(radii < 0):
            raise ValueError("radii must be finite and non-negative")
        object.__setattr__(self, "radii", radii)


def instance_centroid(volume, instance_id):
    """Mean voxel-center coordinate of all voxels with the given label."""
    coords = np.argwhere(volume == instance_id)
    if coords.size == 0:
        raise KeyError(f"instance id {instance_id} not present in volume")
    return coords.mean(axis=0)


def _nearest_voxel(position):
    # deterministic round-half-up per axis
    return np.floor(np.asarray(position) + 0.5).astype(int)


def sample_radii(volume, instance_id, centroid, orientations, step=RAY_STEP):
    """March rays from the centroid and record the first exit distance.

    Rays advance in ``step``-voxel increments with nearest-neighbor label
    lookup; the radius is the distance of the last sample still inside the
    instance before the first transition to any other label (with a
    half-step floor so a valid centroid never yields radius 0).
    """
    volume = np.asarray(volume)
    centroid = np.asarray(centroid, dtype=float)
    dims = np.asarray(volume.shape)
    start = _nearest_voxel(centroid)
    if np.any(start < 0) or np.any(start >= dims) or volume[tuple(start)] != instance_id:
        raise DegenerateCentroidError(
            f"centroid {tuple(centroid)} is not inside instance {instance_id}"
        )
    dirs = orientations.unit_vectors()
    n = dirs.shape[0]
    radii = np.zeros(n)
    active = np.arange(n)
    t = 0.0
    t_max = float(np.linalg.norm(dims)) + 1.0
    while active.size and t < t_max:
        t += step
        pos = centroid[None, :] + t * dirs[active]
        idx = np.floor(pos + 0.5).astype(int)
        in_bounds = np.all((idx >= 0) & (idx < dims[None, :]), axis=1)
        labels = np.full(active.size, -1, dtype=np.int64)
        if in_bounds.any():
            ib = idx[in_bounds]
            labels[in_bounds] = volume[ib[:, 0], ib[:, 1], ib[:, 2]]
        exited = labels != instance_id
        radii[active[exited]] = t - step
        active = active[~exited]
    # rays still active hit the march limit (should not happen for finite masks)
    radii[active] = t_max
    # first sample already outside: fall back to the half-step midpoint
    radii[radii == 0.0] = 0.5 * step
    return RadialSampleSet(orientations=orientations, radii=radii)


def fit_coefficients(samples, basis):
    """Least-squares SH coefficients for a radial sample set.

    Solves ``argmin_c |B c - r|_2`` by orthogonal factorization (SVD) and
    returns ``(coefficients, residual_norm)``.
    """
    b = basis.values
    r = np.asarray(samples.radii, dtype=float)
    if b.shape[0] != r.size:
        raise ValueError("basis was built from a different orientation set")
    coeffs, _, rank, _ = np.linalg.lstsq(b, r, rcond=None)
    if rank < b.shape[1]:
        raise NumericalRankError(rank, b.shape[1])
    residual = float(np.linalg.norm(b @ coeffs - r))
    return coeffs, residual


def encode_instance(volume, instance_id, orientations, basis):
    """Full encode: centroid, radial sampling, coefficient fit."""
    centroid = instance_centroid(volume, instance_id)
    samples = sample_radii(volume, instance_id, centroid, orientations)
    coeffs, _ = fit_coefficients(samples, basis)
    return ShapeEncoding(centroid=centroid, l_max=basis.l_max, coefficients=coeffs)


def evaluate_radius(encoding, theta, phi):
    """Radial function ``sum_j c_j Y_j(theta, phi)``; may be negative."""
    y = evaluate_basis(theta, phi, encoding.l_max)
    return y @ encoding.coefficients


def max_radius(encoding):
    """Upper bound on the radial function, from a dense direction probe."""
    radii = evaluate_radius(encoding, _PROBE.theta, _PROBE.phi)
    # margin for maxima between probe directions
    return max(float(radii.max()), 0.0) * 1.05 + 1.5


def radial_interiority(encoding, dims):
    """Normalized radial coordinate ``|v - centroid| / r(theta, phi)`` on the
    encoding's bounding box.

    Returns ``(slices, ratio)`` where ``slices`` index the enclosing box in a
    volume of extents ``dims`` and ``ratio`` is ``inf`` where the radial
    function is non-positive.  A voxel is inside the shape iff its ratio
    is <= 1; the voxel nearest the centroid has ratio 0 whenever the mean
    radius is positive.
    """
    dims = np.asarray(dims, dtype=int)
    if np.any(dims <= 0):
        raise ValueError("dims must be positive")
    c = encoding.centroid
    bound = max_radius(encoding)
    lo = np.maximum(np.ceil(c - bound).astype(int), 0)
    hi = np.minimum(np.floor(c + bound).astype(int), dims - 1)
    if np.any(hi < lo):
        return (slice(0, 0), slice(0, 0), slice(0, 0)), np.full((0, 0, 0), np.inf)
    shape = tuple(hi - lo + 1)
    grids = np.meshgrid(*(np.arange(l, h + 1) for l, h in zip(lo, hi)),
                        indexing="ij")
    offsets = np.stack([g.ravel() - c[a] for a, g in enumerate(grids)], axis=1)
    rho = np.linalg.norm(offsets, axis=1)
    ratio = np.full(rho.size, np.inf)
    at_center = rho == 0.0
    away = ~at_center
    theta, phi = vectors_to_angles(offsets[away] / rho[away, None])
    radius = np.maximum(evaluate_radius(encoding, theta, phi), 0.0)
    pos = radius > 0.0
    away_idx = np.flatnonzero(away)
    ratio[away_idx[pos]] = rho[away][pos] / radius[pos]
    if encoding.mean_radius > 0.0:
        ratio[at_center] = 0.0
        # the voxel holding the centroid is foreground by definition
        cv = _nearest_voxel(c)
        if np.all(cv >= lo) & np.all(cv <= hi):
            local = cv - lo
            flat = np.ravel_multi_index(tuple(local), shape)
            ratio[flat] = 0.0
    slices = tuple(slice(int(l), int(h) + 1) for l, h in zip(lo, hi))
    return slices, ratio.reshape(shape)


def decode_to_volume(encoding, dims):
    """Voxelize an encoding: per-voxel radial test against the expansion."""
    dims = tuple(int(d) for d in dims)
    mask = np.zeros(dims, dtype=bool)
    slices, ratio = radial_interiority(encoding, dims)
    mask[slices] = ratio <= 1.0
    return mask


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray   # (v, 3)
    faces: np.ndarray      # (f, 3) vertex indices, outward oriented

    def edge_count(self):
        edges = np.sort(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(edges, axis=0).shape[0]

    def euler_characteristic(self):
        return self.vertices.shape[0] - self.edge_count() + self.faces.shape[0]

    def volume(self):
        """Enclosed volume via the divergence theorem."""
        v0 = self.vertices[self.faces[:, 0]]
        v1 = self.vertices[self.faces[:, 1]]
        v2 = self.vertices[self.faces[:, 2]]
        return float(np.einsum("ij,ij->i", v0, np.cross(v1, v2)).sum() / 6.0)


def decode_to_mesh(encoding, orientations):
    """Surface mesh from per-orientation radii and a spherical Delaunay
    triangulation (convex hull of the unit directions)."""
    if len(orientations) < 4:
        raise ValueError("mesh reconstruction needs at least 4 orientations")
    dirs = orientations.unit_vectors()
    try:
        hull = ConvexHull(dirs)
    except QhullError as exc:
        raise TriangulationError(f"degenerate orientation set: {exc}") from exc
    radii = np.maximum(
        evaluate_radius(encoding, orientations.theta, orientations.phi), 0.0
    )
    vertices = encoding.centroid[None, :] + radii[:, None] * dirs
    faces = hull.simplices.copy()
    # orient all faces outward on the unit sphere
    normals = np.cross(dirs[faces[:, 1]] - dirs[faces[:, 0]],
                       dirs[faces[:, 2]] - dirs[faces[:, 0]])
    centers = dirs[faces].mean(axis=1)
    flip = np.einsum("ij,ij->i", normals, centers) < 0
    faces[flip] = faces[flip][:, ::-1]
    return TriangleMesh(vertices=vertices, faces=faces)


def write_stl(mesh, path, name="shape"):
    """ASCII STL export."""
    v = mesh.vertices
    with open(path, "w") as fh:
        fh.write(f"solid {name}\n")
        for a, b, c in mesh.faces:
            n = np.cross(v[b] - v[a], v[c] - v[a])
            norm = np.linalg.norm(n)
            n = n / norm if norm > 0 else n
            fh.write(f"  facet normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}\n")
            fh.write("    outer loop\n")
            for i in (a, b, c):
                fh.write(f"      vertex {v[i][0]:.9g} {v[i][1]:.9g} {v[i][2]:.9g}\n")
            fh.write("    endloop\n")
            fh.write("  endfacet\n")
        fh.write(f"endsolid {name}\n")


def write_off(mesh, path):
    """OFF export."""
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.vertices.shape[0]} {mesh.faces.shape[0]} 0\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def _sig9(value):
    return float(f"{value:.9g}")


def encodings_to_json(encodings, l_max, orientation_seed=0):
    """JSON document for a ``{id: ShapeEncoding}`` mapping."""
    instances = []
    for instance_id in sorted(encodings):
        enc = encodings[instance_id]
        if enc.l_max != l_max:
            raise ValueError("all encodings must share one l_max")
        instances.append({
            "id": int(instance_id),
            "centroid": [_sig9(v) for v in enc.centroid],
            "coefficients": [_sig9(v) for v in enc.coefficients],
        })
    return {"l_max": int(l_max), "orientation_seed": int(orientation_seed),
            "instances": instances}


def save_encodings(encodings, l_max, path, orientation_seed=0):
    doc = encodings_to_json(encodings, l_max, orientation_seed)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_encodings(path):
    """Load a JSON encoding document; returns ``(encodings, l_max, seed)``."""
    doc = json.loads(Path(path).read_text())
    l_max = int(doc["l_max"])
    encodings = {}
    for inst in doc["instances"]:
        encodings[int(inst["id"])] = ShapeEncoding(
            centroid=inst["centroid"], l_max=l_max,
            coefficients=inst["coefficients"],
        )
    return encodings, l_max, int(doc.get("orientation_seed", 0))

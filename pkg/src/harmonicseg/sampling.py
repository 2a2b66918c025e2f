"""Near-uniform direction sampling on the unit sphere.

Directions are produced as a deterministic golden-angle spiral and then
refined by electrostatic repulsion: every point repels every other with an
inverse-square Coulomb force, points move along the tangential force
component and are renormalized back onto the sphere.  The polar angle
``theta`` is measured from the +z axis, ``phi`` is the azimuth in
``[0, 2*pi)``.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

# Two points closer than this (chord length) are treated as coincident.
_COINCIDENT_TOL = 1e-12


def angles_to_vectors(theta, phi):
    """Cartesian unit vectors for polar/azimuthal angle arrays."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def vectors_to_angles(vectors):
    """Inverse of :func:`angles_to_vectors`; phi is wrapped into [0, 2*pi)."""
    v = np.asarray(vectors, dtype=float)
    theta = np.arccos(np.clip(v[..., 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(v[..., 1], v[..., 0]), 2.0 * np.pi)
    return theta, phi


def _pair_stats(vectors):
    """Coulomb energy and minimum pairwise angle of a set of unit vectors."""
    n = vectors.shape[0]
    if n < 2:
        return math.nan, math.nan
    g = np.clip(vectors @ vectors.T, -1.0, 1.0)
    np.fill_diagonal(g, -1.0)
    min_angle = float(np.arccos(g.max()))
    d2 = np.maximum(2.0 - 2.0 * g, 0.0)
    np.fill_diagonal(d2, np.inf)
    if d2.min() < _COINCIDENT_TOL**2:
        raise ValueError("orientation set contains coincident directions")
    energy = 0.5 * float(np.sum(1.0 / np.sqrt(d2)))
    return energy, min_angle


@dataclass(frozen=True)
class OrientationSet:
    """Ordered set of unit directions with quality statistics.

    ``energy`` is the pairwise Coulomb energy ``sum_{i<j} 1/|x_i - x_j|``
    and ``min_pairwise_angle`` the smallest angle between any two
    directions; both are NaN for fewer than two directions.
    """

    theta: np.ndarray
    phi: np.ndarray
    seed: int
    energy: float
    min_pairwise_angle: float

    @classmethod
    def from_angles(cls, theta, phi, seed=0):
        theta = np.atleast_1d(np.asarray(theta, dtype=float)).copy()
        phi = np.mod(np.atleast_1d(np.asarray(phi, dtype=float)), 2.0 * np.pi)
        if theta.shape != phi.shape or theta.ndim != 1:
            raise ValueError("theta and phi must be 1-d arrays of equal length")
        if theta.size == 0:
            raise ValueError("orientation set must contain at least one direction")
        energy, min_angle = _pair_stats(angles_to_vectors(theta, phi))
        theta.setflags(write=False)
        phi.setflags(write=False)
        return cls(theta=theta, phi=phi, seed=int(seed), energy=energy,
                   min_pairwise_angle=min_angle)

    @classmethod
    def from_vectors(cls, vectors, seed=0):
        theta, phi = vectors_to_angles(vectors)
        return cls.from_angles(theta, phi, seed=seed)

    def __len__(self):
        return self.theta.size

    def unit_vectors(self):
        return angles_to_vectors(self.theta, self.phi)


def fibonacci_lattice(n, seed=0):
    """Golden-angle spiral lattice of ``n`` points on the unit sphere.

    Deterministic and already near-uniform; used as the initialization of
    :func:`repulsion_optimize`.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = np.mod(i * GOLDEN_ANGLE, 2.0 * np.pi)
    return OrientationSet.from_angles(theta, phi, seed=seed)


def coulomb_energy(orientations):
    """Pairwise Coulomb energy ``sum_{i<j} 1/|x_i - x_j|``.

    Raises ``ValueError`` for fewer than two directions or coincident
    directions.
    """
    if len(orientations) < 2:
        raise ValueError("energy requires at least two directions")
    energy, _ = _pair_stats(orientations.unit_vectors())
    return energy


def _energy(x, buf):
    np.matmul(x, x.T, out=buf)
    np.clip(buf, -1.0, 1.0, out=buf)
    np.subtract(1.0, buf, out=buf)
    np.multiply(buf, 2.0, out=buf)
    np.maximum(buf, 0.0, out=buf)
    np.fill_diagonal(buf, np.inf)
    np.sqrt(buf, out=buf)
    np.reciprocal(buf, out=buf)
    return 0.5 * float(buf.sum())


def _force_and_energy(x, g, d):
    np.matmul(x, x.T, out=g)
    np.clip(g, -1.0, 1.0, out=g)
    np.subtract(1.0, g, out=g)
    np.multiply(g, 2.0, out=g)          # g = squared chord length
    np.maximum(g, 0.0, out=g)
    np.fill_diagonal(g, np.inf)
    np.sqrt(g, out=d)
    np.reciprocal(d, out=d)             # d = 1/dist
    energy = 0.5 * float(d.sum())
    np.divide(d, g, out=g)              # g = 1/dist^3
    force = x * g.sum(axis=1)[:, None] - g @ x
    force -= np.sum(force * x, axis=1)[:, None] * x   # tangential component
    return force, energy


def repulsion_optimize(init, max_iters=200, step=None, tol=1e-9):
    """Refine an orientation set by inverse-square electrostatic repulsion.

    Fixed-step gradient descent on the Coulomb energy with tangential
    projection and renormalization after every move; the step is halved
    (backtracking) whenever it would increase the energy.  Stops when the
    relative energy decrease falls below ``tol`` or after ``max_iters``
    iterations.  The output energy never exceeds the input energy.
    """
    n = len(init)
    if n < 2:
        raise ValueError("repulsion requires at least two directions")
    if step is None:
        step = 0.5 / n
    if step <= 0:
        raise ValueError("step must be positive")
    x = init.unit_vectors()
    g = np.empty((n, n))
    d = np.empty((n, n))
    energy = _energy(x, g)
    if not math.isfinite(energy):
        raise ValueError("coincident directions produce infinite force")
    for _ in range(max_iters):
        force, energy = _force_and_energy(x, g, d)
        s = step
        accepted = False
        for _ in range(60):
            trial = x + s * force
            trial /= np.linalg.norm(trial, axis=1)[:, None]
            trial_energy = _energy(trial, g)
            if trial_energy <= energy:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break
        rel_decrease = (energy - trial_energy) / energy if energy > 0 else 0.0
        x = trial
        energy = trial_energy
        if rel_decrease < tol:
            break
    return OrientationSet.from_vectors(x, seed=init.seed)


def ideal_packing_angle(n):
    """Angular spacing of an ideal uniform packing of ``n`` sphere points."""
    return math.sqrt(4.0 * math.pi / n)


def save_orientations(orientations, path):
    """Write a ``theta,phi`` CSV (radians, 9 significant digits)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "phi"])
        for t, p in zip(orientations.theta, orientations.phi):
            writer.writerow([f"{t:.9g}", f"{p:.9g}"])


def load_orientations(path, seed=0):
    """Load a ``theta,phi`` CSV written by :func:`save_orientations`."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["theta", "phi"]:
            raise ValueError(f"{path}: expected header 'theta,phi'")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    if not rows:
        raise ValueError(f"{path}: no orientations")
    arr = np.asarray(rows, dtype=float)
    return OrientationSet.from_angles(arr[:, 0], arr[:, 1], seed=seed)

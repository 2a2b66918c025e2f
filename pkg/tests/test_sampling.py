import math

import numpy as np
import pytest

from harmonicseg import (coulomb_energy, fibonacci_lattice,
                         ideal_packing_angle, load_orientations,
                         repulsion_optimize, save_orientations)
from harmonicseg.sampling import OrientationSet, angles_to_vectors


def make_set(vectors):
    return OrientationSet.from_vectors(np.asarray(vectors, dtype=float))


class TestFibonacciLattice:
    def test_single_point_has_unit_norm(self):
        s = fibonacci_lattice(1)
        assert len(s) == 1
        assert np.linalg.norm(s.unit_vectors()[0]) == pytest.approx(1.0, abs=1e-12)

    def test_two_points_straddle_equator(self):
        # z_i = 1 - (2i+1)/n gives z = +-0.5 for n = 2
        z = fibonacci_lattice(2).unit_vectors()[:, 2]
        assert z[0] == pytest.approx(0.5, abs=1e-12)
        assert z[1] == pytest.approx(-0.5, abs=1e-12)

    def test_five_thousand_points_near_ideal_spacing(self, fib5000):
        assert fib5000.min_pairwise_angle > 0.8 * ideal_packing_angle(5000)

    def test_zero_points_rejected(self):
        with pytest.raises(ValueError):
            fibonacci_lattice(0)

    def test_deterministic(self):
        a = fibonacci_lattice(100)
        b = fibonacci_lattice(100)
        assert np.array_equal(a.theta, b.theta)
        assert np.array_equal(a.phi, b.phi)

    def test_all_points_on_unit_sphere(self):
        v = fibonacci_lattice(777).unit_vectors()
        assert np.allclose(np.linalg.norm(v, axis=1), 1.0, atol=1e-12)


class TestCoulombEnergy:
    def test_antipodal_pair(self):
        s = make_set([[0, 0, 1], [0, 0, -1]])
        assert coulomb_energy(s) == pytest.approx(0.5, abs=1e-12)

    def test_equatorial_triangle(self):
        # chord between points 120 degrees apart on a great circle is sqrt(3)
        angles = [0.0, 2 * np.pi / 3, 4 * np.pi / 3]
        s = make_set([[np.cos(a), np.sin(a), 0.0] for a in angles])
        assert coulomb_energy(s) == pytest.approx(3.0 / math.sqrt(3.0), rel=1e-9)

    def test_single_point_rejected(self):
        with pytest.raises(ValueError):
            coulomb_energy(make_set([[0, 0, 1]]))

    def test_coincident_points_rejected(self):
        with pytest.raises(ValueError):
            coulomb_energy(make_set([[0, 0, 1], [0, 0, 1]]))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        v = rng.standard_normal((40, 3))
        v /= np.linalg.norm(v, axis=1)[:, None]
        expected = sum(
            1.0 / np.linalg.norm(v[i] - v[j])
            for i in range(40)
            for j in range(i + 1, 40)
        )
        assert coulomb_energy(make_set(v)) == pytest.approx(expected, rel=1e-9)

    def test_stored_energy_matches_recomputation(self, fib5000):
        assert fib5000.energy == pytest.approx(coulomb_energy(fib5000), rel=1e-9)


class TestRepulsionOptimize:
    def test_two_points_reach_antipodal_optimum(self):
        init = make_set([[1, 0, 0], [0.5, 0.8, 0.33]])
        out = repulsion_optimize(init, max_iters=5000, step=0.25, tol=0.0)
        assert out.energy == pytest.approx(0.5, abs=1e-4)

    def test_four_points_reach_tetrahedron_energy(self):
        # regular tetrahedron: all 6 pairwise distances are sqrt(8/3)
        target = 6.0 / math.sqrt(8.0 / 3.0)
        out = repulsion_optimize(fibonacci_lattice(4), max_iters=2000, tol=0.0)
        assert out.energy == pytest.approx(target, rel=0.005)

    def test_energy_never_increases(self, fib5000, repulsion5000):
        optimized, _ = repulsion5000
        assert optimized.energy <= fib5000.energy

    def test_stepwise_descent(self):
        s = fibonacci_lattice(64)
        energies = [s.energy]
        for _ in range(10):
            s = repulsion_optimize(s, max_iters=1)
            energies.append(s.energy)
        assert all(b <= a for a, b in zip(energies, energies[1:]))

    def test_outputs_stay_on_sphere(self):
        out = repulsion_optimize(fibonacci_lattice(50), max_iters=40)
        norms = np.linalg.norm(out.unit_vectors(), axis=1)
        assert np.allclose(norms, 1.0, atol=1e-12)

    def test_deterministic(self):
        a = repulsion_optimize(fibonacci_lattice(30), max_iters=25)
        b = repulsion_optimize(fibonacci_lattice(30), max_iters=25)
        assert np.array_equal(a.theta, b.theta)
        assert np.array_equal(a.phi, b.phi)

    def test_single_point_rejected(self):
        with pytest.raises(ValueError):
            repulsion_optimize(fibonacci_lattice(1))

    def test_coincident_points_rejected(self):
        with pytest.raises(ValueError):
            repulsion_optimize(make_set([[0, 0, 1], [0, 0, 1], [1, 0, 0]]))

    def test_nonpositive_step_rejected(self):
        with pytest.raises(ValueError):
            repulsion_optimize(fibonacci_lattice(4), step=0.0)

    def test_hemisphere_uniformity(self, repulsion5000):
        optimized, _ = repulsion5000
        v = optimized.unit_vectors()
        rng = np.random.default_rng(5)
        normals = rng.standard_normal((200, 3))
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        fractions = (v @ normals.T > 0).mean(axis=0)
        assert np.all(np.abs(fractions - 0.5) <= 0.02)


class TestOrientationSet:
    def test_no_duplicate_directions_allowed(self):
        with pytest.raises(ValueError):
            make_set([[0, 1, 0], [0, 1, 0]])

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            OrientationSet.from_angles([], [])

    def test_unit_vectors_match_angles(self):
        theta = np.array([0.3, 1.2, 2.8])
        phi = np.array([0.0, 2.0, 5.5])
        s = OrientationSet.from_angles(theta, phi)
        assert np.allclose(s.unit_vectors(), angles_to_vectors(theta, phi),
                           atol=1e-15)


class TestCsvRoundTrip:
    def test_text_round_trip_is_stable(self, tmp_path):
        s = fibonacci_lattice(257)
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        save_orientations(s, first)
        loaded = load_orientations(first)
        save_orientations(loaded, second)
        assert first.read_bytes() == second.read_bytes()
        assert np.allclose(loaded.theta, s.theta, atol=1e-8)
        assert np.allclose(loaded.phi, s.phi, atol=1e-8)

    def test_header_is_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0.1,0.2\n")
        with pytest.raises(ValueError):
            load_orientations(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("theta,phi\n")
        with pytest.raises(ValueError):
            load_orientations(path)

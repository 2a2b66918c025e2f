import numpy as np
import pytest

from harmonicseg import (PhantomSpec, Psf, add_gaussian_noise, apply_psf,
                         encode_instance, generate_phantom, random_shape)
from harmonicseg.codec import evaluate_radius
from harmonicseg.errors import ShapeGenerationError
from harmonicseg.phantom import PSF_TEST, PSF_TRAIN
from harmonicseg.sampling import fibonacci_lattice


class TestRandomShape:
    def test_zero_perturbation_is_perfect_sphere(self):
        rng = np.random.default_rng(1)
        enc = random_shape(rng, (8.0, 12.0), perturbation=0.0)
        theta = np.random.default_rng(2).uniform(0, np.pi, 50)
        phi = np.random.default_rng(3).uniform(0, 2 * np.pi, 50)
        radii = evaluate_radius(enc, theta, phi)
        assert np.allclose(radii, enc.mean_radius, atol=1e-9)
        assert 8.0 <= enc.mean_radius <= 12.0

    def test_perturbed_shape_stays_star_convex(self):
        rng = np.random.default_rng(4)
        probe = fibonacci_lattice(500)
        for _ in range(5):
            enc = random_shape(rng, (12.0, 12.0), perturbation=0.15)
            radii = evaluate_radius(enc, probe.theta, probe.phi)
            assert radii.min() > 0.2 * 12.0
            # and it genuinely deviates from a sphere
            assert radii.max() - radii.min() > 0.1

    def test_deterministic_for_fixed_rng(self):
        a = random_shape(np.random.default_rng(5), (8.0, 14.0))
        b = random_shape(np.random.default_rng(5), (8.0, 14.0))
        assert np.array_equal(a.coefficients, b.coefficients)

    def test_perturbation_bounds_enforced(self):
        rng = np.random.default_rng(6)
        with pytest.raises(ValueError):
            random_shape(rng, (8.0, 14.0), perturbation=1.0)

    def test_unattainable_rejection_bound_exhausts_attempts(self, monkeypatch):
        # no perturbed draw can keep its minimum radius above the mean
        import harmonicseg.phantom as phantom
        monkeypatch.setattr(phantom, "_MIN_RADIUS_FRACTION", 1.0)
        rng = np.random.default_rng(7)
        with pytest.raises(ShapeGenerationError):
            random_shape(rng, (10.0, 10.0), perturbation=0.5)


class TestGeneratePhantom:
    def test_single_cell(self):
        spec = PhantomSpec(dims=(48, 48, 48), n_cells=1,
                           radius_range=(8.0, 10.0), min_separation=20.0,
                           seed=0)
        scene = generate_phantom(spec)
        assert set(np.unique(scene.labels)) == {0, 1}
        assert list(scene.encodings) == [1]

    def test_reference_scene_counts_and_spacing(self):
        spec = PhantomSpec(dims=(256, 128, 128), n_cells=30,
                           radius_range=(8.0, 14.0), min_separation=30.0,
                           seed=0)
        scene = generate_phantom(spec)
        ids = np.unique(scene.labels)
        assert len(ids[ids > 0]) == 30
        centroids = np.array([scene.encodings[k].centroid
                              for k in sorted(scene.encodings)])
        diff = centroids[:, None, :] - centroids[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        np.fill_diagonal(dist, np.inf)
        assert dist.min() >= 30.0

    def test_intensity_is_binary_and_aligned(self):
        spec = PhantomSpec(dims=(64, 64, 64), n_cells=3,
                           radius_range=(8.0, 10.0), min_separation=22.0,
                           seed=1)
        scene = generate_phantom(spec)
        assert set(np.unique(scene.intensity)) <= {0.0, 1.0}
        assert np.array_equal(scene.intensity > 0, scene.labels > 0)

    def test_every_label_has_encoding(self):
        spec = PhantomSpec(dims=(96, 96, 96), n_cells=5,
                           radius_range=(8.0, 12.0), min_separation=26.0,
                           seed=2)
        scene = generate_phantom(spec)
        ids = {int(k) for k in np.unique(scene.labels) if k > 0}
        assert ids == set(scene.encodings)

    def test_too_small_dims_rejected(self):
        spec = PhantomSpec(dims=(12, 12, 12), n_cells=1,
                           radius_range=(8.0, 10.0), min_separation=20.0)
        with pytest.raises(ValueError):
            generate_phantom(spec)

    def test_bit_exact_reproducibility(self):
        spec = PhantomSpec(dims=(96, 64, 64), n_cells=4,
                           radius_range=(8.0, 11.0), min_separation=24.0,
                           seed=3)
        a = generate_phantom(spec)
        b = generate_phantom(spec)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.intensity, b.intensity)
        for k in a.encodings:
            assert np.array_equal(a.encodings[k].coefficients,
                                  b.encodings[k].coefficients)

    def test_close_separation_warns(self):
        with pytest.warns(UserWarning):
            PhantomSpec(dims=(64, 64, 64), n_cells=2,
                        radius_range=(10.0, 12.0), min_separation=15.0)

    def test_label_encoding_consistency(self, fib5000, basis5000):
        spec = PhantomSpec(dims=(128, 96, 96), n_cells=5,
                           radius_range=(9.0, 13.0), min_separation=30.0,
                           seed=4)
        scene = generate_phantom(spec)
        for k, generating in scene.encodings.items():
            measured = encode_instance(scene.labels, int(k), fib5000,
                                       basis5000)
            assert abs(measured.coefficients[0] - generating.coefficients[0]) \
                <= 0.05 * generating.coefficients[0]


class TestApplyPsf:
    def test_zero_sigma_is_identity(self):
        rng = np.random.default_rng(8)
        image = rng.uniform(size=(10, 10, 10)).astype(np.float32)
        out = apply_psf(image, Psf((0.0, 0.0, 0.0)))
        assert np.array_equal(out, image)
        assert out is not image

    def test_impulse_response_is_normalized_gaussian(self):
        image = np.zeros((33, 33, 33), dtype=np.float32)
        image[16, 16, 16] = 1.0
        out = apply_psf(image, Psf((2.0, 2.0, 2.0)))
        assert abs(float(out.sum()) - 1.0) <= 1e-6
        # compare the axial profile against analytic Gaussian samples
        x = np.arange(33) - 16.0
        gauss = np.exp(-x**2 / 8.0)
        gauss /= gauss.sum()
        profile = out[:, 16, 16]
        center = out[16, 16, 16]
        assert np.allclose(profile / profile[16], gauss / gauss[16], atol=1e-3)
        assert center == out.max()

    def test_mass_conserved_for_interior_content(self):
        image = np.zeros((48, 48, 48), dtype=np.float32)
        image[20:28, 20:28, 20:28] = 1.0
        out = apply_psf(image, PSF_TRAIN)
        assert abs(float(out.sum()) - float(image.sum())) \
            <= 0.005 * float(image.sum())

    def test_ball_boundary_becomes_fractional(self):
        image = np.zeros((32, 32, 32), dtype=np.float32)
        image[10:22, 10:22, 10:22] = 1.0
        out = apply_psf(image, Psf((1.5, 1.5, 1.5)))
        boundary = out[(out > 0.0) & (out < 1.0)]
        assert boundary.size > 0
        assert np.all(boundary > 0.0) and np.all(boundary < 1.0)

    def test_anisotropic_presets(self):
        assert PSF_TRAIN.sigma == (1.0, 1.0, 3.0)
        assert PSF_TEST.sigma == (1.5, 1.5, 4.0)
        with pytest.raises(ValueError):
            Psf((-1.0, 1.0, 1.0))


class TestAddGaussianNoise:
    def test_zero_sigma_is_identity(self):
        image = np.ones((6, 6, 6), dtype=np.float32)
        out = add_gaussian_noise(image, 0.0, seed=1)
        assert np.array_equal(out, image)

    def test_sample_std_matches_sigma(self):
        image = np.zeros((100, 100, 100), dtype=np.float32)
        out = add_gaussian_noise(image, 0.1, seed=2)
        assert 0.0995 <= float(out.std()) <= 0.1005
        assert abs(float(out.mean())) <= 5e-4

    def test_values_not_clipped(self):
        image = np.zeros((50, 50, 50), dtype=np.float32)
        out = add_gaussian_noise(image, 0.1, seed=3)
        assert out.min() < 0.0

    def test_deterministic_per_seed(self):
        image = np.zeros((8, 8, 8), dtype=np.float32)
        a = add_gaussian_noise(image, 0.1, seed=4)
        b = add_gaussian_noise(image, 0.1, seed=4)
        c = add_gaussian_noise(image, 0.1, seed=5)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            add_gaussian_noise(np.zeros((2, 2, 2)), -0.1)

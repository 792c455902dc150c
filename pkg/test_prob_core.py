"""
高斯概率核心测试
"""

import math

import numpy as np
import pytest

from conftest import linear_densities
from src.core import autodiff as ad
from src.core.autodiff import Tape
from src.core.prob_core import (SIGMA_FLOOR, LatentParams, gaussian_log_pdf, joint_log_density, log_sum_exp,
                                reparameterize, standard_normal)


class TestLatentParams:

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            LatentParams(np.zeros(2), np.ones(3))

    def test_non_positive_sigma_rejected(self):
        with pytest.raises(ValueError):
            LatentParams(np.zeros(2), np.array([1.0, 0.0]))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            LatentParams(np.zeros(0), np.ones(0))

    def test_sigma_floor(self):
        params = LatentParams(np.zeros(2), np.array([1e-9, 1.0]))
        np.testing.assert_allclose(ad.value_of(params.sigma), [SIGMA_FLOOR, 1.0])


class TestLogDensity:

    def test_standard_normal_at_zero(self):
        value = joint_log_density(np.zeros(1), LatentParams(np.zeros(1), np.ones(1)))
        assert value == pytest.approx(-0.5 * math.log(2.0 * math.pi))

    def test_product_of_identical_dimensions(self):
        one = joint_log_density(np.zeros(1), LatentParams(np.zeros(1), np.ones(1)))
        two = joint_log_density(np.zeros(2), LatentParams(np.zeros(2), np.ones(2)))
        assert two == pytest.approx(2.0 * one)

    def test_matches_linear_space(self, rng):
        for _ in range(50):
            z = rng.normal(size=3)
            mu = rng.normal(size=3)
            sigma = rng.uniform(0.5, 2.0, size=3)
            value = joint_log_density(z, LatentParams(mu, sigma))
            np.testing.assert_allclose(math.exp(value), linear_densities(z, mu, sigma), rtol=1e-10)

    def test_far_point_is_finite(self):
        value = joint_log_density(np.array([1e3]), LatentParams(np.zeros(1), np.full(1, 1e-3)))
        assert np.isfinite(value) and value < -1e10

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            joint_log_density(np.zeros(3), LatentParams(np.zeros(2), np.ones(2)))

    def test_dims_subset(self, rng):
        z = rng.normal(size=3)
        mu = rng.normal(size=3)
        sigma = rng.uniform(0.5, 2.0, size=3)
        full = gaussian_log_pdf(z, mu, sigma)
        subset = joint_log_density(z, LatentParams(mu, sigma), dims=[0, 2])
        assert subset == pytest.approx(full[0] + full[2])


class TestLogSumExp:

    def test_large_values(self):
        assert log_sum_exp(np.array([1000.0, 1000.0])) == pytest.approx(1000.0 + math.log(2.0))

    def test_single_element(self):
        assert log_sum_exp(np.array([-5.0])) == pytest.approx(-5.0)

    def test_all_minus_infinity(self):
        assert log_sum_exp(np.array([-np.inf, -np.inf])) == -np.inf

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            log_sum_exp(np.array([]))

    def test_matches_direct_sum(self, rng):
        xs = rng.normal(size=20)
        assert log_sum_exp(xs) == pytest.approx(math.log(np.exp(xs).sum()), rel=1e-12)


class TestReparameterize:

    def test_zero_noise_returns_mu(self):
        z = reparameterize(LatentParams(np.array([1.0, 2.0]), np.array([3.0, 4.0])), np.zeros(2))
        np.testing.assert_allclose(z, [1.0, 2.0])

    def test_unit_noise(self):
        z = reparameterize(LatentParams(np.zeros(1), np.ones(1)), np.ones(1))
        np.testing.assert_allclose(z, [1.0])

    def test_noise_length_mismatch(self):
        with pytest.raises(ValueError):
            reparameterize(LatentParams(np.zeros(2), np.ones(2)), np.zeros(3))

    def test_sampling_moments(self):
        rng = np.random.default_rng(7)
        mu, sigma = np.array([0.5, -1.0]), np.array([2.0, 0.3])
        z = reparameterize(LatentParams(mu, sigma), standard_normal(rng, (100000, 2)))
        standard_error = sigma / math.sqrt(len(z))
        assert np.all(np.abs(z.mean(axis=0) - mu) < 3.0 * standard_error)
        np.testing.assert_allclose(z.std(axis=0), sigma, rtol=0.02)

    def test_gradient_flows_to_mu_and_sigma(self):
        tape = Tape()
        mu = tape.variable(np.array([0.5]))
        sigma = tape.variable(np.array([2.0]))
        z = reparameterize(LatentParams(mu, sigma), np.array([0.7]))
        tape.backward(ad.sum_(z))
        np.testing.assert_allclose(mu.adjoint, [1.0])
        np.testing.assert_allclose(sigma.adjoint, [0.7])

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evs.errors import BadTimestep, DimensionMismatch, ValidationError
from evs.objective import (
    SSIM_C1,
    LossWeights,
    NoiseSchedule,
    appearance_loss,
    coarse_loss,
    diffuse,
    fine_loss,
    geometry_loss,
    image_metrics,
    l1,
    mean_metrics,
    photometric_loss,
    psnr,
    ssim,
)
from evs.raster import DepthMap
from oracles import naive_ssim


def const_schedule(a):
    """Two-step schedule whose first entry is ``a``."""
    return NoiseSchedule(np.array([a, a / 2]))


class TestNoiseSchedule:
    def test_linear_defaults(self):
        s = NoiseSchedule.linear()
        assert s.T == 1000
        assert s[1] == pytest.approx(1 - 1e-4)
        betas = np.linspace(1e-4, 0.02, 1000)
        assert s[1000] == pytest.approx(np.prod(1 - betas), rel=1e-12)

    @pytest.mark.parametrize("tau", [0, 1001, 2.5, -1])
    def test_bad_timestep(self, tau):
        with pytest.raises(BadTimestep):
            NoiseSchedule.linear()[tau]

    @pytest.mark.parametrize("a", [[0.5, 0.6], [1.0, 0.0], [1.5, 0.5], []])
    def test_rejects_invalid(self, a):
        with pytest.raises(ValidationError):
            NoiseSchedule(np.array(a))


class TestDiffuse:
    def test_no_noise_limit(self, rng):
        x, eps = rng.random((4, 4, 3)), rng.normal(size=(4, 4, 3))
        for literal in (True, False):
            np.testing.assert_array_equal(diffuse(x, 1, eps, const_schedule(1.0), literal), x)

    def test_zero_noise_shrinks(self, rng):
        x = rng.random((4, 4, 3))
        np.testing.assert_allclose(diffuse(x, 1, np.zeros_like(x), const_schedule(0.64)), 0.8 * x, atol=1e-15)

    def test_closed_form(self):
        x, eps = np.zeros((3, 3, 3)), np.ones((3, 3, 3))
        np.testing.assert_allclose(diffuse(x, 1, eps, const_schedule(0.75), literal=True), 0.25)
        np.testing.assert_allclose(diffuse(x, 1, eps, const_schedule(0.75), literal=False), 0.5)

    def test_standard_form_variance(self):
        eps = np.random.default_rng(0).standard_normal(200_000)
        sched = NoiseSchedule.linear()
        a = sched[500]
        out = diffuse(np.zeros_like(eps), 500, eps, sched, literal=False)
        # sample variance within 5 standard errors of 1 - a
        assert abs(out.var() - (1 - a)) < 5 * (1 - a) * math.sqrt(2 / len(eps))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            diffuse(np.zeros((2, 2)), 1, np.zeros((3, 3)), const_schedule(0.5))


class TestAppearanceLoss:
    def test_zero_model(self, rng):
        x, eps = rng.random((8, 8, 3)), rng.normal(size=(8, 8, 3))
        assert appearance_loss(x, 10, eps, lambda im, t: np.zeros_like(im), NoiseSchedule.linear()) == 0.0

    def test_ones_model_gives_pixel_sum(self, rng):
        x, eps = rng.random((8, 8, 3)), rng.normal(size=(8, 8, 3))
        sched = NoiseSchedule.linear()
        noisy = diffuse(x, 10, eps, sched)
        assert appearance_loss(x, 10, eps, lambda im, t: np.ones_like(im), sched) == pytest.approx(noisy.sum(), rel=1e-13)

    def test_gaussian_double_against_loop(self, rng):
        mu, k, tau = 0.4, 1.7, 321
        x, eps = rng.random((8, 8, 3)), rng.normal(size=(8, 8, 3))
        sched = NoiseSchedule.linear()
        a = sched.alpha_bar[tau - 1]
        total = 0.0
        for i in range(8):
            for j in range(8):
                for c in range(3):
                    xt = math.sqrt(a) * x[i, j, c] + (1 - a) * eps[i, j, c]
                    total += (xt - mu) * k * xt
        got = appearance_loss(x, tau, eps, lambda im, t: (im - mu) * k, sched)
        assert got == pytest.approx(total, abs=1e-9)

    def test_linear_in_model_scale(self, rng):
        x, eps = rng.random((8, 8, 3)), rng.normal(size=(8, 8, 3))
        sched = NoiseSchedule.linear()
        model = lambda im, t: np.sin(im)  # noqa: E731
        base = appearance_loss(x, 5, eps, model, sched)
        assert appearance_loss(x, 5, eps, lambda im, t: 4.0 * model(im, t), sched) == 4.0 * base

    def test_model_receives_timestep(self, rng):
        seen = []
        appearance_loss(np.zeros((2, 2, 3)), 77, np.zeros((2, 2, 3)), lambda im, t: seen.append(t) or im,
                        NoiseSchedule.linear())
        assert seen == [77]

    def test_model_shape_checked(self):
        with pytest.raises(DimensionMismatch):
            appearance_loss(np.zeros((2, 2, 3)), 1, np.zeros((2, 2, 3)), lambda im, t: np.zeros(3),
                            NoiseSchedule.linear())


class TestGeometryLoss:
    def test_identical(self, rng):
        d = DepthMap.from_array(rng.uniform(1, 5, (6, 7)))
        assert geometry_loss(d, d) == 0.0

    def test_constant_offset(self, rng):
        v = rng.uniform(1, 5, (6, 7))
        assert geometry_loss(DepthMap.from_array(v + 0.5), DepthMap.from_array(v)) == pytest.approx(0.5, abs=1e-12)

    def test_masked_oracle(self, rng):
        H, W = 9, 11
        a = rng.uniform(1, 5, (H, W))
        b = rng.uniform(1, 5, (H, W))
        a[rng.random((H, W)) < 0.3] = np.inf
        b[rng.random((H, W)) < 0.3] = np.inf
        total, n = 0.0, 0
        for i in range(H):
            for j in range(W):
                if math.isfinite(a[i, j]) and math.isfinite(b[i, j]):
                    total += abs(a[i, j] - b[i, j])
                    n += 1
        da, db = DepthMap.from_array(a), DepthMap.from_array(b)
        assert abs(geometry_loss(da, db) - total / (H * W)) < 1e-12
        assert abs(geometry_loss(da, db, valid_mean=True) - total / n) < 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_triangle_inequality(self, seed):
        r = np.random.default_rng(seed)
        a, b, c = (DepthMap.from_array(r.uniform(0, 3, (5, 5))) for _ in range(3))
        assert geometry_loss(a, c) <= geometry_loss(a, b) + geometry_loss(b, c) + 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            geometry_loss(DepthMap.empty((2, 2)), DepthMap.empty((2, 3)))


class TestSSIM:
    def test_self(self, rng):
        x = rng.random((20, 24, 3))
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-9)

    def test_constants(self):
        c1, c2 = 0.2, 0.7
        a, b = np.full((16, 16, 3), c1), np.full((16, 16, 3), c2)
        assert ssim(a, b) == pytest.approx((2 * c1 * c2 + SSIM_C1) / (c1 ** 2 + c2 ** 2 + SSIM_C1), abs=1e-12)

    def test_symmetric(self, rng):
        a, b = rng.random((18, 18, 3)), rng.random((18, 18, 3))
        assert ssim(a, b) == ssim(b, a)

    def test_naive_window_oracle(self, rng):
        a, b = rng.random((32, 32, 3)), rng.random((32, 32, 3))
        assert abs(ssim(a, b) - naive_ssim(a, b)) < 1e-9

    def test_range(self, rng):
        a = rng.random((16, 16, 3))
        assert -1 <= ssim(a, 1 - a) <= 1

    def test_too_small(self):
        with pytest.raises(DimensionMismatch):
            ssim(np.zeros((10, 30, 3)), np.zeros((10, 30, 3)))


class TestPSNRAndPhotometric:
    def test_identical_inf(self, rng):
        x = rng.random((4, 4, 3))
        assert psnr(x, x) == math.inf

    def test_closed_forms(self):
        a = np.zeros((4, 4, 3))
        assert psnr(a, np.full_like(a, 0.1)) == pytest.approx(20.0, abs=1e-12)
        assert psnr(a, np.ones_like(a)) == 0.0

    def test_photometric_identical(self, rng):
        x = rng.random((16, 16, 3))
        assert photometric_loss(x, x) == pytest.approx(0.0, abs=1e-12)

    def test_photometric_pure_l1(self, rng):
        a, b = rng.random((16, 16, 3)), rng.random((16, 16, 3))
        assert photometric_loss(a, b, 1.0) == l1(a, b)

    def test_photometric_pure_ssim_constants(self):
        c1, c2 = 0.3, 0.6
        a, b = np.full((12, 12, 3), c1), np.full((12, 12, 3), c2)
        expected = 1 - (2 * c1 * c2 + SSIM_C1) / (c1 ** 2 + c2 ** 2 + SSIM_C1)
        assert photometric_loss(a, b, 0.0) == pytest.approx(expected, abs=1e-12)

    def test_image_metrics_consistent(self, rng):
        a, b = rng.random((16, 16, 3)), rng.random((16, 16, 3))
        m = image_metrics(a, b)
        assert m["photometric"] == pytest.approx(photometric_loss(a, b), abs=1e-15)
        assert m["psnr"] == psnr(a, b) and m["l1"] == l1(a, b)

    def test_mean_metrics(self):
        m = mean_metrics([{"psnr": 10.0, "l1": 0.2}, {"psnr": 20.0, "l1": 0.4, "l_g": 1.0}])
        assert m == {"psnr": 15.0, "l1": pytest.approx(0.3), "l_g": 1.0}


class TestCompositeLosses:
    def test_coarse_loss_default_weights(self):
        assert coarse_loss(0.5, 1e6, 2.0) == 0.8
        assert coarse_loss(0.5, 1e6, 2.0, LossWeights(0.8, 1e-7, 0.1)) == 0.5 + 1e-7 * 1e6 + 0.1 * 2.0

    def test_coarse_loss_degenerate(self):
        assert coarse_loss(0.0, 0.0, 0.0) == 0.0
        assert coarse_loss(0.37, 5.0, 9.0, LossWeights(0.8, 0.0, 0.0)) == 0.37

    def test_fine_loss(self, rng):
        assert fine_loss(0.0, 0.0) == 0.0
        assert fine_loss(0.3, 0.2) == 0.5
        x = rng.random((16, 16, 3))
        assert fine_loss(0.25, photometric_loss(x, x)) == pytest.approx(0.25, abs=1e-12)

    def test_weights_validated(self):
        with pytest.raises(ValidationError):
            LossWeights(1.5)
        with pytest.raises(ValidationError):
            LossWeights(0.8, -1.0)

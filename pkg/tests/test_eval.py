import math

import numpy as np
import pytest

from mstsvd.metrics import (
    MetricBlock,
    csv_header,
    csv_row,
    ergas,
    metric_block,
    psnr,
    sam,
    ssim,
)
from mstsvd.noise import add_awgn, add_awgn_band_ramp, add_stripes


class TestAddAwgn:
    def test_sigma_zero_identity(self, rng):
        img = rng.uniform(0, 255, (16, 16, 3))
        assert np.array_equal(add_awgn(img, 0.0, seed=5), img)

    def test_empirical_std(self):
        img = np.zeros((100, 100, 100))  # 1e6 samples
        noisy = add_awgn(img, 30.0, seed=42)
        assert 29.7 <= noisy.std() <= 30.3
        assert abs(noisy.mean()) < 0.1

    def test_analytic_psnr(self):
        img = np.full((256, 256, 3), 120.0)
        noisy = add_awgn(img, 30.0, seed=1)
        assert psnr(img, noisy) == pytest.approx(20 * math.log10(255 / 30), abs=0.05)

    def test_seeded_reproducibility(self, rng):
        img = rng.uniform(0, 255, (32, 32, 3))
        a = add_awgn(img, 10.0, seed=7)
        b = add_awgn(img, 10.0, seed=7)
        assert np.array_equal(a, b)

    def test_seeds_independent(self):
        img = np.zeros((64, 64, 8))
        a = add_awgn(img, 1.0, seed=1).ravel()
        b = add_awgn(img, 1.0, seed=2).ravel()
        corr = abs(np.corrcoef(a, b)[0, 1])
        assert corr < 0.01

    def test_no_clipping(self):
        img = np.zeros((64, 64, 1))
        noisy = add_awgn(img, 50.0, seed=3)
        assert noisy.min() < -1.0  # negative excursions survive


class TestBandRamp:
    def test_equal_bounds_match_flat_noise(self, rng):
        img = rng.uniform(0, 255, (16, 16, 5))
        assert np.allclose(add_awgn_band_ramp(img, 30, 30, seed=9),
                           add_awgn(img, 30, seed=9))

    def test_linear_interpolation(self):
        img = np.zeros((200, 200, 31))
        noisy = add_awgn_band_ramp(img, 21.0, 51.0, seed=11)
        sig = np.linspace(21, 51, 31)
        assert sig[15] == pytest.approx(36.0)
        assert np.mean(sig) == pytest.approx(36.0)
        stds = noisy.std(axis=(0, 1))
        assert np.abs(stds - sig).max() < 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            add_awgn_band_ramp(np.zeros((8, 8, 1)), 1, 2, seed=0)
        with pytest.raises(ValueError):
            add_awgn_band_ramp(np.zeros((8, 8, 4)), 5, 2, seed=0)


class TestStripes:
    def test_zero_amplitude_identity(self, rng):
        img = rng.uniform(0, 255, (12, 12, 6))
        assert np.array_equal(add_stripes(img, [1, 3], 0.0, seed=4), img)

    def test_column_offsets_bookkeeping(self, rng):
        img = rng.uniform(20, 200, (20, 24, 7))
        out = add_stripes(img, [2], 15.0, seed=8)
        delta = out - img
        assert np.abs(delta[:, :, [0, 1, 3, 4, 5, 6]]).max() == 0.0
        band = delta[:, :, 2]
        # constant down each column, within amplitude
        assert np.abs(band - band[0:1, :]).max() < 1e-10
        assert np.abs(band).max() <= 15.0
        col_means = out[:, :, 2].mean(axis=0) - img[:, :, 2].mean(axis=0)
        assert np.abs(col_means - band[0]).max() < 1e-10

    def test_bad_band(self):
        with pytest.raises(ValueError):
            add_stripes(np.zeros((8, 8, 3)), [3], 1.0, seed=0)


class TestPsnr:
    def test_constant_offset(self):
        a = np.full((32, 32, 3), 100.0)
        b = a + 10.0
        assert psnr(a, b) == pytest.approx(20 * math.log10(255 / 10), abs=0.01)
        assert psnr(a, b) == pytest.approx(28.13, abs=0.01)

    def test_identical_infinite(self, rng):
        img = rng.uniform(0, 255, (16, 16, 3))
        assert math.isinf(psnr(img, img))

    def test_sigma50_noisy_value(self):
        img = np.full((256, 256, 4), 128.0)
        noisy = add_awgn(img, 50.0, seed=2)
        assert psnr(img, noisy) == pytest.approx(14.15, abs=0.05)

    def test_symmetric(self, rng):
        a = rng.uniform(0, 255, (16, 16, 3))
        b = rng.uniform(0, 255, (16, 16, 3))
        assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4, 1)), np.zeros((4, 5, 1)))


class TestSsim:
    def test_identical(self, rng):
        img = rng.uniform(0, 255, (32, 32, 3))
        assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)

    def test_large_offset_penalized(self, rng):
        img = rng.uniform(0, 120, (32, 32, 1))
        shifted = np.clip(img + 128.0, 0, 255)
        assert ssim(img, shifted) < 0.8

    def test_against_reference_implementation(self, rng):
        from skimage.metrics import structural_similarity
        for _ in range(5):
            a = rng.uniform(0, 255, (40, 36))
            b = np.clip(a + rng.normal(0, 25, a.shape), 0, 255)
            ref = structural_similarity(
                a, b, win_size=11, gaussian_weights=True, sigma=1.5,
                use_sample_covariance=False, data_range=255.0,
            )
            assert ssim(a, b) == pytest.approx(ref, abs=1e-4)

    def test_multichannel_is_channel_mean(self, rng):
        a = rng.uniform(0, 255, (24, 24, 3))
        b = np.clip(a + rng.normal(0, 20, a.shape), 0, 255)
        per_channel = [ssim(a[:, :, c], b[:, :, c]) for c in range(3)]
        assert ssim(a, b) == pytest.approx(np.mean(per_channel), rel=1e-12)

    def test_symmetric(self, rng):
        a = rng.uniform(0, 255, (24, 24, 1))
        b = np.clip(a + rng.normal(0, 30, a.shape), 0, 255)
        assert ssim(a, b) == pytest.approx(ssim(b, a), rel=1e-12)


class TestErgas:
    def test_identical_zero(self, rng):
        img = rng.uniform(10, 200, (16, 16, 5))
        assert ergas(img, img) == 0.0

    def test_single_band_offset_closed_form(self):
        b_count = 6
        img = np.full((20, 20, b_count), 50.0)
        test = img.copy()
        delta = 7.0
        test[:, :, 2] += delta
        expected = 100.0 * delta / (50.0 * math.sqrt(b_count))
        assert ergas(img, test) == pytest.approx(expected, rel=1e-12)

    def test_scale_invariance(self, rng):
        a = rng.uniform(10, 200, (16, 16, 4))
        b = a + rng.normal(0, 5, a.shape)
        assert ergas(2 * a, 2 * b) == pytest.approx(ergas(a, b), rel=1e-12)

    def test_zero_mean_band_rejected(self):
        a = np.zeros((8, 8, 2))
        a[:, :, 0] = 5.0
        with pytest.raises(ValueError):
            ergas(a, a + 1)


class TestSam:
    def test_identical_zero(self, rng):
        img = rng.uniform(10, 200, (16, 16, 5))
        assert sam(img, img) == pytest.approx(0.0, abs=1e-6)

    def test_scale_invariant(self, rng):
        img = rng.uniform(10, 200, (16, 16, 5))
        assert sam(img, 2 * img) == pytest.approx(0.0, abs=1e-6)

    def test_orthogonal_vectors(self):
        a = np.zeros((4, 4, 2))
        b = np.zeros((4, 4, 2))
        a[:, :, 0] = 1.0
        b[:, :, 1] = 1.0
        assert sam(a, b) == pytest.approx(math.pi / 2, rel=1e-12)
        assert sam(a, b) == pytest.approx(1.5708, abs=1e-4)

    def test_skips_degenerate_pixels(self):
        a = np.zeros((2, 2, 2))
        b = np.zeros((2, 2, 2))
        a[0, 0] = [1, 0]
        b[0, 0] = [0, 1]
        a[0, 1] = [1, 0]
        b[0, 1] = [1, 0]
        # two valid pixels: pi/2 and 0
        assert sam(a, b) == pytest.approx(math.pi / 4, rel=1e-12)

    def test_all_degenerate_rejected(self):
        with pytest.raises(ValueError):
            sam(np.zeros((4, 4, 3)), np.zeros((4, 4, 3)))


class TestCsv:
    def test_header_order(self):
        assert csv_header() == "method,sigma,psnr,ssim,ergas,sam,seconds"

    def test_row_formatting(self):
        block = MetricBlock(psnr=math.inf, ssim=1.0, ergas=0.0, sam=0.0)
        row = csv_row("mstsvd", 30.0, block, 1.25)
        fields = row.split(",")
        assert fields[0] == "mstsvd"
        assert fields[2] == "inf"
        assert float(fields[3]) == 1.0

    def test_metric_block_fields(self, rng):
        clean = rng.uniform(10, 200, (24, 24, 4))
        noisy = add_awgn(clean, 20.0, seed=3)
        mb = metric_block(clean, noisy)
        assert mb.psnr > 0 and 0 <= mb.ssim <= 1 and mb.ergas > 0 and 0 <= mb.sam < math.pi

"""Tests for the pluggable denoiser kinds and their shared contract."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from pnpsr.denoise import (
    CLASSICAL_KINDS,
    DENOISER_KINDS,
    DenoiserSpec,
    denoise,
    denoise_bands,
    load_external,
    make_denoiser,
    soft_threshold,
    tv_prox,
    tv_prox_plane,
    tv_value,
    wavelet_detail_l1,
    wavelet_soft_plane,
    wavelet_soft_threshold,
)
from pnpsr.errors import ValidationError
from pnpsr.neural import save_network, weight_spec
from pnpsr.wavelet import haar2_decompose

from support import make_image


class TestSoftThreshold:
    def test_known_values(self):
        v = np.array([-2.0, -0.5, 0.0, 0.3, 1.5])
        np.testing.assert_allclose(soft_threshold(v, 1.0), [-1.0, 0.0, 0.0, 0.0, 0.5])

    def test_zero_threshold_identity(self):
        v = np.array([-1.0, 2.0, 0.25])
        np.testing.assert_array_equal(soft_threshold(v, 0.0), v)

    @given(hnp.arrays(np.float64, (8,), elements=st.floats(-10, 10)), st.floats(0, 5))
    @settings(max_examples=50, deadline=None)
    def test_shrinks_toward_zero(self, v, t):
        out = soft_threshold(v, t)
        assert np.all(np.abs(out) <= np.abs(v) + 1e-12)
        assert np.all(out * v >= 0)


class TestWaveletSoft:
    def test_prox_optimality_on_exact_dims(self, rng):
        # On dims divisible by 2**levels the operation is the exact prox of
        # t * l1 on the detail coefficients of an orthonormal transform, so
        # the subgradient conditions must hold coefficient by coefficient.
        x = rng.normal(0, 1, (32, 32))
        t = 0.1
        out = wavelet_soft_plane(x, t)
        ll_in, det_in = haar2_decompose(x, 2)
        ll_out, det_out = haar2_decompose(out, 2)
        np.testing.assert_allclose(ll_out, ll_in, atol=1e-10)
        for tin, tout in zip(det_in, det_out):
            for din, dout in zip(tin, tout):
                nz = np.abs(dout) > 1e-12
                np.testing.assert_allclose(
                    dout[nz], din[nz] - t * np.sign(dout[nz]), atol=1e-10
                )
                assert np.all(np.abs(din[~nz]) <= t + 1e-10)

    def test_nonexpansive_on_exact_dims(self, rng):
        a = rng.normal(0, 1, (24, 24))
        b = rng.normal(0, 1, (24, 24))
        da = wavelet_soft_plane(a, 0.2)
        db = wavelet_soft_plane(b, 0.2)
        assert np.linalg.norm(da - db) <= np.linalg.norm(a - b) + 1e-12

    def test_constant_plane_unchanged(self):
        x = np.full((20, 20), 0.37)
        np.testing.assert_allclose(wavelet_soft_plane(x, 0.5), x, atol=1e-12)

    def test_large_threshold_flattens(self, rng):
        x = rng.normal(0.5, 0.1, (16, 16))
        out = wavelet_soft_plane(x, 1e3)
        # every detail is killed; only the 2-level local means survive
        assert tv_value(out) < tv_value(x)
        _, details = haar2_decompose(out, 2)
        for triple in details:
            for d in triple:
                np.testing.assert_allclose(d, 0.0, atol=1e-9)

    def test_padded_dims_round_trip_shape(self, rng):
        x = rng.normal(0, 1, (13, 18))
        out = wavelet_soft_plane(x, 0.1)
        assert out.shape == x.shape

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValidationError):
            wavelet_soft_plane(np.zeros((8, 8)), -0.1)

    def test_detail_l1_decreases_under_shrinkage(self, rng):
        x = rng.normal(0, 1, (32, 32))
        assert wavelet_detail_l1(wavelet_soft_plane(x, 0.2)) < wavelet_detail_l1(x)

    def test_detail_l1_zero_for_constant(self):
        assert wavelet_detail_l1(np.full((16, 16), 2.0)) == pytest.approx(0.0, abs=1e-9)


class TestTvProx:
    def _objective(self, p, v, lam):
        return 0.5 * np.sum((p - v) ** 2) + lam * tv_value(p)

    def test_constant_plane_fixed_point(self):
        x = np.full((12, 12), 0.8)
        np.testing.assert_array_equal(tv_prox_plane(x, 0.3), x)

    def test_objective_not_worse_than_input(self, rng):
        x = rng.normal(0.5, 0.2, (24, 24))
        lam = 0.1
        out = tv_prox_plane(x, lam)
        assert self._objective(out, x, lam) <= self._objective(x, x, lam)

    def test_objective_beats_flat_candidate(self, rng):
        x = rng.normal(0.5, 0.2, (24, 24))
        lam = 0.05
        out = tv_prox_plane(x, lam)
        flat = np.full_like(x, x.mean())
        assert self._objective(out, x, lam) <= self._objective(flat, x, lam)

    def test_denoises_piecewise_constant(self, rng):
        clean = np.zeros((32, 32))
        clean[:, 16:] = 1.0
        noisy = clean + rng.normal(0, 0.1, clean.shape)
        out = tv_prox_plane(noisy, 0.08)
        assert np.sum((out - clean) ** 2) < 0.5 * np.sum((noisy - clean) ** 2)

    def test_tv_monotone_in_weight(self, rng):
        x = rng.normal(0, 0.3, (20, 20))
        tvs = [tv_value(tv_prox_plane(x, lam)) for lam in (0.01, 0.05, 0.2)]
        assert tvs[0] >= tvs[1] >= tvs[2]

    def test_zero_weight_copies(self, rng):
        x = rng.normal(0, 1, (10, 10))
        out = tv_prox_plane(x, 0.0)
        np.testing.assert_array_equal(out, x)
        assert out is not x

    def test_mean_preserved(self, rng):
        # the output is x minus lam*div(p), and div sums to zero over the grid
        x = rng.normal(0.4, 0.2, (16, 16))
        out = tv_prox_plane(x, 0.1)
        assert out.mean() == pytest.approx(x.mean(), abs=1e-12)

    def test_nonexpansive_on_random_pairs(self, rng):
        # the solver relies on denoisers not amplifying distances
        for _ in range(5):
            a = rng.normal(0.5, 0.3, (20, 20))
            b = rng.normal(0.5, 0.3, (20, 20))
            da = tv_prox_plane(a, 0.1)
            db = tv_prox_plane(b, 0.1)
            assert np.linalg.norm(da - db) <= np.linalg.norm(a - b) + 1e-6

    def test_validations(self):
        with pytest.raises(ValidationError):
            tv_prox_plane(np.zeros((8, 8)), -0.1)
        with pytest.raises(ValidationError):
            tv_prox_plane(np.zeros((8, 8)), 0.1, iters=0)

    def test_tv_value_analytic(self):
        x = np.zeros((3, 3))
        x[1, 1] = 1.0
        # forward differences: gx -1 at (0,1),+... enumerate: |grad| at
        # (0,1)=1, (1,0)=1, (1,1)=sqrt(2), total 2+sqrt(2)
        assert tv_value(x) == pytest.approx(2.0 + np.sqrt(2.0))


class TestDenoiserSpec:
    def test_kinds_listed(self):
        assert set(CLASSICAL_KINDS) < set(DENOISER_KINDS)
        assert "external" in DENOISER_KINDS

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValidationError, match="kind"):
            DenoiserSpec(kind="median")

    def test_external_requires_model(self):
        with pytest.raises(ValidationError, match="model"):
            DenoiserSpec(kind="external")

    def test_semantics_auto_filled(self):
        for kind in CLASSICAL_KINDS:
            assert make_denoiser(kind).strength_semantics

    def test_make_denoiser_external_needs_path(self):
        with pytest.raises(ValidationError, match="path"):
            make_denoiser("external")


class TestDenoiserContract:
    @pytest.mark.parametrize("kind", CLASSICAL_KINDS)
    def test_strength_zero_is_identity_copy(self, kind, rng):
        spec = make_denoiser(kind)
        arr = rng.random((3, 16, 16))
        out = denoise_bands(spec, arr, 0.0)
        np.testing.assert_array_equal(out, arr)
        assert out is not arr

    @pytest.mark.parametrize("kind", CLASSICAL_KINDS)
    def test_shape_preserved(self, kind, rng):
        spec = make_denoiser(kind)
        arr = rng.random((4, 24, 20))
        assert denoise_bands(spec, arr, 0.05).shape == arr.shape

    def test_negative_strength_rejected(self, rng):
        with pytest.raises(ValidationError, match="strength"):
            denoise_bands(make_denoiser("identity"), rng.random((1, 8, 8)), -1.0)

    def test_bands_processed_independently(self, rng):
        # classical kinds must not mix bands: permuting band order commutes
        spec = make_denoiser("tv_prox")
        arr = rng.random((3, 16, 16))
        out = denoise_bands(spec, arr, 0.05)
        perm = denoise_bands(spec, arr[::-1], 0.05)
        np.testing.assert_array_equal(perm, out[::-1])

    def test_image_level_preserves_metadata(self, rng):
        img = make_image(rng.random((4, 16, 16)), pixel_size=30.0)
        out = denoise(make_denoiser("wavelet_soft"), img, 0.1)
        assert out.band_names == img.band_names
        assert out.pixel_size == 30.0
        out2 = wavelet_soft_threshold(img, 0.1)
        np.testing.assert_array_equal(out.data, out2.data)

    def test_tv_image_matches_plane(self, rng):
        img = make_image(rng.random((2, 16, 16)))
        out = tv_prox(img, 0.07)
        np.testing.assert_array_equal(out.data[0], tv_prox_plane(img.data[0], 0.07))


class TestExternalDenoiser:
    @pytest.fixture
    def zero_model_path(self, tmp_path):
        arch = dict(scales=2, base_width=4, blocks=1)
        spec = weight_spec(5, 4, **arch)
        weights = {k: np.zeros(s, dtype=np.float32) for k, s in spec.items()}
        path = tmp_path / "zero.npz"
        save_network(path, weights, **arch)
        return path

    def test_zero_weights_pass_bands_through(self, zero_model_path, rng):
        spec = load_external(zero_model_path)
        arr = rng.random((4, 16, 16))
        out = denoise_bands(spec, arr, 0.09)
        np.testing.assert_allclose(out, arr, atol=1e-6)
        assert out.dtype == np.float64

    def test_wrong_band_count_rejected(self, zero_model_path, rng):
        spec = load_external(zero_model_path)
        with pytest.raises(ValidationError, match="bands"):
            denoise_bands(spec, rng.random((3, 16, 16)), 0.09)

    def test_make_denoiser_with_resource(self, zero_model_path):
        spec = make_denoiser("external", resource=zero_model_path)
        assert spec.kind == "external"
        assert spec.model is not None
        assert spec.resource == str(zero_model_path)

    def test_strength_reaches_noise_map(self, tmp_path, rng):
        # craft a model whose output is exactly the noise-map channel by
        # zeroing everything except a head/tail path that copies channel 4
        arch = dict(scales=1, base_width=4, blocks=1)
        spec_shapes = weight_spec(5, 4, **arch)
        weights = {k: np.zeros(s, dtype=np.float32) for k, s in spec_shapes.items()}
        # head feature 0 = noise channel; tail band 0 residual = feature 0
        weights["head.weight"][0, 4, 1, 1] = 1.0
        weights["tail.weight"][0, 0, 1, 1] = 1.0
        path = tmp_path / "probe.npz"
        save_network(path, weights, **arch)
        spec = load_external(path)
        arr = np.zeros((4, 8, 8))
        out = denoise_bands(spec, arr, 0.25)
        # residual equals the strength, so band 0 = 0 - 0.25
        np.testing.assert_allclose(out[0], -0.25, atol=1e-6)
        np.testing.assert_allclose(out[1:], 0.0, atol=1e-6)

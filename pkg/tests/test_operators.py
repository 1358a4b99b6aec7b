import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poisson_deconv.image import write_image
from poisson_deconv.operators import ConvOperator, Psf, make_psf, parse_psf


def spatial_conv(x, kernel):
    """Direct periodic convolution, O(n k^2)."""
    h, w = x.shape
    kh, kw = kernel.shape
    oy, ox = kh // 2, kw // 2
    out = np.zeros_like(x)
    for i in range(h):
        for j in range(w):
            s = 0.0
            for u in range(kh):
                for v in range(kw):
                    s += kernel[u, v] * x[(i - (u - oy)) % h, (j - (v - ox)) % w]
            out[i, j] = s
    return out


def test_moving_average_entries():
    k = make_psf("moving_average", 7).kernel
    assert k.shape == (7, 7)
    np.testing.assert_allclose(k, 1 / 49)


def test_delta_is_identity(rng):
    psf = make_psf("delta")
    assert psf.kernel.shape == (1, 1) and psf.kernel[0, 0] == 1
    x = rng.normal(size=(8, 6))
    op = ConvOperator(psf, x.shape)
    np.testing.assert_array_equal(op.apply(x), x)
    np.testing.assert_array_equal(op.apply_adjoint(x), x)
    assert op.spectral_norm() == pytest.approx(1.0, abs=1e-12)


def test_gaussian_normalized():
    k = make_psf("gaussian", size=9, sigma=1.0).kernel
    assert k.shape == (9, 9)
    assert abs(k.sum() - 1) < 1e-12
    assert k.min() >= 0


def test_even_size_rejected():
    with pytest.raises(ValueError):
        make_psf("moving_average", 6)
    with pytest.raises(ValueError):
        Psf(np.ones((2, 3)))


def test_unnormalized_kernel_kept():
    assert make_psf("moving_average", 3, normalize=False).kernel.sum() == 9


def test_flat_image_invariant():
    op = ConvOperator(make_psf("gaussian", sigma=1.3), (16, 16))
    np.testing.assert_allclose(op.apply(np.full((16, 16), 4.2)), 4.2, rtol=1e-12)


def test_impulse_at_corner_wraps():
    x = np.zeros((8, 8))
    x[0, 0] = 1
    y = ConvOperator(make_psf("moving_average", 3), x.shape).apply(x)
    expected = np.zeros((8, 8))
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            expected[dy % 8, dx % 8] = 1 / 9
    np.testing.assert_allclose(y, expected, atol=1e-15)


@pytest.mark.parametrize("psf", [make_psf("moving_average", 3), make_psf("gaussian", sigma=0.8),
                                 Psf(np.arange(15.0).reshape(3, 5))])
def test_matches_spatial_oracle(rng, psf):
    x = rng.normal(size=(12, 10))
    op = ConvOperator(psf, x.shape)
    np.testing.assert_allclose(op.apply(x), spatial_conv(x, psf.kernel), atol=1e-10)
    # adjoint is convolution with the flipped kernel
    flipped = psf.kernel[::-1, ::-1]
    np.testing.assert_allclose(op.apply_adjoint(x), spatial_conv(x, flipped), atol=1e-10)


def test_kernel_larger_than_image_wraps(rng):
    x = rng.normal(size=(4, 4))
    psf = Psf(rng.uniform(size=(7, 7)))
    np.testing.assert_allclose(ConvOperator(psf, x.shape).apply(x), spatial_conv(x, psf.kernel), atol=1e-10)


def test_symmetric_psf_self_adjoint(rng):
    op = ConvOperator(make_psf("moving_average", 7), (16, 16))
    x = rng.normal(size=(16, 16))
    assert np.abs(op.apply_adjoint(x) - op.apply(x)).max() < 1e-10


def test_adjoint_identity_random_pairs(rng):
    psf = Psf(rng.uniform(size=(5, 3)))
    op = ConvOperator(psf, (16, 16))
    for _ in range(20):
        x, y = rng.normal(size=(2, 16, 16))
        lhs, rhs = np.vdot(op.apply(x), y), np.vdot(x, op.apply_adjoint(y))
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


@pytest.mark.parametrize("spec", ["moving_average:7", "gaussian:1.5", "delta"])
def test_unit_sum_norm_one(spec):
    assert ConvOperator(parse_psf(spec), (32, 32)).spectral_norm() == pytest.approx(1.0, abs=1e-12)


def test_norm_homogeneous():
    k = make_psf("moving_average", 5).kernel
    n1 = ConvOperator(Psf(k), (16, 16)).spectral_norm()
    n2 = ConvOperator(Psf(2 * k), (16, 16)).spectral_norm()
    assert n2 == pytest.approx(2 * n1, rel=1e-14)


def test_norm_matches_power_method(rng):
    op = ConvOperator(Psf(rng.normal(size=(5, 5))), (16, 16))
    v = rng.normal(size=(16, 16))
    for _ in range(3000):
        v = op.apply_adjoint(op.apply(v))
        v /= np.linalg.norm(v)
    est = np.sqrt(np.vdot(v, op.apply_adjoint(op.apply(v))))
    assert est == pytest.approx(op.spectral_norm(), rel=1e-6)


def test_shape_mismatch():
    op = ConvOperator(make_psf("delta"), (4, 4))
    with pytest.raises(ValueError):
        op.apply(np.zeros((4, 5)))
    with pytest.raises(ValueError):
        op.apply_adjoint(np.zeros((3, 4)))


def test_parse_psf_file(tmp_path):
    write_image(np.array([[0, 1, 0], [1, 4, 1], [0, 1, 0.0]]), tmp_path / "k.raw")
    psf = parse_psf(f"file:{tmp_path / 'k.raw'}")
    assert psf.kernel.sum() == pytest.approx(1.0)
    assert psf.kernel[1, 1] == pytest.approx(0.5)


@pytest.mark.parametrize("spec", ["moving_average:x", "moving_average:4", "gauss:1", "delta:3", "file:", ""])
def test_parse_psf_errors(spec):
    with pytest.raises(ValueError):
        parse_psf(spec)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, a, b):
    r = np.random.default_rng(seed)
    op = ConvOperator(Psf(r.uniform(size=(3, 3))), (8, 8))
    x, y = r.normal(size=(2, 8, 8))
    np.testing.assert_allclose(op.apply(a * x + b * y), a * op.apply(x) + b * op.apply(y), atol=1e-10)

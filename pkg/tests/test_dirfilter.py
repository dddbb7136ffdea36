import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blurflow.bench import streak_kernel
from blurflow.dirfilter import (
    FRAME1_WEIGHTS, FRAME2_WEIGHTS, DirectionalFilterParams, directional_highpass_frequency,
    directional_highpass_raw, directional_highpass_spatial, enhance_kernel, filter_periodic, frequency_response,
    spatial_taps,
)
from blurflow.imgcore import delta_kernel, is_valid_kernel

SIGMA = 0.04


def _padded_power(k):
    s = k.shape[0]
    pad = np.zeros((2 * s, 2 * s))
    pad[s // 2 : s // 2 + s, s // 2 : s // 2 + s] = k
    return np.abs(np.fft.fft2(pad)) ** 2


def _line_coordinate(n, theta):
    u, v = np.meshgrid(np.fft.fftfreq(n), np.fft.fftfreq(n))
    return np.abs(u * math.cos(theta) + v * math.sin(theta))


def _blob(size=9, width=3.0):
    y, x = np.mgrid[0:size, 0:size] - size // 2
    b = np.exp(-(x**2 + y**2) / (2 * width**2))
    return b / b.sum()


# ---------------------------------------------------------------- frequency response

def test_response_dc_zero():
    assert frequency_response(0.0, 0.0, 0.7, SIGMA) == 0.0


@pytest.mark.parametrize("theta", [0.0, 0.4, 1.3, 2.9])
def test_response_zero_on_orthogonal_line(theta):
    t = np.linspace(-0.5, 0.5, 11)
    u, v = -t * math.sin(theta), t * math.cos(theta)
    np.testing.assert_allclose(frequency_response(u, v, theta, SIGMA), 0.0, atol=1e-15)


@pytest.mark.parametrize("theta", [0.0, 1.0, 2.5])
def test_response_tail(theta):
    L = 10 * SIGMA
    g = frequency_response(L * math.cos(theta), L * math.sin(theta), theta, SIGMA)
    assert g >= 1 - 1e-8
    assert g == pytest.approx(1 - math.exp(-50.0), abs=1e-21)


@given(a=st.floats(0, 0.5), b=st.floats(0, 0.5))
def test_response_increasing_in_abs_line(a, b):
    ga = frequency_response(np.array([a, -a]), 0.0, 0.0, SIGMA)
    gb = frequency_response(b, 0.0, 0.0, SIGMA)
    assert ga[0] == ga[1]
    assert 0.0 <= ga[0] <= 1.0
    if a <= b:
        assert ga[0] <= gb
    if 1e-3 <= a < b - 1e-3 and b < 0.2:
        assert ga[0] < gb


@given(L=st.floats(0, 0.5))
def test_double_application_never_amplifies(L):
    g = frequency_response(L, 0.0, 0.0, SIGMA)
    assert g * g <= g


def test_response_rejects_bad_sigma():
    with pytest.raises(ValueError):
        frequency_response(0.1, 0.1, 0.0, 0.0)


# ---------------------------------------------------------------- periodic spectral filter

@pytest.mark.parametrize("theta", [0.0, math.pi / 2])
def test_periodic_annihilates_line_component(theta, rng):
    # constant along the filter direction means the spectrum sits on L = 0
    profile = rng.random(16)
    grid = np.tile(profile, (16, 1)).T if theta == 0.0 else np.tile(profile, (16, 1))
    np.testing.assert_allclose(filter_periodic(grid, theta, SIGMA), 0.0, atol=1e-13)


def test_periodic_preserves_high_band():
    n = 32
    y, x = np.mgrid[0:n, 0:n]
    grid = np.cos(2 * np.pi * (12 * x + 3 * y) / n)  # |L| = 12/32 > 10 sigma along theta = 0
    np.testing.assert_allclose(filter_periodic(grid, 0.0, SIGMA), grid, atol=1e-6)


# ---------------------------------------------------------------- kernel filter

def test_delta_kernel_center_stays_max():
    out = directional_highpass_frequency(delta_kernel(9), 0.6, SIGMA)
    assert is_valid_kernel(out)
    assert np.argmax(out) == 40


def test_delta_kernel_matches_dft_oracle():
    # direct DFT of the padded delta is flat, so the raw output is the
    # cropped inverse transform of the response itself
    raw = directional_highpass_raw(delta_kernel(9), 0.3, SIGMA)
    u, v = np.meshgrid(np.fft.fftfreq(18), np.fft.fftfreq(18))
    impulse = np.fft.ifft2(frequency_response(u, v, 0.3, SIGMA)).real
    oracle = np.roll(impulse, (4, 4), axis=(0, 1))[:9, :9]
    np.testing.assert_allclose(raw, oracle, atol=1e-12)


def test_tiny_sigma_leaves_kernel(rng):
    k = rng.random((9, 9))
    k /= k.sum()
    out = directional_highpass_frequency(k, 1.1, 1e-3 * 0.5)
    assert np.max(np.abs(out - k)) < 0.05


@pytest.mark.parametrize("theta", [0.0, 0.5, 1.1, 2.4])
def test_streak_band_energy_preserved(theta):
    k = streak_kernel(7, theta, 9)
    fdir = theta + math.pi / 2
    band = _line_coordinate(18, fdir) >= 2 * SIGMA
    before = _padded_power(k)[band].sum()
    after = _padded_power(directional_highpass_raw(k, fdir, SIGMA))[band].sum()
    assert after >= 0.9 * before


@pytest.mark.parametrize("theta", [0.0, 0.5, 1.1, 2.4])
def test_enhance_suppresses_blob_keeps_streak(theta):
    streak, blob = streak_kernel(7, theta, 9), _blob()
    low = _line_coordinate(18, theta + math.pi / 2) < SIGMA
    band = ~(_line_coordinate(18, theta + math.pi / 2) < 2 * SIGMA)
    thetas = [theta] * 3

    def raw(k):
        return sum(b * directional_highpass_raw(k, theta + math.pi / 2, SIGMA) for b in FRAME1_WEIGHTS)

    assert _padded_power(raw(blob))[low].sum() <= 0.5 * _padded_power(blob)[low].sum()
    assert _padded_power(raw(streak))[band].sum() >= 0.9 * _padded_power(streak)[band].sum()
    out = enhance_kernel(0.7 * streak + 0.3 * blob, thetas, FRAME1_WEIGHTS, SIGMA)
    assert is_valid_kernel(out)


def test_enhance_weights_accepted():
    k = streak_kernel(5, 0.3, 9)
    for w in (FRAME1_WEIGHTS, FRAME2_WEIGHTS):
        assert is_valid_kernel(enhance_kernel(k, [0.3, 0.5, 0.4], w))


def test_enhance_equal_thetas_is_single_direction():
    k = streak_kernel(7, 1.0, 9)
    a = enhance_kernel(k, [1.0, 1.0, 1.0], FRAME1_WEIGHTS)
    b = directional_highpass_frequency(k, 1.0 + math.pi / 2)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_enhance_rejects_bad_weights():
    with pytest.raises(ValueError, match="sum to 1"):
        enhance_kernel(delta_kernel(5), [0.1, 0.2, 0.3], [0.5, 0.5, 0.5])
    with pytest.raises(ValueError):
        enhance_kernel(delta_kernel(5), [4.0], [1.0])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), t=st.tuples(*[st.floats(0, math.pi, exclude_max=True)] * 3))
def test_enhance_output_valid(seed, t):
    k = np.random.default_rng(seed).random((7, 7))
    assert is_valid_kernel(enhance_kernel(k / k.sum(), list(t), FRAME2_WEIGHTS))


# ---------------------------------------------------------------- spatial form

def test_spatial_constant():
    out = directional_highpass_spatial(np.full((12, 12), 0.3), 0.8)
    np.testing.assert_allclose(out, 0.3, atol=1e-12)


def test_spatial_orthogonal_invariance(rng):
    img = np.tile(rng.random((12, 1)), (1, 15))
    np.testing.assert_allclose(directional_highpass_spatial(img, 0.0), img, atol=1e-12)


def test_spatial_matches_1d_oracle():
    n = 64
    x = np.arange(n)
    row = np.sin(2 * np.pi * 0.3 * x)
    img = np.tile(row, (8, 1))
    out = directional_highpass_spatial(img, 0.0)
    t, taps = spatial_taps(SIGMA, 15)
    ref = np.convolve(row, taps[::-1], mode="same")
    inner = slice(10, n - 10)
    amp = lambda a: np.sqrt(2 * np.mean(a[inner] ** 2))
    assert amp(out[3]) == pytest.approx(amp(ref), rel=0.05)


@pytest.mark.parametrize("theta", [0.0, math.pi / 2])
def test_spatial_sinusoid_gain_matches_tap_response(theta):
    # the analytic gain of the sampled taps is their DTFT at the signal frequency
    n, f = 32, 5 / 32
    y, x = np.mgrid[0:n, 0:n]
    coord = x if theta == 0.0 else y
    img = np.cos(2 * np.pi * f * coord)
    out = directional_highpass_spatial(img, theta)
    t, taps = spatial_taps(SIGMA, 15)
    gain = abs(np.sum(taps * np.exp(2j * np.pi * f * t)))
    line = out[16, 8:24] if theta == 0.0 else out[8:24, 16]
    ref = img[16, 8:24] if theta == 0.0 else img[8:24, 16]
    assert np.sqrt(np.mean(line**2)) == pytest.approx(gain * np.sqrt(np.mean(ref**2)), rel=0.05)


def test_params_validation():
    with pytest.raises(ValueError):
        DirectionalFilterParams(sigma=0)
    with pytest.raises(ValueError):
        DirectionalFilterParams(support_length=4)

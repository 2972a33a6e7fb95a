import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dft_frame
from seldkit.core import ValidationError
from seldkit.features import (
    ILD,
    LOGMEL_L,
    LOGMEL_R,
    FeatureStack,
    IldParams,
    MelFilterbank,
    NormStats,
    Spectrogram,
    StftSpec,
    build_features,
    default_filterbank,
    fit_stats,
    ild,
    log_mel,
    normalize,
    stft,
)

SPEC = StftSpec()
N_FFT = 512
K0 = 20  # bin-centre test frequency: 20 * 24000 / 512 = 937.5 Hz


def tone(amplitude=1.0, n=120000, k=K0, phase=0.3):
    t = np.arange(n)
    return amplitude * np.cos(2 * np.pi * k * t / N_FFT + phase)


def test_five_second_clip_shape():
    spec = stft(np.zeros(120000), SPEC)
    assert spec.values.shape == (257, 800)


@pytest.mark.parametrize("n", [1, 149, 150, 512, 1000, 24000, 119999])
def test_frame_count_formula(n):
    x = np.random.default_rng(n).standard_normal(n)
    assert stft(x, SPEC).num_frames == SPEC.num_frames(n) == max(1, n // 150)


def test_zero_input_gives_zero_magnitude():
    assert np.all(np.abs(stft(np.zeros(4000)).values) == 0)


def test_sinusoid_peak_matches_direct_dft():
    x = tone()
    spec = stft(x, SPEC)
    mags = np.abs(spec.values)
    interior = range(5, 795)
    assert all(np.argmax(mags[:, t]) == K0 for t in interior)
    for t in (5, 123, 400, 794):
        ref = dft_frame(x, t * SPEC.hop, N_FFT)
        np.testing.assert_allclose(spec.values[:, t], ref, atol=1e-9)
    # periodic Hann over whole cycles: |X[k0]| = N/4, neighbours N/8
    np.testing.assert_allclose(mags[K0, 5:795], 128.0, rtol=1e-12)
    np.testing.assert_allclose(mags[K0 + 1, 5:795], 64.0, rtol=1e-12)


def test_stft_errors():
    with pytest.raises(ValidationError):
        stft(np.array([]))
    with pytest.raises(ValidationError):
        stft(np.zeros(1000), SPEC, sample_rate=48000)
    with pytest.raises(ValidationError):
        stft(np.zeros((2, 100)))


def test_filterbank_rows_nonnegative_and_supported():
    fb = default_filterbank()
    assert fb.matrix.shape == (64, 257)
    assert np.all(fb.matrix >= 0)
    assert np.all(fb.matrix.max(axis=1) > 0)
    with pytest.raises(ValidationError):
        MelFilterbank.create(num_mels=400)


def test_log_mel_zero_spectrogram_is_floor():
    fb = default_filterbank()
    out = log_mel(Spectrogram(np.zeros((257, 7), complex)), fb, floor=1e-10)
    assert out.shape == (7, 64)
    np.testing.assert_array_equal(out, np.log(1e-10))


def test_log_mel_single_bin_only_touches_overlapping_filters():
    fb = default_filterbank()
    vals = np.zeros((257, 3), complex)
    vals[K0, :] = 10.0
    out = log_mel(Spectrogram(vals), fb)
    above = np.flatnonzero(out[0] > np.log(1e-10) + 1e-9)
    np.testing.assert_array_equal(above, np.flatnonzero(fb.matrix[:, K0] > 0))


def test_log_mel_matches_dense_loop(rng):
    fb = default_filterbank()
    vals = rng.standard_normal((257, 4)) + 1j * rng.standard_normal((257, 4))
    out = log_mel(Spectrogram(vals), fb, floor=1e-10)
    ref = np.empty((4, 64))
    for t in range(4):
        for m in range(64):
            acc = 0.0
            for f in range(257):
                acc += fb.matrix[m, f] * abs(vals[f, t]) ** 2
            ref[t, m] = np.log(acc + 1e-10)
    np.testing.assert_allclose(out, ref, rtol=1e-9)


def test_log_mel_dimension_mismatch():
    with pytest.raises(ValidationError):
        log_mel(Spectrogram(np.zeros((100, 2), complex)), default_filterbank())


def test_ild_identities():
    fb = default_filterbank()
    x = tone(n=24000)
    L = stft(x)
    assert np.all(ild(L, L, fb) == 0)
    silent = stft(np.zeros(24000))
    assert np.all(ild(silent, silent, fb) == 0)


def test_ild_double_amplitude_is_log4():
    fb = default_filterbank()
    eps = IldParams().epsilon
    xl, xr = tone(2.0, 24000), tone(1.0, 24000)
    out = ild(stft(xl), stft(xr), fb)
    overlapping = np.flatnonzero(fb.matrix[:, K0 - 1:K0 + 2].sum(axis=1) > 0)
    t = 50
    for m in overlapping:
        # scalar evaluation on the oracle DFT
        Lo, Ro = dft_frame(xl, t * 150, N_FFT), dft_frame(xr, t * 150, N_FFT)
        num = sum(fb.matrix[m, f] * (abs(Lo[f]) ** 2 + eps) for f in range(257))
        den = sum(fb.matrix[m, f] * (abs(Ro[f]) ** 2 + eps) for f in range(257))
        assert out[t, m] == pytest.approx(np.log(num / den), abs=1e-9)
        assert out[t, m] == pytest.approx(np.log(4.0), abs=1e-6)


def test_ild_shape_mismatch():
    fb = default_filterbank()
    with pytest.raises(ValidationError):
        ild(stft(np.ones(3000)), stft(np.ones(6000)), fb)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ild_antisymmetry(seed):
    r = np.random.default_rng(seed)
    fb = default_filterbank()
    L, R = stft(r.standard_normal(6000)), stft(0.3 * r.standard_normal(6000))
    np.testing.assert_allclose(ild(L, R, fb), -ild(R, L, fb), atol=1e-9, rtol=0)


def test_log_mel_monotone_in_gain(rng):
    fb = default_filterbank()
    x = rng.standard_normal(12000)
    a = log_mel(stft(x), fb)
    b = log_mel(stft(1.5 * x), fb)
    assert np.all(b > a)


def test_plane_counts():
    stereo = np.random.default_rng(0).standard_normal((2, 120000))
    full = build_features(stereo)
    tl = build_features(stereo, with_ild=False)
    assert full.shape == (3, 800, 64) and full.labels == (LOGMEL_L, LOGMEL_R, ILD)
    assert tl.shape == (2, 800, 64)
    with pytest.raises(ValidationError, match="2 channels"):
        build_features(stereo[:1])


def test_normalize_examples():
    stack = FeatureStack(np.array([[[0.0, 2.0]]]), ("p",))
    out = normalize(stack, "fit")
    np.testing.assert_allclose(out.planes, [[[-1.0, 1.0]]])
    again = normalize(out, NormStats(("p",), np.array([0.0]), np.array([1.0])))
    np.testing.assert_allclose(again.planes, out.planes, atol=1e-12)


def test_fit_over_corpus(rng):
    corpus = [FeatureStack(rng.normal(3, 2, (3, 10, 4)) * [[[1]], [[5]], [[0.1]]], ("a", "b", "c"))
              for _ in range(5)]
    stats = fit_stats(corpus)
    out = np.stack([normalize(s, stats).planes for s in corpus], axis=1).reshape(3, -1)
    assert np.all(np.abs(out.mean(axis=1)) < 1e-9)
    assert np.all(np.abs(out.std(axis=1) - 1) < 1e-9)


def test_fit_zero_variance_names_plane():
    stack = FeatureStack(np.stack([np.arange(4.0).reshape(2, 2), np.ones((2, 2))]), ("ok", "flat"))
    with pytest.raises(ValidationError, match="flat"):
        normalize(stack, "fit")


def test_stats_text_roundtrip(rng):
    stats = NormStats(("logmel_L", "ILD"), rng.standard_normal(2), rng.random(2) + 0.1)
    back = NormStats.from_text(stats.to_text())
    assert back.labels == stats.labels
    np.testing.assert_array_equal(back.mean, stats.mean)
    np.testing.assert_array_equal(back.std, stats.std)

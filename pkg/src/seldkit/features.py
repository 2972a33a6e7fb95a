"""Stereo feature extraction: per-channel log-mel spectrograms and mel-domain ILD.

The default parameters give 800 frames x 64 mel bins for a 5 s clip at 24 kHz
(512-sample Hann window, hop 150).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.io import wavfile
from scipy.signal import get_window

from seldkit.core import ValidationError

LOGMEL_L = "logmel_L"
LOGMEL_R = "logmel_R"
ILD = "ILD"


@dataclass(frozen=True)
class StftSpec:
    window_len: int = 512
    hop: int = 150
    window: str = "hann"
    sample_rate: int = 24000

    def __post_init__(self):
        if self.window_len <= 0 or self.hop <= 0:
            raise ValidationError("window_len and hop must be positive")
        if self.hop > self.window_len:
            raise ValidationError("hop must not exceed window_len")

    @property
    def num_bins(self) -> int:
        return self.window_len // 2 + 1

    def num_frames(self, num_samples: int) -> int:
        """Frames produced for a signal of `num_samples` samples.

        Frames are centred on ``t * hop`` for ``t < num_samples // hop``; a 5 s
        clip at 24 kHz gives 120000 / 150 = 800 frames.
        """
        return max(1, num_samples // self.hop)


@dataclass(frozen=True)
class IldParams:
    epsilon: float = 1e-10

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")


@dataclass(frozen=True)
class Spectrogram:
    """One-sided complex STFT, shape (num_bins, num_frames)."""

    values: np.ndarray
    channel: str = ""

    @property
    def num_bins(self) -> int:
        return self.values.shape[0]

    @property
    def num_frames(self) -> int:
        return self.values.shape[1]

    def power(self) -> np.ndarray:
        return self.values.real ** 2 + self.values.imag ** 2


def hz_to_mel(freq, htk: bool = False):
    """Convert Hz to mel (Slaney scale by default, HTK optional)."""
    freq = np.asanyarray(freq, dtype=float)
    if htk:
        return 2595.0 * np.log10(1.0 + freq / 700.0)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    mel = freq / f_sp
    high = freq >= min_log_hz
    return np.where(high, min_log_mel + np.log(np.maximum(freq, min_log_hz) / min_log_hz) / logstep, mel)


def mel_to_hz(mel, htk: bool = False):
    mel = np.asanyarray(mel, dtype=float)
    if htk:
        return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    hz = f_sp * mel
    high = mel >= min_log_mel
    return np.where(high, min_log_hz * np.exp(logstep * (np.maximum(mel, min_log_mel) - min_log_mel)), hz)


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular mel filters as a (num_mels, num_bins) matrix."""

    matrix: np.ndarray
    f_min: float = 0.0
    f_max: float = 12000.0

    @property
    def num_mels(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_bins(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def create(cls, sample_rate: int = 24000, window_len: int = 512, num_mels: int = 64,
               f_min: float = 0.0, f_max: float | None = None, htk: bool = False,
               slaney_norm: bool = True) -> "MelFilterbank":
        """Build the filterbank.

        Parameters
        ----------
        sample_rate, window_len
            Define the FFT bin centre frequencies.
        num_mels
            Number of triangular filters.
        f_min, f_max
            Frequency span in Hz; ``f_max`` defaults to Nyquist.
        htk
            Use the HTK mel formula instead of the Slaney one.
        slaney_norm
            Scale each triangle to unit area in Hz (constant energy per band).
        """
        if f_max is None:
            f_max = sample_rate / 2.0
        if not 0 <= f_min < f_max <= sample_rate / 2.0:
            raise ValidationError("need 0 <= f_min < f_max <= sample_rate / 2")
        num_bins = window_len // 2 + 1
        fft_freqs = np.linspace(0.0, sample_rate / 2.0, num_bins)
        mel_pts = np.linspace(hz_to_mel(f_min, htk), hz_to_mel(f_max, htk), num_mels + 2)
        hz_pts = mel_to_hz(mel_pts, htk)
        fdiff = np.diff(hz_pts)
        ramps = hz_pts[:, None] - fft_freqs[None, :]
        lower = -ramps[:-2] / fdiff[:-1, None]
        upper = ramps[2:] / fdiff[1:, None]
        weights = np.maximum(0.0, np.minimum(lower, upper))
        if slaney_norm:
            weights *= (2.0 / (hz_pts[2:] - hz_pts[:-2]))[:, None]
        empty = np.flatnonzero(weights.max(axis=1) <= 0)
        if empty.size:
            raise ValidationError(f"mel filters {empty.tolist()} have no support; reduce num_mels")
        return cls(weights, float(f_min), float(f_max))


def stft(samples: np.ndarray, spec: StftSpec = StftSpec(), sample_rate: int | None = None,
         channel: str = "") -> Spectrogram:
    """Centred one-sided STFT with a periodic analysis window.

    The signal is reflect-padded by half a window on each side and
    ``spec.num_frames(len(samples))`` frames are taken, frame ``t`` centred on
    sample ``t * hop``.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError(f"stft expects a mono waveform, got shape {x.shape}")
    if x.size == 0:
        raise ValidationError("empty waveform")
    if sample_rate is not None and sample_rate != spec.sample_rate:
        raise ValidationError(f"sample rate {sample_rate} Hz, expected {spec.sample_rate} Hz")
    pad = spec.window_len // 2
    mode = "reflect" if x.size > pad else "constant"
    padded = np.pad(x, (pad, pad), mode=mode)
    n_frames = spec.num_frames(x.size)
    frames = np.lib.stride_tricks.sliding_window_view(padded, spec.window_len)[::spec.hop][:n_frames]
    win = get_window(spec.window, spec.window_len, fftbins=True)
    values = np.fft.rfft(frames * win, axis=1).T
    return Spectrogram(values, channel)


def log_mel(spec: Spectrogram, fb: MelFilterbank, floor: float = 1e-10) -> np.ndarray:
    """Log mel energies, time-major (num_frames, num_mels)."""
    if fb.num_bins != spec.num_bins:
        raise ValidationError(f"filterbank has {fb.num_bins} bins, spectrogram {spec.num_bins}")
    return np.log(fb.matrix @ spec.power() + floor).T


def ild(left: Spectrogram, right: Spectrogram, fb: MelFilterbank,
        p: IldParams = IldParams()) -> np.ndarray:
    """Inter-channel level difference in the mel domain, time-major.

    ``log(H (|L|^2 + eps)) - log(H (|R|^2 + eps))``: the filterbank is applied
    to each regularised channel energy before taking the log ratio.
    """
    if left.values.shape != right.values.shape:
        raise ValidationError(f"channel shape mismatch {left.values.shape} vs {right.values.shape}")
    if fb.num_bins != left.num_bins:
        raise ValidationError(f"filterbank has {fb.num_bins} bins, spectrogram {left.num_bins}")
    num = fb.matrix @ (left.power() + p.epsilon)
    den = fb.matrix @ (right.power() + p.epsilon)
    return (np.log(num) - np.log(den)).T


@dataclass(frozen=True)
class NormStats:
    labels: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    def to_text(self) -> str:
        return "".join(f"{lab} {m!r} {s!r}\n" for lab, m, s in
                       zip(self.labels, self.mean.tolist(), self.std.tolist()))

    @classmethod
    def from_text(cls, text: str) -> "NormStats":
        labels, means, stds = [], [], []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValidationError(f"stats line {lineno}: expected 'label mean std'")
            try:
                means.append(float(parts[1]))
                stds.append(float(parts[2]))
            except ValueError:
                raise ValidationError(f"stats line {lineno}: non-numeric value") from None
            labels.append(parts[0])
        return cls(tuple(labels), np.array(means), np.array(stds))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "NormStats":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class FeatureStack:
    """Feature planes with shape (num_planes, num_frames, num_mels)."""

    planes: np.ndarray
    labels: tuple[str, ...]
    normalization_stats: NormStats | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.planes.ndim != 3 or self.planes.shape[0] != len(self.labels):
            raise ValidationError(
                f"planes shape {self.planes.shape} does not match labels {self.labels}"
            )

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.planes.shape


def build_features(stereo: np.ndarray, with_ild: bool = True, spec: StftSpec = StftSpec(),
                   fb: MelFilterbank | None = None, params: IldParams = IldParams(),
                   sample_rate: int | None = None) -> FeatureStack:
    """Raw (unnormalised) feature stack from a (2, num_samples) waveform.

    With ``with_ild`` the stack holds ``[logmel_L, logmel_R, ILD]``; without it
    only the two log-mel planes.
    """
    stereo = np.asarray(stereo, dtype=np.float64)
    if stereo.ndim != 2 or stereo.shape[0] != 2:
        raise ValidationError(f"expected 2 channels, got array of shape {stereo.shape}")
    if fb is None:
        fb = default_filterbank(spec)
    left = stft(stereo[0], spec, sample_rate, "L")
    right = stft(stereo[1], spec, sample_rate, "R")
    planes = [log_mel(left, fb), log_mel(right, fb)]
    labels = [LOGMEL_L, LOGMEL_R]
    if with_ild:
        planes.append(ild(left, right, fb, params))
        labels.append(ILD)
    return FeatureStack(np.stack(planes), tuple(labels))


_FB_CACHE: dict[tuple, MelFilterbank] = {}


def default_filterbank(spec: StftSpec = StftSpec(), num_mels: int = 64) -> MelFilterbank:
    key = (spec.sample_rate, spec.window_len, num_mels)
    if key not in _FB_CACHE:
        _FB_CACHE[key] = MelFilterbank.create(spec.sample_rate, spec.window_len, num_mels)
    return _FB_CACHE[key]


def fit_stats(stacks: Iterable[FeatureStack]) -> NormStats:
    """Per-plane mean and standard deviation pooled over a corpus."""
    stacks = list(stacks)
    if not stacks:
        raise ValidationError("cannot fit statistics on an empty corpus")
    labels = stacks[0].labels
    for st in stacks:
        if st.labels != labels:
            raise ValidationError(f"plane labels differ within corpus: {st.labels} vs {labels}")
    flat = [st.planes.reshape(len(labels), -1) for st in stacks]
    count = sum(f.shape[1] for f in flat)
    mean = sum(f.sum(axis=1) for f in flat) / count
    # second pass around the mean avoids cancellation in the variance
    sq = sum(((f - mean[:, None]) ** 2).sum(axis=1) for f in flat)
    std = np.sqrt(sq / count)
    bad = [lab for lab, s in zip(labels, std) if not s > 0]
    if bad:
        raise ValidationError(f"zero-variance plane(s) in fit: {', '.join(bad)}")
    return NormStats(tuple(labels), mean, std)


def normalize(stack: FeatureStack, stats: NormStats | str = "fit") -> FeatureStack:
    """Standardise each plane to zero mean and unit variance.

    ``stats="fit"`` fits on this stack alone; for corpus-level statistics call
    :func:`fit_stats` once and pass the result.
    """
    if isinstance(stats, str):
        if stats != "fit":
            raise ValidationError(f"unknown stats mode {stats!r}")
        stats = fit_stats([stack])
    if stats.labels != stack.labels:
        raise ValidationError(f"stats labels {stats.labels} do not match planes {stack.labels}")
    bad = [lab for lab, s in zip(stats.labels, stats.std) if not s > 0]
    if bad:
        raise ValidationError(f"non-positive std for plane(s): {', '.join(bad)}")
    out = (stack.planes - stats.mean[:, None, None]) / stats.std[:, None, None]
    return FeatureStack(out, stack.labels, stats)


def read_stereo_wav(path, expected_rate: int = 24000) -> np.ndarray:
    """Read a 2-channel PCM WAV as float64, shape (2, num_samples)."""
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise ValidationError(f"{path}: not a readable PCM WAV ({exc})") from None
    if rate != expected_rate:
        raise ValidationError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    if data.ndim != 2 or data.shape[1] != 2:
        channels = 1 if data.ndim == 1 else data.shape[1]
        raise ValidationError(f"{path}: expected 2 channels, got {channels}")
    if data.dtype == np.int16:
        scaled = data / 32768.0
    elif data.dtype == np.int32:
        scaled = data / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        scaled = data.astype(np.float64)
    else:
        raise ValidationError(f"{path}: unsupported sample format {data.dtype}")
    if scaled.shape[0] == 0:
        raise ValidationError(f"{path}: no samples")
    return np.ascontiguousarray(scaled.T)

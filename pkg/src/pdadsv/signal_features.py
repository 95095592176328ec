"""WAV decoding and the 32 acoustic features used for voice screening.

The feature vector is, in fixed order: 13 frame-averaged mel-frequency
cepstral coefficients, 13 frame-averaged delta coefficients, 5 band-limited
harmonics-to-noise ratios (low-pass cutoffs at 500/1500/2500/3500/3800 Hz)
and one glottal-to-noise excitation ratio.

All functions are pure: same bytes in, same vector out, no global state.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.fft import next_fast_len
from scipy.signal import fftconvolve, resample_poly

from .errors import (
    ClipTooShort,
    ClipTooShortForFrame,
    EmptyAudio,
    InvalidFrequencyRange,
    MalformedContainer,
    NonPowerOfTwoLength,
    SilentSignal,
    UnsupportedEncoding,
)

SILENCE_RMS = 1e-6

FEATURE_NAMES = (
    [f"mfcc{i}" for i in range(13)]
    + [f"delta{i}" for i in range(13)]
    + ["hnr05", "hnr15", "hnr25", "hnr35", "hnr38"]
    + ["gne"]
)


@dataclass(frozen=True)
class AudioClip:
    """Decoded mono PCM audio: float samples in [-1, 1] plus the header rate."""

    samples: np.ndarray
    sample_rate_hz: int
    source_channels: int = 1

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise MalformedContainer("sample rate must be positive")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.square(self.samples)))) if len(self.samples) else 0.0


@dataclass(frozen=True)
class DspConfig:
    """Knobs for the short-time analysis; defaults are tuned for 44.1 kHz
    sustained-vowel recordings and can be overridden per call site."""

    frame_len_samples: int = 2048
    hop_samples: int = 512
    n_mel_filters: int = 26
    fmin_hz: float = 0.0
    fmax_hz: float | None = None  # None -> sample_rate / 2
    n_cepstra: int = 13
    delta_window: int = 2
    log_floor: float = 1e-10
    hnr_band_cutoffs_hz: tuple = (500.0, 1500.0, 2500.0, 3500.0, 3800.0)
    hnr_pitch_range_hz: tuple = (70.0, 400.0)
    hnr_cap_db: float = 40.0
    min_duration_s: float = 5.0

    @property
    def n_fft(self) -> int:
        return self.frame_len_samples

    def __post_init__(self):
        if self.hop_samples < 1:
            raise ValueError("hop_samples must be >= 1")
        if self.n_cepstra != 13:
            raise ValueError("n_cepstra is fixed at 13")
        cutoffs = tuple(self.hnr_band_cutoffs_hz)
        if len(cutoffs) != 5 or any(b >= c for b, c in zip(cutoffs, cutoffs[1:])):
            raise ValueError("hnr_band_cutoffs_hz must be exactly 5 ascending values")


@dataclass(frozen=True)
class FeatureVector32:
    """Ordered 32-feature record; see FEATURE_NAMES for the column order."""

    mfcc_mean: np.ndarray   # 13
    delta_mean: np.ndarray  # 13
    hnr_db: np.ndarray      # 5
    gne: float

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.mfcc_mean, self.delta_mean, self.hnr_db, [self.gne]])

    @classmethod
    def from_array(cls, values) -> "FeatureVector32":
        v = np.asarray(values, dtype=float)
        if v.shape != (32,):
            raise ValueError(f"expected 32 features, got {v.shape}")
        return cls(mfcc_mean=v[0:13], delta_mean=v[13:26], hnr_db=v[26:31], gne=float(v[31]))


# --------------------------------------------------------------------------
# WAV decoding
# --------------------------------------------------------------------------

def decode_wav(data: bytes) -> AudioClip:
    """Decode a RIFF/WAVE container holding 16-bit linear PCM.

    Multi-channel files contribute channel 0 only. Raw int16 samples are
    scaled by 1/32768 so the output stays inside [-1, 1].
    """
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedContainer("not a RIFF/WAVE container")

    fmt = None
    raw = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise MalformedContainer("fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < size:
                raise MalformedContainer("data chunk truncated")
            raw = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise MalformedContainer("missing fmt chunk")
    audio_format, channels, sample_rate, _, _, bits = fmt
    if audio_format != 1:
        raise UnsupportedEncoding(f"audio format {audio_format} is not linear PCM")
    if bits != 16:
        raise UnsupportedEncoding(f"{bits}-bit samples unsupported, expected 16")
    if channels < 1:
        raise MalformedContainer("zero channels")
    if sample_rate <= 0:
        raise MalformedContainer("non-positive sample rate")
    if raw is None:
        raise MalformedContainer("missing data chunk")

    frame_bytes = 2 * channels
    n_frames = len(raw) // frame_bytes
    if n_frames == 0:
        raise EmptyAudio("no audio samples")
    ints = np.frombuffer(raw[:n_frames * frame_bytes], dtype="<i2")
    mono = ints.reshape(n_frames, channels)[:, 0]
    samples = mono.astype(np.float64) / 32768.0
    return AudioClip(samples=samples, sample_rate_hz=sample_rate, source_channels=channels)


def encode_wav(samples: np.ndarray, sample_rate_hz: int) -> bytes:
    """Inverse of decode_wav for test fixtures and tooling: mono PCM16."""
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 32767 / 32768)
    ints = np.round(clipped * 32768.0).astype("<i2")
    raw = ints.tobytes()
    hdr = b"RIFF" + struct.pack("<I", 36 + len(raw)) + b"WAVE"
    fmt = b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, sample_rate_hz,
                                sample_rate_hz * 2, 2, 16)
    return hdr + fmt + b"data" + struct.pack("<I", len(raw)) + raw


# --------------------------------------------------------------------------
# Short-time analysis
# --------------------------------------------------------------------------

def frame_signal(clip: AudioClip, cfg: DspConfig, window: str = "hamming") -> np.ndarray:
    """Slice the clip into overlapping frames (n_frames x frame_len).

    The trailing partial frame is discarded; each frame is multiplied by a
    Hamming window unless window="rectangular".
    """
    x = clip.samples
    flen, hop = cfg.frame_len_samples, cfg.hop_samples
    if len(x) < flen:
        raise ClipTooShortForFrame(f"clip has {len(x)} samples, frame needs {flen}")
    n_frames = (len(x) - flen) // hop + 1
    idx = np.arange(flen)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx]
    if window == "hamming":
        frames = frames * np.hamming(flen)
    elif window != "rectangular":
        raise ValueError(f"unknown window {window!r}")
    return frames


def power_spectrum(frame: np.ndarray) -> np.ndarray:
    """|X_k|^2 for k = 0..n/2 of a power-of-two length frame."""
    n = len(frame)
    if n < 2 or n & (n - 1):
        raise NonPowerOfTwoLength(f"frame length {n} is not a power of two")
    spec = np.fft.rfft(frame)
    return (spec.real ** 2 + spec.imag ** 2)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (np.power(10.0, np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_filter_centers_hz(cfg: DspConfig, sample_rate_hz: int) -> np.ndarray:
    """Center frequencies of the triangular filters, equally spaced in mel."""
    fmax = cfg.fmax_hz if cfg.fmax_hz is not None else sample_rate_hz / 2.0
    pts = np.linspace(hz_to_mel(cfg.fmin_hz), hz_to_mel(fmax), cfg.n_mel_filters + 2)
    return mel_to_hz(pts)[1:-1]


def mel_filterbank(cfg: DspConfig, sample_rate_hz: int) -> np.ndarray:
    """Triangular mel filterbank, n_mel_filters x (n_fft/2 + 1), unit peaks."""
    fmax = cfg.fmax_hz if cfg.fmax_hz is not None else sample_rate_hz / 2.0
    if not (0 <= cfg.fmin_hz < fmax <= sample_rate_hz / 2.0):
        raise InvalidFrequencyRange(
            f"need 0 <= fmin < fmax <= sr/2, got fmin={cfg.fmin_hz}, fmax={fmax}")
    n_fft = cfg.n_fft
    pts = np.linspace(hz_to_mel(cfg.fmin_hz), hz_to_mel(fmax), cfg.n_mel_filters + 2)
    bins = np.floor((n_fft + 1) * mel_to_hz(pts) / sample_rate_hz).astype(int)
    bins = np.clip(bins, 0, n_fft // 2)
    bank = np.zeros((cfg.n_mel_filters, n_fft // 2 + 1))
    for j in range(cfg.n_mel_filters):
        lo, mid, hi = bins[j], bins[j + 1], bins[j + 2]
        for i in range(lo, mid):
            bank[j, i] = (i - lo) / (mid - lo)
        for i in range(mid + 1, hi):
            bank[j, i] = (hi - i) / (hi - mid)
        bank[j, mid] = 1.0  # exact unit peak even if rounded bins collide
    return bank


def _dct_ortho_matrix(n_in: int, n_out: int) -> np.ndarray:
    # orthonormal DCT-II, rows are output coefficients
    n = np.arange(n_in)
    k = np.arange(n_out)[:, None]
    mat = np.cos(np.pi * k * (2 * n + 1) / (2.0 * n_in)) * np.sqrt(2.0 / n_in)
    mat[0] /= np.sqrt(2.0)
    return mat


def mfcc(clip: AudioClip, cfg: DspConfig) -> np.ndarray:
    """Cepstral coefficients c0..c12 per frame, shape (13, n_frames)."""
    frames = frame_signal(clip, cfg)
    spec = np.fft.rfft(frames, axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    bank = mel_filterbank(cfg, clip.sample_rate_hz)
    energies = power @ bank.T
    log_e = np.log(np.maximum(energies, cfg.log_floor))
    dct = _dct_ortho_matrix(cfg.n_mel_filters, cfg.n_cepstra)
    return dct @ log_e.T


def delta(coeffs: np.ndarray, window: int = 2) -> np.ndarray:
    """Regression slope of each coefficient row over +/- window frames.

    Edges are handled by replicating the first/last frame, so a single-frame
    input yields all zeros.
    """
    if coeffs.ndim != 2 or coeffs.shape[1] < 1:
        raise ValueError("coeffs must be a non-empty 2-D matrix")
    m = window
    t = coeffs.shape[1]
    padded = np.pad(coeffs, ((0, 0), (m, m)), mode="edge")
    num = np.zeros_like(coeffs)
    for i in range(1, m + 1):
        num += i * (padded[:, m + i:m + i + t] - padded[:, m - i:m - i + t])
    return num / (2.0 * sum(i * i for i in range(1, m + 1)))


# --------------------------------------------------------------------------
# Harmonics-to-noise ratio
# --------------------------------------------------------------------------

def _lowpass_fir(cutoff_hz: float, sample_rate_hz: int, numtaps: int = 401) -> np.ndarray:
    # Hamming-windowed sinc, odd length, normalized to unit DC gain
    n = np.arange(numtaps) - (numtaps - 1) / 2.0
    h = (2.0 * cutoff_hz / sample_rate_hz) * np.sinc(2.0 * cutoff_hz / sample_rate_hz * n)
    h *= np.hamming(numtaps)
    return h / h.sum()


def hnr_band(clip: AudioClip, band_fmax_hz: float, cfg: DspConfig) -> float:
    """Mean frame harmonicity (dB) of the clip low-passed to band_fmax_hz.

    Per frame the peak normalized autocorrelation r over the pitch lag range
    maps to 10*log10(r / (1 - r)), clamped to +/- hnr_cap_db; r <= 0 hits the
    negative cap. Filter transients are trimmed (valid-mode convolution) so an
    exactly periodic input stays exactly periodic.
    """
    sr = clip.sample_rate_hz
    if clip.rms() <= SILENCE_RMS:
        raise SilentSignal("clip RMS below silence threshold")
    if band_fmax_hz >= sr / 2.0:
        raise InvalidFrequencyRange(f"band cutoff {band_fmax_hz} >= Nyquist {sr / 2}")

    taps = _lowpass_fir(band_fmax_hz, sr)
    filtered = fftconvolve(clip.samples, taps, mode="valid")
    frames = frame_signal(AudioClip(filtered, sr), cfg, window="rectangular")
    frames = frames - frames.mean(axis=1, keepdims=True)

    flen = cfg.frame_len_samples
    pitch_lo, pitch_hi = cfg.hnr_pitch_range_hz
    lag_lo = int(np.ceil(sr / pitch_hi))
    lag_hi = min(int(np.floor(sr / pitch_lo)), flen - 1)
    if lag_hi <= lag_lo:
        raise InvalidFrequencyRange("pitch lag range empty for this frame length")

    # linear autocorrelation needs flen + lag_hi points to avoid wrap-around
    nfft = next_fast_len(flen + lag_hi + 1)
    spec = np.fft.rfft(frames, n=nfft, axis=1)
    ac = np.fft.irfft(spec.real ** 2 + spec.imag ** 2, n=nfft, axis=1)[:, :flen]

    # energy of the leading / trailing (flen - lag) samples, per lag
    energy = frames ** 2
    csum = np.cumsum(energy, axis=1)
    total = csum[:, -1:]
    lags = np.arange(lag_lo, lag_hi + 1)
    head = csum[:, flen - 1 - lags]            # sum of x[0 : flen-lag]
    tail = total - np.where(lags > 0, csum[:, lags - 1], 0.0)  # sum of x[lag:]
    denom = np.sqrt(np.maximum(head * tail, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 0.0, ac[:, lag_lo:lag_hi + 1] / denom, 0.0)
    r_best = r.max(axis=1)

    cap = cfg.hnr_cap_db
    hnr = np.full_like(r_best, -cap)
    mid = (r_best > 0.0) & (r_best < 1.0)
    hnr[mid] = np.clip(10.0 * np.log10(r_best[mid] / (1.0 - r_best[mid])), -cap, cap)
    hnr[r_best >= 1.0] = cap
    return float(hnr.mean())


# --------------------------------------------------------------------------
# Glottal-to-noise excitation ratio
# --------------------------------------------------------------------------

GNE_RATE_HZ = 10_000
GNE_LP_ORDER = 13
GNE_BAND_WIDTH_HZ = 1000.0
GNE_CENTERS_HZ = tuple(range(500, 5000, 500))
GNE_MIN_CENTER_DIST_HZ = 500.0


def levinson(autocorr: np.ndarray, order: int) -> np.ndarray:
    """Forward linear-prediction coefficients c[1..order] from autocorrelation
    lags r[0..order], so that x_hat[t] = sum_j c[j] * x[t - j]."""
    a = np.zeros(order + 1)
    a[0] = 1.0
    err = float(autocorr[0])
    for i in range(1, order + 1):
        if err <= 0.0:
            break
        acc = float(autocorr[i]) + float(np.dot(a[1:i], autocorr[i - 1:0:-1]))
        k = -acc / err
        a[1:i] = a[1:i] + k * a[i - 1:0:-1]
        a[i] = k
        err *= (1.0 - k * k)
    return -a[1:]


def gne(clip: AudioClip, cfg: DspConfig) -> float:
    """Maximum zero-lag correlation between analytic envelopes of band-passed
    linear-prediction excitation, computed at 10 kHz.

    Clean phonation excites all bands synchronously (value near 1); breathy or
    noise-dominated excitation decorrelates the envelopes.
    """
    if clip.rms() <= SILENCE_RMS:
        raise SilentSignal("clip RMS below silence threshold")
    if clip.duration_s < cfg.min_duration_s:
        raise ClipTooShort(
            f"clip is {clip.duration_s:.2f} s, need >= {cfg.min_duration_s} s")

    ratio = Fraction(GNE_RATE_HZ, clip.sample_rate_hz)
    x = resample_poly(clip.samples, ratio.numerator, ratio.denominator)

    # inverse filter with whole-signal LP coefficients
    n = len(x)
    autocorr = np.array([np.dot(x[:n - k], x[k:] if k else x) for k in range(GNE_LP_ORDER + 1)])
    coeffs = levinson(autocorr, GNE_LP_ORDER)
    excitation = np.convolve(x, np.concatenate(([1.0], -coeffs)))[:n]

    spec = np.fft.fft(excitation)
    freqs = np.fft.fftfreq(n, d=1.0 / GNE_RATE_HZ)
    half = GNE_BAND_WIDTH_HZ / 2.0
    envelopes = []
    for center in GNE_CENTERS_HZ:
        mask = (freqs > 0) & (freqs >= center - half) & (freqs <= center + half)
        analytic = np.zeros(n, dtype=complex)
        analytic[mask] = 2.0 * spec[mask]
        envelopes.append(np.abs(np.fft.ifft(analytic)))

    norms = [float(np.sqrt(np.dot(e, e))) for e in envelopes]
    best = 0.0
    for i in range(len(envelopes)):
        for j in range(i + 1, len(envelopes)):
            if GNE_CENTERS_HZ[j] - GNE_CENTERS_HZ[i] < GNE_MIN_CENTER_DIST_HZ:
                continue
            if norms[i] <= 0.0 or norms[j] <= 0.0:
                continue
            c = float(np.dot(envelopes[i], envelopes[j])) / (norms[i] * norms[j])
            if c > best:
                best = c
    if best <= 0.0:
        raise SilentSignal("no band carries excitation energy")
    return min(best, 1.0)


# --------------------------------------------------------------------------
# Full vector
# --------------------------------------------------------------------------

def extract_features(clip: AudioClip, cfg: DspConfig | None = None) -> FeatureVector32:
    """The 32-feature vector for one recording; deterministic per input."""
    cfg = cfg or DspConfig()
    if clip.duration_s < cfg.min_duration_s:
        raise ClipTooShort(
            f"clip is {clip.duration_s:.2f} s, need >= {cfg.min_duration_s} s")
    if clip.rms() <= SILENCE_RMS:
        raise SilentSignal("clip RMS below silence threshold")

    cepstra = mfcc(clip, cfg)
    deltas = delta(cepstra, cfg.delta_window)
    hnr = np.array([hnr_band(clip, cutoff, cfg) for cutoff in cfg.hnr_band_cutoffs_hz])
    ratio = gne(clip, cfg)
    vec = FeatureVector32(
        mfcc_mean=cepstra.mean(axis=1),
        delta_mean=deltas.mean(axis=1),
        hnr_db=hnr,
        gne=ratio,
    )
    if not np.all(np.isfinite(vec.to_array())):
        raise SilentSignal("non-finite feature produced; input degenerate")
    return vec

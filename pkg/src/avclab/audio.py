"""Audio frontend: raw clips to 96x64 log-mel patches.

The chain is fixed by the front-end conventions this model family uses:
16 kHz mono input, periodic Hann window of 400 samples, hop 160, FFT
length 512 (so 257 magnitude bins), then 64 triangular HTK-mel filters
between 125 and 7500 Hz applied to squared magnitudes, log with a 0.01
floor, and the first 96 frames kept.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import FormatError, InputTooShortError

TARGET_RATE = 16000
RECORD_RATE = 48000
WINDOW_SIZE = 400
HOP_LENGTH = 160
FFT_SIZE = 512
N_BINS = FFT_SIZE // 2 + 1
N_MELS = 64
MEL_LOW_HZ = 125.0
MEL_HIGH_HZ = 7500.0
LOG_OFFSET = 0.01
PATCH_FRAMES = 96

_FIR_TAPS = 63
_FIR_CUTOFF_HZ = 7200.0


@dataclass
class AudioClip:
    """PCM samples in [-1, 1]; mono (n,) or stereo (2, n)."""

    samples: np.ndarray
    sample_rate: int

    @property
    def channels(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[0]

    @property
    def duration(self) -> float:
        n = self.samples.shape[-1]
        return n / self.sample_rate


def read_wav(path) -> AudioClip:
    """Read 16-bit PCM WAV (mono/stereo, 16 kHz or 48 kHz)."""
    with wave.open(str(path), "rb") as wav:
        channels = wav.getnchannels()
        width = wav.getsampwidth()
        rate = wav.getframerate()
        frames = wav.readframes(wav.getnframes())
    if width != 2:
        raise FormatError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    if channels not in (1, 2):
        raise FormatError(f"{path}: expected mono or stereo, got {channels} channels")
    raw = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32768.0
    samples = raw if channels == 1 else raw.reshape(-1, 2).T.copy()
    return AudioClip(samples=samples, sample_rate=rate)


def write_wav(path, clip: AudioClip):
    data = np.clip(clip.samples, -1.0, 1.0)
    ints = np.round(data * 32767.0).astype("<i2")
    if ints.ndim == 2:
        ints = ints.T.reshape(-1)
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(clip.channels)
        wav.setsampwidth(2)
        wav.setframerate(clip.sample_rate)
        wav.writeframes(ints.tobytes())


@lru_cache(maxsize=1)
def _decimation_filter() -> np.ndarray:
    """Windowed-sinc low-pass, 63 taps, Hamming, 7.2 kHz cutoff at 48 kHz."""
    m = (_FIR_TAPS - 1) / 2.0
    n = np.arange(_FIR_TAPS)
    h = 2.0 * _FIR_CUTOFF_HZ / RECORD_RATE * np.sinc(
        2.0 * _FIR_CUTOFF_HZ / RECORD_RATE * (n - m))
    h *= np.hamming(_FIR_TAPS)
    return h / h.sum()


def downmix_resample(clip: AudioClip) -> AudioClip:
    """Average channels to mono and bring the rate to 16 kHz."""
    samples = clip.samples
    if samples.ndim == 2:
        samples = samples.mean(axis=0)
    samples = np.asarray(samples, dtype=np.float64)
    if clip.sample_rate == TARGET_RATE:
        return AudioClip(samples=samples, sample_rate=TARGET_RATE)
    if clip.sample_rate != RECORD_RATE:
        raise FormatError(f"unsupported sample rate {clip.sample_rate}; expected 16000 or 48000")
    filtered = np.convolve(samples, _decimation_filter(), mode="same")
    return AudioClip(samples=filtered[::3], sample_rate=TARGET_RATE)


def stft(clip: AudioClip) -> np.ndarray:
    """Magnitude spectrogram (frames, 257) of a mono 16 kHz clip."""
    if clip.channels != 1 or clip.sample_rate != TARGET_RATE:
        raise FormatError("stft expects a mono 16 kHz clip")
    x = np.asarray(clip.samples, dtype=np.float64)
    if x.shape[0] < WINDOW_SIZE:
        raise InputTooShortError(
            f"clip has {x.shape[0]} samples; at least {WINDOW_SIZE} required")
    window = hann_periodic(WINDOW_SIZE)
    frames = np.lib.stride_tricks.sliding_window_view(x, WINDOW_SIZE)[::HOP_LENGTH]
    spectrum = np.fft.rfft(frames * window, n=FFT_SIZE, axis=1)
    return np.abs(spectrum)


def hann_periodic(size: int) -> np.ndarray:
    n = np.arange(size)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / size)


def hz_to_mel(freq_hz) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + np.asarray(freq_hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel) -> np.ndarray:
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=1)
def mel_filterbank() -> np.ndarray:
    """(64, 257) triangular weights, unit peak, edges mel-spaced 125-7500 Hz."""
    bin_freqs = np.arange(N_BINS) * (TARGET_RATE / FFT_SIZE)
    bin_mels = hz_to_mel(bin_freqs)
    edges = np.linspace(hz_to_mel(MEL_LOW_HZ), hz_to_mel(MEL_HIGH_HZ), N_MELS + 2)
    bank = np.zeros((N_MELS, N_BINS))
    for i in range(N_MELS):
        left, center, right = edges[i], edges[i + 1], edges[i + 2]
        rising = (bin_mels - left) / (center - left)
        falling = (right - bin_mels) / (right - center)
        bank[i] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


def log_mel(spectrogram: np.ndarray) -> np.ndarray:
    """Squared magnitudes through the mel bank, log floor 0.01, first 96 frames."""
    spec = np.asarray(spectrogram, dtype=np.float64)
    if spec.ndim != 2 or spec.shape[1] != N_BINS:
        raise FormatError(f"expected (frames, {N_BINS}) spectrogram, got {spec.shape}")
    if spec.shape[0] < PATCH_FRAMES:
        raise InputTooShortError(
            f"{spec.shape[0]} frames < {PATCH_FRAMES} needed for a patch")
    energies = (spec * spec) @ mel_filterbank().T
    return np.log(energies[:PATCH_FRAMES] + LOG_OFFSET)


def pipeline(clip: AudioClip) -> np.ndarray:
    """Full chain: arbitrary supported clip -> (96, 64) log-mel patch."""
    return log_mel(stft(downmix_resample(clip)))

"""Waveform -> MFCC feature matrix for the auditory stream.

Pipeline: overlapping Hann-windowed frames -> power spectrum (rfft) ->
triangular mel filterbank -> log -> orthonormal DCT-II, keeping the first
n_mfcc coefficients per frame.

Pre-emphasis and cepstral liftering are available but default to off.
"""
from __future__ import annotations

import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.fft import dct

from .errors import FormatError, InputError, ParameterError


@dataclass
class Waveform:
    """Mono audio: float samples in [-1, 1] at a fixed sample rate."""
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise InputError(f"waveform must be 1-D, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ParameterError(f"sample_rate must be > 0, got {self.sample_rate}")

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples ** 2)))


@dataclass
class MfccParams:
    frame_len: int = 512
    hop: int = 256
    n_mels: int = 26
    n_mfcc: int = 13
    f_min: float = 0.0
    f_max: float = 8000.0
    preemphasis: float = 0.0     # 0 disables the high-pass difference filter
    lifter: int = 0              # 0 disables sinusoidal liftering


@dataclass
class MfccMatrix:
    coeffs: np.ndarray           # [n_frames, n_mfcc]
    frame_hop: int
    n_mfcc: int

    @property
    def n_frames(self) -> int:
        return self.coeffs.shape[0]


def n_frames_for(n_samples: int, frame_len: int, hop: int) -> int:
    return 1 + (n_samples - frame_len) // hop


def hann_window(length: int) -> np.ndarray:
    """h[n] = 0.5 * (1 - cos(2 pi n / (L-1))), the symmetric Hann window."""
    if length == 1:
        return np.ones(1)
    n = np.arange(length)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / (length - 1)))


def frame_and_window(w: Waveform, frame_len: int, hop: int) -> np.ndarray:
    """Slice the waveform into overlapping frames and apply a Hann window.

    Returns [n_frames, frame_len] with n_frames = 1 + floor((N - frame_len) / hop).
    """
    if hop < 1:
        raise ParameterError(f"hop must be >= 1, got {hop}")
    n = w.samples.size
    if frame_len > n:
        raise InputError(f"waveform has {n} samples, shorter than one frame ({frame_len})")
    count = n_frames_for(n, frame_len, hop)
    idx = np.arange(frame_len)[None, :] + hop * np.arange(count)[:, None]
    return w.samples[idx] * hann_window(frame_len)[None, :]


def power_spectrum(frames: np.ndarray) -> np.ndarray:
    """|DFT|^2 of each frame over the non-negative frequency bins.

    The frame length must be a power of two (radix-2 FFT path).
    """
    frames = np.asarray(frames, dtype=np.float64)
    length = frames.shape[-1]
    if length < 2 or (length & (length - 1)) != 0:
        raise ParameterError(f"frame length must be a power of two, got {length}")
    spec = np.fft.rfft(frames, axis=-1)
    return (spec.real ** 2 + spec.imag ** 2)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank_matrix(n_mels: int, n_fft: int, sample_rate: int,
                          f_min: float, f_max: float) -> np.ndarray:
    """Triangular filters spaced uniformly on the mel scale, [n_mels, n_fft/2+1].

    Filter k rises over FFT bins [bin_k, bin_{k+1}] and falls over
    [bin_{k+1}, bin_{k+2}]; its weight is exactly 1 at its center bin and
    adjacent filters overlap by half a triangle.
    """
    if n_mels < 2:
        raise ParameterError(f"n_mels must be >= 2, got {n_mels}")
    if not (0 <= f_min < f_max <= sample_rate / 2):
        raise ParameterError(
            f"need 0 <= f_min < f_max <= sample_rate/2, got ({f_min}, {f_max}) at {sample_rate} Hz")
    pts = np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2)
    bins = np.floor((n_fft + 1) * mel_to_hz(pts) / sample_rate).astype(int)
    bins = np.clip(bins, 0, n_fft // 2)
    fb = np.zeros((n_mels, n_fft // 2 + 1))
    for k in range(n_mels):
        left, center, right = bins[k], bins[k + 1], bins[k + 2]
        for i in range(left, center):
            fb[k, i] = (i - left) / max(center - left, 1)
        for i in range(center, right):
            fb[k, i] = (right - i) / max(right - center, 1)
        fb[k, center] = 1.0
    return fb


def mel_filterbank(spectrum: np.ndarray, n_mels: int, f_min: float, f_max: float,
                   sample_rate: int) -> np.ndarray:
    """Apply the triangular filter matrix to a power spectrum [n_frames, bins]."""
    spectrum = np.atleast_2d(np.asarray(spectrum, dtype=np.float64))
    n_fft = (spectrum.shape[-1] - 1) * 2
    fb = mel_filterbank_matrix(n_mels, n_fft, sample_rate, f_min, f_max)
    return spectrum @ fb.T


LOG_FLOOR = 1e-10


def mfcc(w: Waveform, params: MfccParams | None = None) -> MfccMatrix:
    """Full MFCC pipeline; see the module docstring for the stages."""
    p = params or MfccParams()
    samples = w.samples
    if p.preemphasis > 0:
        samples = np.concatenate([samples[:1], samples[1:] - p.preemphasis * samples[:-1]])
        w = Waveform(samples, w.sample_rate)
    frames = frame_and_window(w, p.frame_len, p.hop)
    spec = power_spectrum(frames)
    energies = mel_filterbank(spec, p.n_mels, p.f_min, p.f_max, w.sample_rate)
    logs = np.log(energies + LOG_FLOOR)
    coeffs = dct(logs, type=2, axis=-1, norm="ortho")[:, :p.n_mfcc]
    if p.lifter > 0:
        n = np.arange(coeffs.shape[1])
        coeffs = coeffs * (1.0 + (p.lifter / 2.0) * np.sin(np.pi * n / p.lifter))
    return MfccMatrix(coeffs=coeffs, frame_hop=p.hop, n_mfcc=p.n_mfcc)


# ---------------------------------------------------------------------------
# WAV I/O (RIFF, PCM16, mono)

def read_wav(path: str | Path) -> Waveform:
    """Read a mono PCM16 WAV file; samples are mapped to [-1, 1] by /32768."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as f:
            if f.getnchannels() != 1:
                raise FormatError(f"{path}: expected mono audio, got {f.getnchannels()} channels")
            if f.getsampwidth() != 2:
                raise FormatError(f"{path}: expected 16-bit PCM, got {8 * f.getsampwidth()}-bit")
            if f.getcomptype() != "NONE":
                raise FormatError(f"{path}: compressed WAV ({f.getcomptype()}) is not supported")
            raw = f.readframes(f.getnframes())
            rate = f.getframerate()
    except wave.Error as e:
        raise FormatError(f"{path}: not a valid RIFF/WAV file ({e})") from None
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples, rate)


def write_wav(w: Waveform, path: str | Path):
    ints = np.clip(np.rint(w.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(w.sample_rate)
        f.writeframes(ints.tobytes())

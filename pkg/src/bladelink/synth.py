"""Synthetic stand-ins for field recordings, used by tests and demos."""

from __future__ import annotations

import numpy as np

from .core import AUDIO_RATE_HZ, PRESSURE_RATE_HZ, sample_limits


def pressure_channels(rng: np.random.Generator, channels: int = 40, samples: int = 512, bit_depth: int = 24,
                      rate: float = PRESSURE_RATE_HZ, rot_hz: float = 0.67, noise: float = 20.0) -> np.ndarray:
    """Blade-like pressure: slow drift, a rotor-rate tone, shared turbulence and sensor noise."""
    lo, hi = sample_limits(bit_depth)
    t = np.arange(samples) / rate
    scale = hi / 8
    base = rng.uniform(-0.3, 0.3, size=(channels, 1)) * hi
    # chordwise profile: neighbouring taps see similar loading
    profile = np.cos(np.linspace(0, np.pi, channels))[:, None]
    drift = np.cumsum(rng.normal(0, scale * 1e-3, size=samples))
    rotor = scale * 0.05 * np.sin(2 * np.pi * rot_hz * t + rng.uniform(0, 2 * np.pi))
    turb = np.convolve(rng.normal(0, scale * 2e-3, size=samples), np.ones(5) / 5, mode="same")
    x = base + profile * (drift + rotor + turb) + rng.normal(0, noise, size=(channels, samples))
    return np.clip(np.rint(x), lo, hi).astype(np.int64)


def pink_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    spec = rng.normal(size=n // 2 + 1) + 1j * rng.normal(size=n // 2 + 1)
    f = np.arange(n // 2 + 1, dtype=np.float64)
    f[0] = 1.0
    x = np.fft.irfft(spec / np.sqrt(f), n)
    return x / (np.abs(x).max() or 1.0)


def audio_channels(rng: np.random.Generator, channels: int = 10, samples: int = 1024, bit_depth: int = 24,
                   rate: float = AUDIO_RATE_HZ, tones: int = 6, level: float = 0.3) -> np.ndarray:
    """Multi-tone plus pink-noise microphone signals with a low-frequency wind rumble."""
    lo, hi = sample_limits(bit_depth)
    t = np.arange(samples) / rate
    out = np.empty((channels, samples), dtype=np.int64)
    for c in range(channels):
        freqs = rng.uniform(150, rate / 2 * 0.8, size=tones)
        amps = rng.uniform(0.1, 1.0, size=tones) / tones
        x = (amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + rng.uniform(0, 2 * np.pi, (tones, 1)))).sum(0)
        x += 0.3 * pink_noise(rng, samples) + 0.3 * np.sin(2 * np.pi * rng.uniform(5, 60) * t)
        x = x / np.abs(x).max() * level * hi
        out[c] = np.clip(np.rint(x), lo, hi)
    return out


def sine(samples: int, freq: float, rate: float, amplitude: float, phase: float = 0.0) -> np.ndarray:
    t = np.arange(samples) / rate
    return np.rint(amplitude * np.sin(2 * np.pi * freq * t + phase)).astype(np.int64)

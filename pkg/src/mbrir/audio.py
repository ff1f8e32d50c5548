"""Audio file I/O and sample-rate conversion."""
from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np
import soundfile as sf
from scipy import signal
from scipy.io import wavfile

from .settings import SAMPLE_RATE


def read_audio(path, target_rate: int | None = None) -> tuple[np.ndarray, int]:
    """First channel of ``path`` as float64, optionally resampled."""
    data, rate = sf.read(str(path), dtype="float64", always_2d=True)
    x = data[:, 0]
    if target_rate is not None and rate != target_rate:
        x = resample(x, rate, target_rate)
        rate = target_rate
    return x, int(rate)


def write_audio(path, samples, rate: int = SAMPLE_RATE) -> None:
    """Write a mono 32-bit float WAV.

    scipy's writer is used because libsndfile stamps float WAVs with the
    write time, which would make identical renders differ byte for byte.
    """
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(str(path), int(rate), np.asarray(samples, dtype=np.float32))


def resample(x: np.ndarray, rate_in: int, rate_out: int = SAMPLE_RATE) -> np.ndarray:
    """Polyphase resampling with scipy's default Kaiser (beta=5) FIR design."""
    if rate_in == rate_out:
        return np.asarray(x, dtype=float)
    ratio = Fraction(int(rate_out), int(rate_in))
    return signal.resample_poly(np.asarray(x, dtype=float), ratio.numerator, ratio.denominator)

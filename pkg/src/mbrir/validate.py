"""Acoustic checks applied to rendered or measured impulse responses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDecay, SilentInput
from .filterbank import FilterBank
from .ism import Rir
from .rooms import BandSpec


@dataclass(frozen=True)
class DecayFit:
    t60_s: float
    slope_db_per_s: float
    fit_range_db: tuple
    decay_range_db: float
    extrapolated: bool


def energy_decay_curve(x: np.ndarray) -> np.ndarray:
    """Schroeder backward integral in dB relative to total energy."""
    e = np.cumsum(np.asarray(x, dtype=float)[::-1] ** 2)[::-1]
    if e[0] <= 0:
        raise SilentInput("cannot integrate a silent buffer")
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(e / e[0])


def decay_fit(rir: Rir | np.ndarray, band: int | None = None, fit_range_db=(-5.0, -25.0),
              sample_rate_hz: int | None = None, bank: FilterBank | None = None) -> DecayFit:
    """Line fit to the energy decay curve between the two ``fit_range_db`` levels."""
    x, fs = _unpack(rir, sample_rate_hz)
    if band is not None:
        bank = bank or FilterBank(BandSpec(sample_rate_hz=fs))
        x = bank.filter_band(x, band)
    edc = energy_decay_curve(x)
    hi, lo = max(fit_range_db), min(fit_range_db)
    # the backward integral always falls to -inf at the very end of the
    # buffer; ignore the last 5% so a truncated non-decaying signal is caught
    usable = edc[: max(1, len(edc) - len(edc) // 20)]
    decay_range = float(-usable.min())
    if usable.min() > lo:
        raise InsufficientDecay(f"decay curve only reaches {usable.min():.1f} dB, need {lo} dB")
    start = int(np.argmax(usable <= hi))
    stop = int(np.argmax(usable <= lo))
    if stop - start < 2:
        raise InsufficientDecay("fit range covers fewer than two samples")
    t = np.arange(start, stop + 1) / fs
    slope, _ = np.polyfit(t, edc[start:stop + 1], 1)
    if slope >= 0:
        raise InsufficientDecay("energy decay curve is not decreasing")
    return DecayFit(
        t60_s=float(-60.0 / slope),
        slope_db_per_s=float(slope),
        fit_range_db=(hi, lo),
        decay_range_db=decay_range,
        extrapolated=(hi - lo) < 20.0 or decay_range < 20.0,
    )


def schroeder_t60(rir: Rir | np.ndarray, band: int | None = None, fit_range_db=(-5.0, -25.0),
                  sample_rate_hz: int | None = None, bank: FilterBank | None = None) -> float:
    """Reverberation time from backward integration, extrapolated to 60 dB.

    Parameters
    ----------
    rir : Rir or ndarray
        Impulse response. A bare array needs ``sample_rate_hz``.
    band : int, optional
        0-based filterbank branch to analyse instead of the broadband signal.
    fit_range_db : pair
        Upper and lower decay levels bounding the line fit.
    """
    return decay_fit(rir, band, fit_range_db, sample_rate_hz, bank).t60_s


def detect_onset(rir: Rir | np.ndarray, threshold_db: float = -6.0, window_ms: float = 10.0,
                 sample_rate_hz: int | None = None) -> int:
    """Index of the earliest sample near the peak that reaches ``threshold_db``.

    Looks back at most ``window_ms`` from the absolute maximum for a sample at
    or above ``max * 10**(threshold_db / 20)``; returns the peak index when
    there is none.
    """
    x, fs = _unpack(rir, sample_rate_hz)
    mag = np.abs(x)
    peak = int(np.argmax(mag))
    if mag[peak] == 0:
        raise SilentInput("all-zero buffer has no onset")
    level = mag[peak] * 10.0 ** (threshold_db / 20.0)
    lo = max(0, peak - int(round(window_ms * 1e-3 * fs)))
    above = np.nonzero(mag[lo:peak] >= level)[0]
    return int(lo + above[0]) if len(above) else peak


def _unpack(rir, sample_rate_hz):
    if isinstance(rir, Rir):
        return rir.samples, rir.sample_rate_hz
    if sample_rate_hz is None:
        sample_rate_hz = 48000
    return np.asarray(rir, dtype=float), int(sample_rate_hz)

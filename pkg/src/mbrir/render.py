"""Single-band and multiband RIR rendering for all four dataset variants.

Multiband renders enumerate the image sources once (for the longest band
T60) and recompute only the amplitudes per band, then send each band through
its filterbank branch and sum. The receiver and source directivity paths hook
into that per-band loop before the filterbank.

Every render ends with a zero-phase DC-blocking highpass. Without it, the
all-positive image taps add up coherently at very low frequencies and the
broadband decay is dominated by a slowly decaying DC offset.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .directivity import (DirectivityTable, ReceiverFilterSet, default_source_table,
                          receiver_render, synthetic_sphere_set)
from .filterbank import FilterBank
from .ism import (D_MIN, DEFAULT_BUDGET, ReflectionList, Rir, emission_directions,
                  enumerate_images, max_distance_for, max_order_for, receiver_frame,
                  rir_length, source_frame, to_frame, deposit)
from .rooms import AbsorptionClampWarning, BandSpec, RoomConfig, Variant, sabine_absorption
from .settings import DEFAULT_SETTINGS, Settings

DC_BLOCK_HZ = 20.0
DC_BLOCK_ORDER = 2


@dataclass(frozen=True)
class RenderOptions:
    interp: str = "sinc"
    dc_block_hz: float | None = DC_BLOCK_HZ
    budget: int = DEFAULT_BUDGET
    d_min: float = D_MIN
    settings: Settings = DEFAULT_SETTINGS

    def digest_fields(self) -> dict:
        return {
            "interp": self.interp,
            "sinc_taps": 81,
            "sinc_normalisation": "unit-energy",
            "dc_block_hz": self.dc_block_hz,
            "dc_block_order": DC_BLOCK_ORDER,
            "amplitude_convention": "1/d",
            "d_min": self.d_min,
            "reflection_sign": "positive",
            "filterbank": "butter4-per-edge-filtfilt-geometric-crossovers",
            "budget": self.budget,
            "settings": self.settings.as_dict(),
        }


def dc_block(x: np.ndarray, sample_rate_hz: int, cutoff_hz: float | None = DC_BLOCK_HZ) -> np.ndarray:
    if cutoff_hz is None:
        return x
    sos = signal.butter(DC_BLOCK_ORDER, cutoff_hz, "highpass", fs=sample_rate_hz, output="sos")
    pad = int(4 * sample_rate_hz / cutoff_hz)
    padded = np.concatenate([np.zeros(pad), x, np.zeros(pad)])
    return signal.sosfiltfilt(sos, padded, padtype=None)[pad:pad + len(x)]


def _absorption(dims, t60, settings, notes):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", AbsorptionClampWarning)
        a = sabine_absorption(dims, t60, settings.sabine_constant)
    if caught:
        notes.append(f"absorption_clamped_t60={t60:.4f}")
    return a


def _geometry(config: RoomConfig, t60_max: float, opts: RenderOptions):
    fs = opts.settings.sample_rate_hz
    c = opts.settings.speed_of_sound
    length = rir_length(config, t60_max, fs, c)
    refl = enumerate_images(config, 0.5, max_order_for(config, t60_max, c),
                            c=c, d_min=opts.d_min,
                            max_distance=max_distance_for(length, fs, c),
                            budget=opts.budget)
    return refl, length


def render_sb(config: RoomConfig, opts: RenderOptions = RenderOptions()) -> Rir:
    """One ISM render with the Sabine absorption of the scalar T60."""
    notes: list = []
    t60 = config.t60_scalar_s
    refl, length = _geometry(config, t60, opts)
    alpha = _absorption(config.dims_m, t60, opts.settings, notes)
    fs = opts.settings.sample_rate_hz
    x = deposit(refl.delay * fs, refl.amplitudes_for(alpha), length, opts.interp)
    x = dc_block(x, fs, opts.dc_block_hz)
    return Rir(fs, x, Variant.SB, config.id,
               meta={"warnings": notes, "n_images": len(refl), "absorption": [alpha]})


def band_reflections(config: RoomConfig, opts: RenderOptions = RenderOptions()):
    """Shared reflection list, per-band amplitudes ``(6, N)`` and buffer length."""
    notes: list = []
    t60 = np.asarray(config.t60_bands_s, dtype=float)
    refl, length = _geometry(config, float(t60.max()), opts)
    alphas = [_absorption(config.dims_m, t, opts.settings, notes) for t in t60]
    amps = np.stack([refl.amplitudes_for(a) for a in alphas])
    return refl, amps, length, alphas, notes


def render_mb(config: RoomConfig, opts: RenderOptions = RenderOptions(),
              bank: FilterBank | None = None,
              src_table: DirectivityTable | None = None,
              rec_filters: ReceiverFilterSet | None = None) -> Rir:
    """Multiband render, optionally with source and/or receiver directivity.

    Per band: amplitudes from the band's Sabine absorption, times the source
    table gain at each emission direction (if ``src_table``), deposited
    directly or through the receiver filters (if ``rec_filters``). The six
    band buffers then go through the filterbank and are summed in band order.
    """
    fs = opts.settings.sample_rate_hz
    bank = bank or FilterBank(BandSpec.from_settings(opts.settings))
    refl, amps, length, alphas, notes = band_reflections(config, opts)

    if src_table is not None:
        refl = emission_directions(config, refl)
        local = to_frame(refl.emission_dir, *source_frame(config))
        if src_table.per_band:
            gains = np.stack([src_table.lookup(local, b) for b in range(bank.n_bands)])
        else:
            gains = src_table.lookup(local)[None, :]
        amps = amps * gains

    delays = refl.delay * fs
    if rec_filters is not None:
        if rec_filters.sample_rate_hz != fs:
            raise ValueError("receiver filters must match the render sample rate")
        local = to_frame(refl.arrival_dir, *receiver_frame(config))
        bands = receiver_render(delays, amps, local, rec_filters, length, opts.interp)
    else:
        bands = deposit(delays, amps, length, opts.interp)

    x = np.zeros(bands.shape[1])
    for n in range(bank.n_bands):
        x += bank.filter_band(bands[n], n)
    x = dc_block(x, fs, opts.dc_block_hz)
    meta = {"warnings": notes, "n_images": len(refl), "absorption": [float(a) for a in alphas],
            "src_table": getattr(src_table, "label", None),
            "src_table_per_band": bool(src_table is not None and src_table.per_band),
            "rec_filters": getattr(rec_filters, "label", None)}
    return Rir(fs, x, config.variant, config.id, meta=meta)


def render(config: RoomConfig, variant=None, opts: RenderOptions = RenderOptions(),
           src_table: DirectivityTable | None = None,
           rec_filters: ReceiverFilterSet | None = None,
           bank: FilterBank | None = None) -> Rir:
    """Render ``config`` as ``variant`` (defaults to ``config.variant``).

    REC variants fall back to the synthetic-sphere receiver set and SRC to the
    bundled placeholder source table when none is given.
    """
    variant = Variant.parse(variant or config.variant)
    if variant is not config.variant:
        config = config.with_variant(variant)
    if variant is Variant.SB:
        return render_sb(config, opts)
    if variant is Variant.MB:
        return render_mb(config, opts, bank)
    rec = rec_filters or synthetic_sphere_set(sample_rate_hz=opts.settings.sample_rate_hz)
    if variant is Variant.REC_MB:
        return render_mb(config, opts, bank, rec_filters=rec)
    src = src_table or default_source_table()
    return render_mb(config, opts, bank, src_table=src, rec_filters=rec)

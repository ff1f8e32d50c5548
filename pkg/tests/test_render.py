import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import signal

from mbrir.directivity import DirectivityTable, ReceiverFilterSet
from mbrir.ism import Rir
from mbrir.render import RenderOptions, band_reflections, dc_block, render, render_mb, render_sb
from mbrir.rooms import Variant, sample_room
from mbrir.validate import energy_decay_curve

from conftest import make_config

FS = 48000


@pytest.fixture(scope="module")
def mb_config():
    return make_config(dims=(7.0, 5.5, 3.0), src=(3.0, 2.5, 1.4), rec=(4.6, 3.1, 1.6),
                       bands=(0.6, 0.5, 0.45, 0.4, 0.35, 0.3), yaw=20.0, pitch=-5.0)


def third_octave_levels(x, lo=63.0, hi=16000.0):
    f, p = signal.periodogram(x, FS, nfft=1 << 20)
    centers = lo * 2 ** (np.arange(0, 3 * np.log2(hi / lo) + 1) / 3)
    out = []
    for fc in centers:
        sel = (f >= fc * 2 ** (-1 / 6)) & (f < fc * 2 ** (1 / 6))
        out.append(10 * np.log10(p[sel].sum()))
    return np.array(out)


def test_sb_render_basics(mb_config):
    rir = render_sb(mb_config.with_variant("SB"))
    assert isinstance(rir, Rir) and rir.variant is Variant.SB
    assert len(rir) >= int(np.ceil(mb_config.t60_scalar_s * FS))
    assert np.all(np.isfinite(rir.samples))


def test_bands_share_geometry(mb_config):
    refl, amps, length, alphas, _ = band_reflections(mb_config)
    assert amps.shape == (6, len(refl))
    assert len(set(alphas)) == 6
    for b, a in enumerate(alphas):
        np.testing.assert_array_equal(amps[b], refl.amplitudes_for(a))


def test_length_sized_for_longest_band(mb_config):
    rir = render_mb(mb_config)
    assert len(rir) >= int(np.ceil(max(mb_config.t60_bands_s) * FS))


def test_constant_bands_reduce_to_single_band():
    cfg = make_config(dims=(7.0, 5.5, 3.0), src=(3.0, 2.5, 1.4), rec=(4.6, 3.1, 1.6), t60=0.45)
    mb = render_mb(cfg).samples
    sb = render_sb(cfg.with_variant("SB")).samples
    assert len(mb) == len(sb)
    diff = third_octave_levels(mb) - third_octave_levels(sb)
    assert np.max(np.abs(diff)) <= 1.0


def test_identity_directivity_is_byte_identical_to_mb(mb_config):
    mb = render(mb_config, "MB").samples
    ident = render(mb_config, "SRC_REC_MB", src_table=DirectivityTable.omni(),
                   rec_filters=ReceiverFilterSet.identity()).samples
    assert ident.tobytes() == mb.tobytes()
    rec_only = render(mb_config, "REC_MB", rec_filters=ReceiverFilterSet.identity()).samples
    assert rec_only.tobytes() == mb.tobytes()


def test_directivity_variants_differ_from_mb(mb_config):
    mb = render(mb_config, "MB").samples
    rec = render(mb_config, "REC_MB").samples
    src = render(mb_config, "SRC_REC_MB")
    assert len(rec) == len(mb) + 127
    assert not np.allclose(rec[:len(mb)], mb)
    assert src.meta["src_table"] == "cardioid^0.5 placeholder"
    assert src.meta["src_table_per_band"] is False


def test_per_band_source_table_is_used(mb_config):
    az = np.arange(-180.0, 180.0, 10.0)
    el = np.arange(-90.0, 91.0, 10.0)
    band = np.ones((len(az), len(el), 6))
    band[..., 5] = 0.0
    table = DirectivityTable(az, el, np.ones((len(az), len(el))), band)
    ident = ReceiverFilterSet.identity()
    out = render(mb_config, "SRC_REC_MB", src_table=table, rec_filters=ident)
    assert out.meta["src_table_per_band"] is True
    mb = render(mb_config, "MB").samples
    assert not np.allclose(out.samples, mb)


def test_render_is_deterministic(mb_config):
    a = render(mb_config, "SRC_REC_MB").samples
    b = render(mb_config, "SRC_REC_MB").samples
    assert a.tobytes() == b.tobytes()


def test_dc_block_removes_offset():
    x = np.ones(48000)
    assert abs(dc_block(x, FS)[20000:28000]).max() < 1e-3
    assert dc_block(x, FS, None) is x


def test_render_options_change_digest_fields():
    assert RenderOptions().digest_fields() != RenderOptions(interp="nearest").digest_fields()


@settings(max_examples=8)
@given(st.integers(0, 2**32))
def test_swapped_endpoints_render_identically(seed):
    cfg = sample_room(seed, "SB")
    cfg = dataclasses.replace(cfg, t60_bands_s=(0.3,) * 6, t60_scalar_s=0.3)
    a = render_sb(cfg).samples
    b = render_sb(cfg.swapped()).samples
    assert np.max(np.abs(a - b)) <= 1e-9


def _mid_size_room(start):
    for s in range(start, start + 10_000):
        cfg = sample_room(s, "SB")
        if 5 <= cfg.dims_m[0] <= 20 and 0.2 <= cfg.t60_scalar_s <= 1.0:
            return cfg
    raise AssertionError("no mid-size room found")


@pytest.mark.parametrize("start", [0, 1000, 2000, 3000, 4000, 5000])
def test_sb_decay_curve_monotone_and_reaches_minus_sixty(start):
    cfg = _mid_size_room(start)
    rir = render_sb(cfg)
    edc = energy_decay_curve(rir.samples)
    assert np.all(np.diff(edc) <= 1e-9)
    # time from the direct sound to the -60 dB crossing
    t = (np.argmax(edc <= -60.0) - rir.peak_index) / FS
    assert 0.7 * cfg.t60_scalar_s <= t <= 1.3 * cfg.t60_scalar_s

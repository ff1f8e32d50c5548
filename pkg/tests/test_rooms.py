import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from mbrir.errors import DegenerateData, PlacementFailure
from mbrir.rooms import (AbsorptionClampWarning, BandSpec, GammaParams, RoomConfig, Variant,
                         fit_gamma, gamma_nll, sabine_absorption, sample_room, sample_t60_bands)
from mbrir.settings import DEFAULT_SETTINGS, Settings

FITTED_SHAPE = (1.72, 1.62, 1.93, 2.56, 4.17, 2.49)
FITTED_SCALE = (0.39, 0.24, 0.14, 0.10, 0.09, 0.18)


# ---- band spec and Gamma parameters ---------------------------------------

def test_band_spec_defaults_and_crossovers():
    spec = BandSpec()
    assert spec.centers_hz == (125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0)
    assert spec.sample_rate_hz == 48000
    assert spec.crossovers_hz[1] == pytest.approx(353.5534, abs=1e-4)
    assert spec.crossovers_hz[2] == pytest.approx(707.1068, abs=1e-4)
    for n, fc in enumerate(spec.crossovers_hz):
        assert fc == pytest.approx(math.sqrt(spec.centers_hz[n] * spec.centers_hz[n + 1]))


@pytest.mark.parametrize("centers,rate", [((250.0, 125.0), 48000), ((1000.0, 1e6), 48000)])
def test_band_spec_rejects_bad_layouts(centers, rate):
    with pytest.raises(ValueError):
        BandSpec(centers, rate)


def test_gamma_params_default_to_fitted_values():
    g = GammaParams()
    assert g.shape_alpha == FITTED_SHAPE
    assert g.scale_beta == FITTED_SCALE
    with pytest.raises(ValueError):
        GammaParams((1.0,) * 5 + (-1.0,), FITTED_SCALE)


# ---- T60 draws ------------------------------------------------------------

def test_sample_t60_bands_is_deterministic():
    a = sample_t60_bands(GammaParams(), 1234)
    b = sample_t60_bands(GammaParams(), 1234)
    assert np.array_equal(a, b)
    assert a.shape == (6,)


def test_band_one_long_run_mean():
    draws = np.array([sample_t60_bands(GammaParams(), s)[0] for s in range(20000)])
    # E[Gamma] = shape * scale = 0.6708 s; clipping to the window moves it negligibly
    assert draws.mean() == pytest.approx(1.72 * 0.39, rel=0.03)


def test_all_band_mean_matches_scalar_model():
    expected = sum(a * b for a, b in zip(FITTED_SHAPE, FITTED_SCALE)) / 6
    assert expected == pytest.approx(0.4016, abs=1e-4)
    draws = np.array([sample_t60_bands(GammaParams(), s) for s in range(10000)])
    assert draws.mean() == pytest.approx(expected, abs=0.01)


def test_t60_clamp_window_is_respected():
    draws = np.array([sample_t60_bands(GammaParams(), s) for s in range(5000)])
    assert draws.min() >= 0.05 and draws.max() <= 3.0


def test_out_of_window_draws_are_clipped_and_flagged():
    # a distribution that essentially never lands inside the window
    params = GammaParams((50.0,) * 6, (1.0,) * 6)
    t = sample_t60_bands(params, 3)
    assert np.all(t == 3.0)
    cfg = sample_room(3, settings=Settings(gamma_shape=(50.0,) * 6, gamma_scale=(1.0,) * 6))
    assert cfg.warnings == tuple(f"t60_band_{n}_clipped" for n in range(6))


def test_every_band_mean_within_three_percent():
    draws = np.array([sample_t60_bands(GammaParams(), s) for s in range(20000)])
    np.testing.assert_allclose(draws.mean(axis=0), np.multiply(FITTED_SHAPE, FITTED_SCALE), rtol=0.03)


# ---- room sampling --------------------------------------------------------

@given(st.integers(0, 2**64 - 1), st.sampled_from(list(Variant)))
def test_sampled_configs_satisfy_invariants(seed, variant):
    cfg = sample_room(seed, variant)
    cfg.check()
    assert cfg.variant is variant


def test_invariants_over_many_seeds():
    for seed in range(100_000):
        sample_room(seed).check()


def test_sample_room_is_deterministic():
    assert sample_room(77) == sample_room(77)
    assert sample_room(77).to_dict() == sample_room(77).to_dict()
    assert sample_room(77) != sample_room(78)


def test_rx_follows_uniform_distribution():
    rx = np.array([sample_room(s).dims_m[0] for s in range(10000)])
    res = stats.kstest(rx, stats.uniform(loc=3, scale=27).cdf)
    # critical value at 1% significance for n = 10 000
    assert res.statistic < 1.628 / math.sqrt(len(rx))
    assert rx.min() >= 3 and rx.max() <= 30


def test_scalar_t60_mean_and_variance():
    t = np.array([sample_room(s).t60_scalar_s for s in range(10000)])
    var_expected = sum(a * b * b for a, b in zip(FITTED_SHAPE, FITTED_SCALE)) / 36
    assert var_expected == pytest.approx(0.0148, abs=5e-5)
    assert t.mean() == pytest.approx(0.402, abs=0.01)
    assert t.var() == pytest.approx(var_expected, rel=0.15)


def test_source_is_in_front_of_receiver_boresight():
    offsets = []
    for s in range(2000):
        cfg = sample_room(s)
        d = np.subtract(cfg.src_pos_m, cfg.rec_pos_m)
        az = math.degrees(math.atan2(d[1], d[0]))
        offsets.append((az - cfg.rec_yaw_deg + 180) % 360 - 180)
    offsets = np.abs(offsets)
    assert offsets.max() <= 45.0 + 1e-9
    assert offsets.mean() > 15.0  # jitter really is applied


def test_placement_failure_for_impossible_geometry(monkeypatch):
    import mbrir.rooms as rooms
    monkeypatch.setattr(rooms, "_rotation_dir", lambda yaw, pitch: np.array([0.0, 0.0, 10.0]))
    with pytest.raises(PlacementFailure):
        rooms.sample_room(1)


def test_config_round_trip_through_dict():
    cfg = sample_room(5, "src-rec-mb")
    again = RoomConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert again.variant is Variant.SRC_REC_MB


def test_variant_parsing():
    assert Variant.parse("rec-mb") is Variant.REC_MB
    assert Variant.parse("SB") is Variant.SB
    assert Variant.SRC_REC_MB.cli_name == "src-rec-mb"
    with pytest.raises((KeyError, ValueError)):
        Variant.parse("binaural")


# ---- Sabine absorption ----------------------------------------------------

def test_sabine_hand_value():
    assert sabine_absorption((10, 10, 3), 0.5) == pytest.approx(0.161 * 300 / (320 * 0.5))
    assert round(sabine_absorption((10, 10, 3), 0.5), 4) == 0.3019


def test_sabine_long_t60_goes_to_zero():
    assert 0 < sabine_absorption((10, 10, 3), 1e6) < 1e-6


def test_sabine_clamps_with_warning():
    with pytest.warns(AbsorptionClampWarning):
        assert sabine_absorption((3, 1.5, 2.5), 0.05) == 0.99


def test_sabine_monotonicity_on_grid():
    t60 = np.linspace(0.2, 3.0, 50)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AbsorptionClampWarning)
        a = [sabine_absorption((20, 15, 4), t) for t in t60]
        assert np.all(np.diff(a) < 0)
        # V/S grows with uniform scaling of the room
        b = [sabine_absorption((k * 4, k * 3, k * 2.5), 2.0) for k in np.linspace(1, 5, 30)]
    assert np.all(np.diff(b) > 0)


# ---- Gamma fitting --------------------------------------------------------

@pytest.mark.parametrize("shape,scale", [(1.72, 0.39), (4.17, 0.09)])
def test_fit_gamma_recovers_parameters(shape, scale):
    x = np.random.default_rng(11).gamma(shape, scale, 50_000)
    k, theta = fit_gamma(x)
    assert k == pytest.approx(shape, rel=0.03)
    assert theta == pytest.approx(scale, rel=0.03)


@pytest.mark.parametrize("shape,scale", list(zip(FITTED_SHAPE, FITTED_SCALE)))
def test_fit_gamma_agrees_with_scipy(shape, scale):
    x = np.random.default_rng(5).gamma(shape, scale, 5000)
    k, theta = fit_gamma(x)
    k_ref, _, theta_ref = stats.gamma.fit(x, floc=0)
    assert k == pytest.approx(k_ref, rel=1e-4)
    assert theta == pytest.approx(theta_ref, rel=1e-4)


def test_fit_gamma_improves_on_moment_matching():
    x = np.random.default_rng(2).gamma(1.62, 0.24, 500)
    k0 = x.mean() ** 2 / x.var()
    k, theta = fit_gamma(x)
    assert gamma_nll(x, k, theta) <= gamma_nll(x, k0, x.mean() / k0)


@pytest.mark.parametrize("band", range(6))
def test_fit_sample_fit_contraction(band):
    x = np.random.default_rng(8 + band).gamma(FITTED_SHAPE[band], FITTED_SCALE[band], 50_000)
    first = fit_gamma(x)
    params = GammaParams((first[0],) * 6, (first[1],) * 6)
    draws = np.concatenate([sample_t60_bands(params, s) for s in range(10_000)])
    second = fit_gamma(draws)
    assert second[0] == pytest.approx(first[0], rel=0.05)
    assert second[1] == pytest.approx(first[1], rel=0.05)


@pytest.mark.parametrize("bad", [np.full(100, 0.4), np.linspace(0.1, 1, 29), -np.ones(40)])
def test_fit_gamma_degenerate(bad):
    with pytest.raises(DegenerateData):
        fit_gamma(bad)


def test_default_settings_expose_constants():
    assert DEFAULT_SETTINGS.speed_of_sound == 343.0
    assert DEFAULT_SETTINGS.sabine_constant == 0.161

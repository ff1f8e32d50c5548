import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mbrir.errors import BudgetExceeded, LengthTooShort
from mbrir.ism import (D_MIN, azimuth_elevation, deposit, emission_directions, enumerate_images,
                       image_positions, max_order_for, reciprocal_index, reflection_amplitudes,
                       rotation_matrix, sinc_kernels, synthesize, to_frame)
from mbrir.rooms import sample_room

from conftest import make_config

C = 343.0
FS = 48000


def test_order_zero_is_direct_path_only(hand_config):
    refl = enumerate_images(hand_config, 0.3, 0)
    assert len(refl) == 1
    assert np.all(refl.order_index == 0)
    assert np.all(refl.wall_hits == 0)
    assert refl.amplitude[0] == pytest.approx(1.0 / 1.7)


def test_direct_delay_hand_geometry(hand_config):
    refl = enumerate_images(hand_config, 0.3, 2)
    assert refl.delay[0] == pytest.approx(1.7 / 343.0, rel=1e-14)
    assert refl.delay[0] * 1000 == pytest.approx(4.956, abs=1e-3)
    assert refl.delay[0] * FS == pytest.approx(237.9, abs=0.05)


def test_doubling_direct_distance_halves_amplitude():
    near = enumerate_images(make_config(rec=(3.0, 2.0, 1.5)), 0.3, 0).amplitude[0]
    far = enumerate_images(make_config(rec=(4.0, 2.0, 1.5)), 0.3, 0).amplitude[0]
    assert far == pytest.approx(near / 2)


def test_first_order_images_and_hit_counts(hand_config):
    refl = enumerate_images(hand_config, 0.3, 1)
    first = refl.reflection_order == 1
    assert first.sum() == 6
    expected = {(-2.0, 2.0, 1.5), (10.0, 2.0, 1.5), (2.0, -2.0, 1.5),
                (2.0, 8.0, 1.5), (2.0, 2.0, -1.5), (2.0, 2.0, 4.5)}
    got = {tuple(np.round(p, 12)) for p in refl.image_pos[first]}
    assert got == expected
    assert np.all(refl.wall_hits[first].sum(axis=1) == 1)


def test_all_images_within_order_bound(hand_config):
    refl = enumerate_images(hand_config, 0.3, (2, 3, 1))
    n = refl.image_index
    assert np.all(np.abs(n) <= np.array([2, 3, 1]))
    # every index with |n| <= N on each axis is present: (4N + 1) values per axis
    assert len(refl) == 9 * 13 * 5


def test_sorted_by_delay_and_direct_first(hand_config):
    refl = enumerate_images(hand_config, 0.3, 3)
    assert np.all(np.diff(refl.delay) >= 0)
    assert np.all(refl.order_index[0] == 0)


def test_delay_is_distance_over_c_and_unit_directions(hand_config):
    refl = enumerate_images(hand_config, 0.3, 3)
    assert np.array_equal(refl.delay, refl.distance / C)
    assert np.allclose(np.linalg.norm(refl.arrival_dir, axis=1), 1.0, atol=1e-9)


def test_amplitude_recomputation_is_bit_exact(hand_config):
    refl = enumerate_images(hand_config, 0.27, 4)
    again = reflection_amplitudes(refl.wall_hits, refl.distance, 0.27, D_MIN)
    assert np.array_equal(again, refl.amplitude)
    beta = math.sqrt(1 - 0.27)
    k = 17
    assert refl.amplitude[k] == pytest.approx(beta ** refl.wall_hits[k].sum() / refl.distance[k])


def test_hit_counts_equal_reflection_order(hand_config):
    refl = enumerate_images(hand_config, 0.3, 3)
    assert np.array_equal(refl.wall_hits.sum(axis=1), refl.reflection_order)


def test_d_min_floor():
    cfg = make_config(rec=(2.0, 2.0, 1.55))
    refl = enumerate_images(cfg, 0.3, 0)
    assert refl.amplitude[0] == pytest.approx(1.0 / D_MIN)


def test_budget_exceeded(hand_config):
    with pytest.raises(BudgetExceeded):
        enumerate_images(hand_config, 0.3, 40, budget=10_000)


def test_max_order_hand_values():
    cfg = make_config(dims=(10, 10, 3), src=(2, 2, 1.5), rec=(3, 3, 1.5))
    assert max_order_for(cfg, 0.5) == (10, 10, 30)
    # for any T60 > 0 the ceiling term is at least 1, so the floor of the formula is 2
    assert max_order_for(cfg, 1e-9) == (2, 2, 2)
    big = make_config(dims=(20, 20, 6), src=(2, 2, 1.5), rec=(3, 3, 1.5))
    assert max_order_for(big, 0.5)[0] == math.ceil(343 * 0.5 / 40) + 1


# ---- emission directions --------------------------------------------------

def fold(u, length):
    """Map an unfolded coordinate back into [0, length] (specular bounce)."""
    r = np.mod(u, 2 * length)
    return np.where(r > length, 2 * length - r, r)


def trace_emission(src, rec, dims, order_index):
    """Brute-force unfolding: straight line from the image to the receiver."""
    img = image_positions(order_index[None, :], src, dims)[0]
    parity = np.mod(order_index, 2)
    u = (np.asarray(rec) - img) / np.linalg.norm(np.asarray(rec) - img)
    return (1 - 2 * parity) * u, np.linalg.norm(np.asarray(rec) - img)


def test_direct_emission_points_at_receiver():
    cfg = make_config(src=(2, 2, 1.5), rec=(4, 2, 1.5))
    refl = emission_directions(cfg, enumerate_images(cfg, 0.3, 0))
    assert np.allclose(refl.emission_dir[0], [1.0, 0.0, 0.0])


def test_first_order_x_wall_mirrors_azimuth():
    cfg = make_config(dims=(10, 10, 3), src=(3, 4, 1.5), rec=(7, 6, 1.5))
    refl = emission_directions(cfg, enumerate_images(cfg, 0.3, 1))
    k = np.nonzero((refl.order_index == [-1, 0, 0]).all(axis=1))[0][0]
    az_arr, _ = azimuth_elevation(refl.arrival_dir[k:k + 1])
    az_emit, _ = azimuth_elevation(refl.emission_dir[k:k + 1])
    # image at (-3, 4): arrival from az = -(180 - atan(0.2)), emission toward az = 180 - atan(0.2)
    assert az_arr[0] == pytest.approx(-(180 - math.degrees(math.atan(0.2))))
    assert az_emit[0] == pytest.approx(-az_arr[0])


@given(st.integers(0, 2**32))
def test_emission_matches_ray_tracing(seed):
    cfg = sample_room(seed)
    refl = emission_directions(cfg, enumerate_images(cfg, 0.3, 2))
    src, rec, dims = map(np.asarray, (cfg.src_pos_m, cfg.rec_pos_m, cfg.dims_m))
    pick = np.random.default_rng(seed).choice(len(refl), size=min(25, len(refl)), replace=False)
    for k in pick:
        expected, dist = trace_emission(src, rec, dims, refl.order_index[k])
        assert np.allclose(refl.emission_dir[k], expected, atol=1e-9)
        # following that ray with specular bounces for the path length lands on rec
        end = fold(src + dist * refl.emission_dir[k], dims)
        assert np.allclose(end, rec, atol=1e-7)


@given(st.integers(0, 2**32))
def test_emission_equals_swapped_arrival(seed):
    cfg = sample_room(seed)
    refl = emission_directions(cfg, enumerate_images(cfg, 0.3, 2))
    swapped = enumerate_images(cfg.swapped(), 0.3, 2)
    lookup = {tuple(m): i for i, m in enumerate(swapped.order_index)}
    for k, m in enumerate(refl.order_index):
        j = lookup[tuple(reciprocal_index(m))]
        assert np.allclose(refl.emission_dir[k], swapped.arrival_dir[j], atol=1e-9)
        assert swapped.distance[j] == pytest.approx(refl.distance[k], rel=1e-12)
    assert np.allclose(np.linalg.norm(refl.emission_dir, axis=1), 1.0, atol=1e-9)


def test_rotation_matrix_columns():
    r = rotation_matrix(90.0, 0.0)
    assert np.allclose(r[:, 0], [0, 1, 0], atol=1e-12)   # forward
    assert np.allclose(r[:, 1], [-1, 0, 0], atol=1e-12)  # left
    assert np.allclose(r[:, 2], [0, 0, 1], atol=1e-12)   # up
    local = to_frame(np.array([[0.0, 1.0, 0.0]]), 90.0, 0.0)
    assert np.allclose(local, [[1.0, 0.0, 0.0]], atol=1e-12)


# ---- synthesis ------------------------------------------------------------

def test_nearest_integer_delay_gives_one_hot(hand_config):
    buf = deposit(np.array([100.0]), np.array([0.7]), 400, "nearest")
    expected = np.zeros(400)
    expected[100] = 0.7
    assert np.array_equal(buf, expected)


def test_sinc_fractional_delay_peak_and_energy():
    buf = deposit(np.array([237.9]), np.array([0.6]), 600, "sinc")
    assert int(np.argmax(np.abs(buf))) in (237, 238)
    assert np.argmax(buf) == 238
    assert np.sum(buf ** 2) == pytest.approx(0.36, abs=1e-6)


def test_numba_deposit_matches_numpy_kernels():
    rng = np.random.default_rng(0)
    delays = rng.uniform(50, 900, 200)
    amps = rng.normal(size=200)
    fast = deposit(delays, amps, 1000, "sinc")
    slow = np.zeros(1000)
    taps = sinc_kernels(delays - np.floor(delays))
    for d, a, h in zip(delays, amps, taps):
        k0 = int(np.floor(d)) - 40
        slow[k0:k0 + 81] += a * h
    np.testing.assert_allclose(fast, slow, atol=1e-12)


def test_integer_sinc_delay_is_a_pure_impulse():
    buf = deposit(np.array([100.0]), np.array([1.0]), 300, "sinc")
    expected = np.zeros(300)
    expected[100] = 1.0
    np.testing.assert_allclose(buf, expected, atol=1e-15)


def test_length_too_short(hand_config):
    refl = enumerate_images(hand_config, 0.3, 2)
    with pytest.raises(LengthTooShort):
        synthesize(refl, 100)


def test_free_field_leaves_only_direct_kernel(hand_config):
    refl = enumerate_images(hand_config, 1.0, 3)
    rir = synthesize(refl, int(refl.delay.max() * FS) + 42)
    x = rir.samples
    k0 = int(np.floor(refl.delay[0] * FS))
    inside = np.zeros_like(x, dtype=bool)
    inside[k0 - 40:k0 + 41] = True
    assert np.sum(x[~inside] ** 2) < 1e-10 * np.sum(x ** 2)


@pytest.mark.parametrize("interp", ["nearest", "sinc"])
def test_synthesize_is_deterministic(hand_config, interp):
    refl = enumerate_images(hand_config, 0.3, 4)
    n = int(refl.delay.max() * FS) + 42
    a = synthesize(refl, n, interp=interp).samples
    b = synthesize(refl, n, interp=interp).samples
    assert a.tobytes() == b.tobytes()


def test_unknown_interp(hand_config):
    with pytest.raises(ValueError):
        synthesize(enumerate_images(hand_config, 0.3, 0), 1000, interp="cubic")

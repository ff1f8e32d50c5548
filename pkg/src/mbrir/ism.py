"""Image-source method for shoebox rooms.

Images along one axis are labelled by a signed reflection index ``m``: the
image coordinate is ``2*n*L + (1 - 2*p)*x`` with ``n = ceil(m/2)`` and
``p = m mod 2``, so ``|m|`` is the number of reflections off the two walls
normal to that axis (``|n - p|`` off the wall at 0, ``|n|`` off the wall at L).
A per-axis ``max_order`` of ``N`` admits ``|n| <= N`` with at most ``2N``
reflections on that axis; ``N = 0`` leaves only the direct path.

All directions are stored in world coordinates. Use :func:`to_frame` with
:func:`receiver_frame` / :func:`source_frame` to express them locally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .errors import BudgetExceeded, LengthTooShort
from .rooms import RoomConfig, Variant
from .settings import SAMPLE_RATE, SPEED_OF_SOUND

D_MIN = 0.1
SINC_TAPS = 81
DEFAULT_BUDGET = 10_000_000
_HALF = SINC_TAPS // 2


@dataclass
class ReflectionList:
    """Struct-of-arrays view of every image source of one (src, rec) pair."""

    order_index: np.ndarray      # (N, 3) signed per-axis reflection index m
    image_pos: np.ndarray        # (N, 3)
    distance: np.ndarray         # (N,)
    delay: np.ndarray            # (N,) seconds
    amplitude: np.ndarray        # (N,)
    arrival_dir: np.ndarray      # (N, 3) unit vectors, receiver -> image
    wall_hits: np.ndarray        # (N, 6) hits on walls x0, xL, y0, yL, z0, zL
    absorption: np.ndarray       # (6,) per-wall absorption used for `amplitude`
    src_pos: np.ndarray
    rec_pos: np.ndarray
    dims: np.ndarray
    c: float = SPEED_OF_SOUND
    d_min: float = D_MIN
    emission_dir: np.ndarray | None = None   # (N, 3) unit vectors leaving the source
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.distance)

    @property
    def image_index(self) -> np.ndarray:
        return -np.floor_divide(-self.order_index, 2)

    @property
    def parity(self) -> np.ndarray:
        return np.mod(self.order_index, 2)

    @property
    def reflection_order(self) -> np.ndarray:
        return np.abs(self.order_index).sum(axis=1)

    def amplitudes_for(self, absorption) -> np.ndarray:
        """Amplitudes of the same images under a different absorption."""
        return reflection_amplitudes(self.wall_hits, self.distance, absorption, self.d_min)

    def with_amplitude(self, amplitude: np.ndarray) -> "ReflectionList":
        return replace(self, amplitude=np.asarray(amplitude, dtype=float))


def _wall_vector(absorption) -> np.ndarray:
    a = np.asarray(absorption, dtype=float)
    if a.ndim == 0:
        a = np.full(6, float(a))
    if a.shape != (6,):
        raise ValueError("absorption must be a scalar or one value per wall")
    if np.any(a <= 0) or np.any(a > 1):
        raise ValueError("absorption must lie in (0, 1]")
    return a


def reflection_amplitudes(wall_hits, distance, absorption, d_min: float = D_MIN) -> np.ndarray:
    """``prod_w sqrt(1 - a_w) ** hits_w / max(d, d_min)`` for every image."""
    beta = np.sqrt(1.0 - _wall_vector(absorption))
    gain = np.prod(beta[None, :] ** wall_hits, axis=1)
    return gain / np.maximum(distance, d_min)


def max_order_for(config: RoomConfig, t60_s: float, c: float = SPEED_OF_SOUND) -> tuple:
    """Per-axis image order whose images reach past the -60 dB path length."""
    if t60_s <= 0:
        raise ValueError("t60 must be positive")
    return tuple(int(math.ceil(c * t60_s / (2.0 * r))) + 1 for r in config.dims_m)


def _axis_images(src: float, length: float, order: int):
    m = np.arange(-2 * order, 2 * order + 1)
    n = -np.floor_divide(-m, 2)
    p = np.mod(m, 2)
    coord = 2.0 * n * length + (1 - 2 * p) * src
    hits = np.stack([np.abs(n - p), np.abs(n)], axis=1)
    return m, coord, hits


def _image_lattice(src, rec, dims, max_order, max_distance, budget):
    ax = [_axis_images(src[i], dims[i], max_order[i]) for i in range(3)]
    box = np.prod([len(a[0]) for a in ax], dtype=float)
    estimate = box
    if max_distance is not None:
        # one image per room volume inside the sphere of reach
        estimate = min(box, 4.0 / 3.0 * math.pi * max_distance ** 3 / float(np.prod(dims)))
    if estimate > budget:
        raise BudgetExceeded(f"~{estimate:.3g} images exceeds budget {budget}")

    dy_all = ax[1][1] - rec[1]
    dz_all = ax[2][1] - rec[2]
    m_parts = []
    count = 0
    limit2 = np.inf if max_distance is None else max_distance ** 2
    for mx, cx in zip(ax[0][0], ax[0][1]):
        dx2 = (cx - rec[0]) ** 2
        if dx2 > limit2:
            continue
        ysel = np.nonzero(dx2 + dy_all ** 2 <= limit2)[0]
        zsel = np.nonzero(dx2 + dz_all ** 2 <= limit2)[0]
        d2 = dx2 + dy_all[ysel, None] ** 2 + dz_all[None, zsel] ** 2
        keep = d2 <= limit2
        iy, iz = np.nonzero(keep)
        if len(iy) == 0:
            continue
        idx = np.empty((len(iy), 3), dtype=np.int16)
        idx[:, 0] = mx
        idx[:, 1] = ax[1][0][ysel[iy]]
        idx[:, 2] = ax[2][0][zsel[iz]]
        m_parts.append(idx)
        count += len(idx)
        if count > budget:
            raise BudgetExceeded(f"image count exceeds budget {budget}")
    return np.concatenate(m_parts), ax


def image_positions(order_index: np.ndarray, point, dims) -> np.ndarray:
    """Coordinates of the images of ``point`` labelled by ``order_index``."""
    m = np.asarray(order_index)
    n = -np.floor_divide(-m, 2)
    p = np.mod(m, 2)
    return 2.0 * n * np.asarray(dims, dtype=float) + (1 - 2 * p) * np.asarray(point, dtype=float)


def enumerate_images(config: RoomConfig, absorption, max_order, *,
                     c: float = SPEED_OF_SOUND, d_min: float = D_MIN,
                     max_distance: float | None = None,
                     budget: int = DEFAULT_BUDGET) -> ReflectionList:
    """All image sources of ``config`` up to ``max_order``, sorted by delay.

    Parameters
    ----------
    config : RoomConfig
    absorption : float or array of 6
        Energy absorption per wall, in (0, 1]; 1 gives a free field.
    max_order : int or triple of int
    max_distance : float, optional
        Drop images farther than this from the receiver (they cannot land
        inside a finite buffer anyway).
    budget : int
        Raise ``BudgetExceeded`` rather than build more images than this.
    """
    if np.isscalar(max_order):
        max_order = (int(max_order),) * 3
    max_order = tuple(int(v) for v in max_order)
    if min(max_order) < 0:
        raise ValueError("max_order must be non-negative")
    alpha = _wall_vector(absorption)
    src = np.asarray(config.src_pos_m, dtype=float)
    rec = np.asarray(config.rec_pos_m, dtype=float)
    dims = np.asarray(config.dims_m, dtype=float)

    order_index, ax = _image_lattice(src, rec, dims, max_order, max_distance, budget)
    pos = image_positions(order_index, src, dims)
    diff = pos - rec
    distance = np.sqrt(np.einsum("ij,ij->i", diff, diff))

    hits = np.empty((len(order_index), 6), dtype=np.int16)
    for axis in range(3):
        lo, hi = 2 * axis, 2 * axis + 1
        table = ax[axis][2]
        k = order_index[:, axis] + 2 * max_order[axis]
        hits[:, lo] = table[k, 0]
        hits[:, hi] = table[k, 1]

    n = -np.floor_divide(-order_index, 2)
    p = np.mod(order_index, 2)
    order = np.lexsort((p[:, 2], p[:, 1], p[:, 0], n[:, 2], n[:, 1], n[:, 0], distance))
    order_index, pos, diff, distance, hits = (a[order] for a in (order_index, pos, diff, distance, hits))

    arrival = diff / np.maximum(distance, 1e-300)[:, None]
    return ReflectionList(
        order_index=order_index,
        image_pos=pos,
        distance=distance,
        delay=distance / c,
        amplitude=reflection_amplitudes(hits, distance, alpha, d_min),
        arrival_dir=arrival,
        wall_hits=hits,
        absorption=alpha,
        src_pos=src,
        rec_pos=rec,
        dims=dims,
        c=c,
        d_min=d_min,
    )


def reciprocal_index(order_index: np.ndarray) -> np.ndarray:
    """Label of the same propagation path when source and receiver swap.

    Even (pure translation) indices flip sign; odd (mirror) indices are kept.
    """
    m = np.asarray(order_index)
    return np.where(np.mod(m, 2) == 0, -m, m)


def emission_directions(config: RoomConfig, reflections: ReflectionList) -> ReflectionList:
    """Fill ``emission_dir`` via acoustic reciprocity.

    Swapping source and receiver turns each path into one that arrives at the
    original source; its arrival direction there is the direction in which
    the original path left the source.
    """
    src = np.asarray(config.src_pos_m, dtype=float)
    rec = np.asarray(config.rec_pos_m, dtype=float)
    recip = image_positions(reciprocal_index(reflections.order_index), rec, config.dims_m)
    diff = recip - src
    norm = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return replace(reflections, emission_dir=diff / norm[:, None])


def rotation_matrix(yaw_deg: float, pitch_deg: float) -> np.ndarray:
    """Columns are the local forward, left and up axes in world coordinates."""
    cy, sy = math.cos(math.radians(yaw_deg)), math.sin(math.radians(yaw_deg))
    cp, sp = math.cos(math.radians(pitch_deg)), math.sin(math.radians(pitch_deg))
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, -sp], [0.0, 1.0, 0.0], [sp, 0.0, cp]])
    return rz @ ry


def to_frame(dirs: np.ndarray, yaw_deg: float, pitch_deg: float) -> np.ndarray:
    """Express world-frame unit vectors in a frame with the given boresight."""
    return np.asarray(dirs) @ rotation_matrix(yaw_deg, pitch_deg)


def receiver_frame(config: RoomConfig) -> tuple[float, float]:
    return config.rec_yaw_deg, config.rec_pitch_deg


def source_frame(config: RoomConfig) -> tuple[float, float]:
    """Talker faces the receiver horizontally: yaw toward it, zero pitch."""
    d = np.asarray(config.rec_pos_m) - np.asarray(config.src_pos_m)
    return math.degrees(math.atan2(d[1], d[0])), 0.0


def azimuth_elevation(dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Azimuth in [-180, 180) and elevation in [-90, 90], degrees."""
    d = np.atleast_2d(dirs)
    az = np.degrees(np.arctan2(d[:, 1], d[:, 0]))
    az = np.where(az >= 180.0, az - 360.0, az)
    el = np.degrees(np.arcsin(np.clip(d[:, 2], -1.0, 1.0)))
    return az, el


@dataclass
class Rir:
    sample_rate_hz: int
    samples: np.ndarray
    variant: Variant | None = None
    config_id: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or len(self.samples) == 0:
            raise ValueError("an RIR is a non-empty 1-D buffer")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("RIR samples must be finite")

    @property
    def peak_index(self) -> int:
        return int(np.argmax(np.abs(self.samples)))

    def __len__(self) -> int:
        return len(self.samples)


def rir_length(config: RoomConfig, t60_s: float, sample_rate: int = SAMPLE_RATE,
               c: float = SPEED_OF_SOUND) -> int:
    """Buffer length covering the direct path plus one full T60 of decay."""
    direct = np.linalg.norm(np.subtract(config.rec_pos_m, config.src_pos_m)) / c
    return int(math.ceil(t60_s * sample_rate) + math.ceil(direct * sample_rate) + _HALF + 1)


def max_distance_for(length_samples: int, sample_rate: int, c: float = SPEED_OF_SOUND) -> float:
    """Farthest image whose delay still fits inside ``length_samples``."""
    return (length_samples - 1) / sample_rate * c


_TAP_OFFSETS = np.arange(-_HALF, _HALF + 1)
_TAP_SIGN = np.where(_TAP_OFFSETS % 2 == 0, 1.0, -1.0)
_WIN_C = np.cos(np.pi * _TAP_OFFSETS / (_HALF + 1))
_WIN_S = np.sin(np.pi * _TAP_OFFSETS / (_HALF + 1))


def sinc_kernels(frac: np.ndarray) -> np.ndarray:
    """Unit-energy Hann-windowed sinc taps for fractional delays in [0, 1).

    Row ``i`` holds the taps at offsets ``-40..40`` from ``floor(delay_i)``.
    """
    frac = np.asarray(frac, dtype=float)[:, None]
    t = _TAP_OFFSETS[None, :] - frac
    s = np.sin(np.pi * frac)
    with np.errstate(invalid="ignore", divide="ignore"):
        h = -_TAP_SIGN[None, :] * s / (np.pi * t)
    h[t == 0.0] = 1.0
    a = np.pi * frac / (_HALF + 1)
    window = 0.5 * (1.0 + _WIN_C[None, :] * np.cos(a) + _WIN_S[None, :] * np.sin(a))
    h *= window
    h /= np.sqrt(np.einsum("ij,ij->i", h, h))[:, None]
    return h


def deposit(delay_samples: np.ndarray, amplitudes: np.ndarray, length: int,
            interp: str = "sinc") -> np.ndarray:
    """Sum amplitude-scaled taps at fractional sample positions.

    ``amplitudes`` may be 1-D (one buffer) or ``(bands, N)``; the output has
    the matching leading shape. Taps that fall outside the buffer are dropped.
    Contributions are accumulated in list order, so the result is
    deterministic for a given reflection order.
    """
    delay_samples = np.ascontiguousarray(delay_samples, dtype=np.float64)
    amps = np.ascontiguousarray(np.atleast_2d(amplitudes), dtype=np.float64)
    if amps.shape[1] != len(delay_samples):
        raise ValueError("one amplitude per reflection and band required")
    if len(delay_samples) and delay_samples.max() > length - 1:
        raise LengthTooShort(f"delay of {delay_samples.max():.1f} samples exceeds "
                             f"buffer of {length}")
    if len(delay_samples) and delay_samples.min() < 0:
        raise ValueError("negative delay")
    out = np.zeros((amps.shape[0], length))
    if interp == "nearest":
        _deposit_nearest(delay_samples, amps, out)
    elif interp == "sinc":
        _deposit_sinc(delay_samples, amps, out, _TAP_OFFSETS.astype(np.float64),
                      _TAP_SIGN, _WIN_C, _WIN_S)
    else:
        raise ValueError(f"unknown interpolation {interp!r}")
    return out if np.ndim(amplitudes) == 2 else out[0]


@numba.njit(cache=True)
def _deposit_nearest(delay, amps, out):
    for i in range(delay.shape[0]):
        k = int(np.rint(delay[i]))
        for b in range(amps.shape[0]):
            out[b, k] += amps[b, i]


@numba.njit(cache=True)
def _deposit_sinc(delay, amps, out, offsets, sign, win_c, win_s):
    n_taps = offsets.shape[0]
    half = n_taps // 2
    length = out.shape[1]
    h = np.empty(n_taps)
    for i in range(delay.shape[0]):
        base = np.floor(delay[i])
        frac = delay[i] - base
        s = np.sin(np.pi * frac)
        ca = np.cos(np.pi * frac / (half + 1))
        sa = np.sin(np.pi * frac / (half + 1))
        energy = 0.0
        for j in range(n_taps):
            t = offsets[j] - frac
            if t == 0.0:
                v = 1.0
            else:
                v = -sign[j] * s / (np.pi * t)
            v *= 0.5 * (1.0 + win_c[j] * ca + win_s[j] * sa)
            h[j] = v
            energy += v * v
        norm = 1.0 / np.sqrt(energy)
        k0 = int(base) - half
        for b in range(amps.shape[0]):
            a = amps[b, i] * norm
            if a == 0.0:
                continue
            for j in range(n_taps):
                k = k0 + j
                if 0 <= k < length:
                    out[b, k] += a * h[j]


def synthesize(reflections: ReflectionList, length_samples: int,
               sample_rate_hz: int = SAMPLE_RATE, interp: str = "sinc",
               variant=None, config_id: str = "") -> Rir:
    """Render the reflection list into a time-domain impulse response."""
    samples = deposit(reflections.delay * sample_rate_hz, reflections.amplitude,
                      length_samples, interp)
    return Rir(sample_rate_hz, samples, variant, config_id)

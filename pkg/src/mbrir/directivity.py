"""Source and receiver directivity.

Source directivity is a gain lookup ``D(az, el)`` applied to each reflection's
emission direction. Receiver directivity is a set of single-ear impulse
responses; each reflection is rendered through the filter measured closest to
its arrival direction. Both lookups are nearest-neighbour, no interpolation.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from .ism import ReflectionList, azimuth_elevation, deposit, to_frame
from .settings import SAMPLE_RATE, SPEED_OF_SOUND

N_BANDS = 6
BAND_COLUMNS = ("g125", "g250", "g500", "g1k", "g2k", "g4k")
# rows per block in nearest-neighbour searches; bounds the distance matrices
# to a few tens of MB however many reflections there are
LOOKUP_BLOCK = 1 << 16


def _blockwise(fn, rows: np.ndarray) -> np.ndarray:
    """Apply a row-independent ``fn`` to consecutive blocks and concatenate."""
    if len(rows) <= LOOKUP_BLOCK:
        return fn(rows)
    return np.concatenate([fn(rows[k:k + LOOKUP_BLOCK])
                           for k in range(0, len(rows), LOOKUP_BLOCK)])


@dataclass(frozen=True)
class DirectivityTable:
    azimuth_grid_deg: np.ndarray
    elevation_grid_deg: np.ndarray
    gains: np.ndarray                    # (n_az, n_el)
    band_gains: np.ndarray | None = None  # (n_az, n_el, 6)
    label: str = ""

    def __post_init__(self):
        az = np.asarray(self.azimuth_grid_deg, dtype=float)
        el = np.asarray(self.elevation_grid_deg, dtype=float)
        if np.any(np.diff(az) <= 0) or np.any(np.diff(el) <= 0):
            raise ValueError("directivity grids must be strictly increasing")
        if az[0] < -180 or az[-1] >= 180 or el[0] < -90 or el[-1] > 90:
            raise ValueError("grid outside [-180, 180) x [-90, 90]")
        g = np.asarray(self.gains, dtype=float)
        if g.shape != (len(az), len(el)):
            raise ValueError("gain matrix does not match the grids")
        for arr in (g, self.band_gains):
            if arr is not None and (not np.all(np.isfinite(arr)) or np.any(np.asarray(arr) < 0)):
                raise ValueError("gains must be finite and non-negative")
        if self.band_gains is not None and np.shape(self.band_gains) != (len(az), len(el), N_BANDS):
            raise ValueError("per-band gains must be (n_az, n_el, 6)")

    @property
    def per_band(self) -> bool:
        return self.band_gains is not None

    def nearest_node(self, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Grid indices closest to each direction, axis by axis.

        Azimuth distance wraps around; exact ties go to the smaller azimuth,
        then the smaller elevation.
        """
        az, el = azimuth_elevation(dirs)
        grid_az = np.asarray(self.azimuth_grid_deg, dtype=float)
        grid_el = np.asarray(self.elevation_grid_deg, dtype=float)
        i = _blockwise(lambda a: np.argmin(np.abs((a[:, None] - grid_az[None, :] + 180.0)
                                                  % 360.0 - 180.0), axis=1), az)
        j = _blockwise(lambda e: np.argmin(np.abs(e[:, None] - grid_el[None, :]), axis=1), el)
        return i, j

    def lookup(self, dirs: np.ndarray, band: int | None = None) -> np.ndarray:
        i, j = self.nearest_node(dirs)
        if band is not None and self.band_gains is not None:
            return np.asarray(self.band_gains)[i, j, band]
        return np.asarray(self.gains)[i, j]

    @classmethod
    def omni(cls, step_deg: float = 10.0) -> "DirectivityTable":
        az = np.arange(-180.0, 180.0, step_deg)
        el = np.arange(-90.0, 90.0 + step_deg / 2, step_deg)
        return cls(az, el, np.ones((len(az), len(el))), label="omni")

    @classmethod
    def from_function(cls, fn, step_deg: float = 5.0, label: str = "") -> "DirectivityTable":
        """Tabulate ``fn(psi_rad)`` of the angle off the forward (+x) axis."""
        az = np.arange(-180.0, 180.0, step_deg)
        el = np.arange(-90.0, 90.0 + step_deg / 2, step_deg)
        A, E = np.meshgrid(np.radians(az), np.radians(el), indexing="ij")
        psi = np.arccos(np.clip(np.cos(A) * np.cos(E), -1.0, 1.0))
        return cls(az, el, fn(psi), label=label)


def cardioid_table(power: float = 0.5, step_deg: float = 5.0) -> DirectivityTable:
    """Forward-facing ``((1 + cos psi) / 2) ** power`` pattern."""
    return DirectivityTable.from_function(lambda psi: ((1.0 + np.cos(psi)) / 2.0) ** power,
                                          step_deg, label=f"cardioid^{power}")


def read_directivity_table(path_or_text, label: str | None = None) -> DirectivityTable:
    """Parse ``az_deg, el_deg, gain[, g125, ..., g4k]`` rows (header required).

    Lines starting with ``#`` are ignored. Every (az, el) combination of the
    distinct values found must be present exactly once.
    """
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
        label = label or Path(path_or_text).stem
    else:
        text = path_or_text
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.reader(io.StringIO("\n".join(lines)), skipinitialspace=True)
    header = [h.strip() for h in next(reader)]
    if header[:3] != ["az_deg", "el_deg", "gain"]:
        raise ValueError(f"unexpected header {header}")
    per_band = len(header) > 3
    if per_band and tuple(header[3:]) != BAND_COLUMNS:
        raise ValueError(f"per-band columns must be {BAND_COLUMNS}")
    rows = np.array([[float(v) for v in row] for row in reader])
    az = np.unique(rows[:, 0])
    el = np.unique(rows[:, 1])
    if len(rows) != len(az) * len(el):
        raise ValueError("table is not a complete az x el grid")
    ia = np.searchsorted(az, rows[:, 0])
    ie = np.searchsorted(el, rows[:, 1])
    gains = np.full((len(az), len(el)), np.nan)
    gains[ia, ie] = rows[:, 2]
    band = None
    if per_band:
        band = np.full((len(az), len(el), N_BANDS), np.nan)
        band[ia, ie] = rows[:, 3:]
    if np.isnan(gains).any():
        raise ValueError("duplicate grid nodes in table")
    return DirectivityTable(az, el, gains, band, label=label or "")


def write_directivity_table(table: DirectivityTable, path) -> None:
    cols = ["az_deg", "el_deg", "gain"] + (list(BAND_COLUMNS) if table.per_band else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i, a in enumerate(table.azimuth_grid_deg):
            for j, e in enumerate(table.elevation_grid_deg):
                row = [f"{a:g}", f"{e:g}", f"{table.gains[i, j]:.9g}"]
                if table.per_band:
                    row += [f"{g:.9g}" for g in table.band_gains[i, j]]
                w.writerow(row)


def default_source_table() -> DirectivityTable:
    """Bundled placeholder talker pattern (cardioid ** 0.5, not measured data)."""
    text = resources.files("mbrir.data").joinpath("source_cardioid_sqrt.csv").read_text()
    return read_directivity_table(text, label="cardioid^0.5 placeholder")


def weight_source(reflections: ReflectionList, table: DirectivityTable,
                  source_yaw_pitch=(0.0, 0.0), band: int | None = None) -> ReflectionList:
    """Scale each reflection by the table gain nearest its emission direction."""
    if reflections.emission_dir is None:
        raise ValueError("emission directions missing; run emission_directions first")
    local = to_frame(reflections.emission_dir, *source_yaw_pitch)
    return reflections.with_amplitude(reflections.amplitude * table.lookup(local, band))


@dataclass(frozen=True)
class ReceiverFilterSet:
    directions: np.ndarray          # (D, 3) unit vectors in the receiver frame
    impulse_responses: np.ndarray   # (D, taps)
    sample_rate_hz: int = SAMPLE_RATE
    label: str = ""

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        h = np.asarray(self.impulse_responses, dtype=float)
        if d.ndim != 2 or d.shape[1] != 3 or h.ndim != 2 or h.shape[0] != d.shape[0]:
            raise ValueError("need one filter per direction")
        if not np.allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-9):
            raise ValueError("directions must be unit vectors")
        if not np.all(np.isfinite(h)):
            raise ValueError("filters must be finite")

    @property
    def taps(self) -> int:
        return np.shape(self.impulse_responses)[1]

    def nearest(self, dirs: np.ndarray) -> np.ndarray:
        """Index of the filter direction with the largest cosine (first wins ties)."""
        grid = np.asarray(self.directions).T
        return _blockwise(lambda d: np.argmax(d @ grid, axis=1), np.atleast_2d(dirs))

    @classmethod
    def identity(cls, n_directions: int = 1, taps: int = 1) -> "ReceiverFilterSet":
        dirs = fibonacci_sphere(n_directions) if n_directions > 1 else np.array([[1.0, 0.0, 0.0]])
        h = np.zeros((len(dirs), taps))
        h[:, 0] = 1.0
        return cls(dirs, h, label="identity")


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (1.0 + 5 ** 0.5) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def head_shadow_magnitude(freqs_hz, incidence_rad, radius_m: float = 0.0875,
                          c: float = SPEED_OF_SOUND) -> np.ndarray:
    """One-pole/one-zero rigid-sphere shadow magnitude (Brown & Duda).

    ``incidence_rad`` is the angle between the source direction and the ear
    axis. Gain is +6 dB at high frequencies on the ear axis and falls to about
    -11 dB at 150 deg.
    """
    theta_min = math.radians(150.0)
    a = 1.05 + 0.95 * np.cos(np.asarray(incidence_rad) / theta_min * np.pi)
    w = 2 * np.pi * np.asarray(freqs_hz, dtype=float) * radius_m / (2.0 * c)
    return np.sqrt((1.0 + (a * w) ** 2) / (1.0 + w ** 2))


def minimum_phase(magnitude: np.ndarray, taps: int) -> np.ndarray:
    """Minimum-phase FIR whose spectrum has ``magnitude`` on an rfft grid."""
    nfft = 2 * (len(magnitude) - 1)
    cep = np.fft.irfft(np.log(np.maximum(magnitude, 1e-12)), nfft)
    fold = np.zeros(nfft)
    fold[0] = cep[0]
    fold[1:nfft // 2] = 2.0 * cep[1:nfft // 2]
    fold[nfft // 2] = cep[nfft // 2]
    h = np.fft.irfft(np.exp(np.fft.rfft(fold)), nfft)
    return h[:taps]


def synthetic_sphere_set(n_directions: int = 240, taps: int = 128,
                         sample_rate_hz: int = SAMPLE_RATE) -> ReceiverFilterSet:
    """Left-ear filters from a rigid-sphere head-shadow model.

    The ear sits on the +y axis of the receiver frame (x forward, z up).
    """
    dirs = fibonacci_sphere(n_directions)
    nfft = 1024
    freqs = np.fft.rfftfreq(nfft, 1.0 / sample_rate_hz)
    incidence = np.arccos(np.clip(dirs[:, 1], -1.0, 1.0))
    h = np.stack([minimum_phase(head_shadow_magnitude(freqs, inc), taps) for inc in incidence])
    return ReceiverFilterSet(dirs, h, sample_rate_hz, label="synthetic-sphere")


def read_receiver_set(index_path) -> ReceiverFilterSet:
    """Load ``az_deg, el_deg, path`` rows plus one mono audio file per row.

    Relative paths resolve against the index file's directory. Filters of
    different lengths are zero-padded to the longest.
    """
    from .audio import read_audio

    index_path = Path(index_path)
    if index_path.is_dir():
        index_path = index_path / "index.csv"
    base = index_path.parent
    with open(index_path, newline="") as fh:
        reader = csv.DictReader((ln for ln in fh if not ln.lstrip().startswith("#")),
                                skipinitialspace=True)
        rows = list(reader)
    dirs, irs, rate = [], [], None
    for row in rows:
        az, el = math.radians(float(row["az_deg"])), math.radians(float(row["el_deg"]))
        dirs.append([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
        x, sr = read_audio(base / row["path"].strip())
        if rate is not None and sr != rate:
            raise ValueError("receiver filters use mixed sample rates")
        rate = sr
        irs.append(x)
    taps = max(len(x) for x in irs)
    h = np.zeros((len(irs), taps))
    for k, x in enumerate(irs):
        h[k, :len(x)] = x
    return ReceiverFilterSet(np.array(dirs), h, int(rate), label=index_path.parent.name)


def write_receiver_set(filters: ReceiverFilterSet, out_dir) -> Path:
    from .audio import write_audio

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    az, el = azimuth_elevation(filters.directions)
    lines = ["az_deg,el_deg,path"]
    for k, h in enumerate(filters.impulse_responses):
        name = f"dir_{k:04d}.wav"
        write_audio(out_dir / name, h, filters.sample_rate_hz)
        lines.append(f"{az[k]:.12g},{el[k]:.12g},{name}")
    index = out_dir / "index.csv"
    index.write_text("\n".join(lines) + "\n")
    return index


def receiver_render(delay_samples: np.ndarray, amplitudes: np.ndarray, local_dirs: np.ndarray,
                    filters: ReceiverFilterSet, length: int, interp: str = "sinc") -> np.ndarray:
    """Render reflections through their nearest receiver filters.

    ``amplitudes`` is ``(N,)`` or ``(bands, N)``. Reflections sharing an
    identical filter are deposited together and convolved once. The output is
    ``length + taps - 1`` samples long.
    """
    amps = np.atleast_2d(amplitudes)
    h = np.asarray(filters.impulse_responses, dtype=float)
    taps = h.shape[1]
    out_len = length + taps - 1
    uniq, filt_of_dir = np.unique(h, axis=0, return_inverse=True)
    group = np.asarray(filt_of_dir).reshape(-1)[filters.nearest(local_dirs)]
    present = np.unique(group)

    if len(present) == 1:
        g = present[0]
        buf = deposit(delay_samples, amps, length, interp)
        out = _convolve_rows(buf, uniq[g], out_len)
        return out if np.ndim(amplitudes) == 2 else out[0]

    nfft = sfft.next_fast_len(out_len, real=True)
    spec = np.zeros((amps.shape[0], nfft // 2 + 1), dtype=complex)
    for g in present:
        sel = group == g
        buf = deposit(delay_samples[sel], amps[:, sel], length, interp)
        spec += sfft.rfft(buf, nfft, axis=1) * sfft.rfft(uniq[g], nfft)[None, :]
    out = sfft.irfft(spec, nfft, axis=1)[:, :out_len]
    return out if np.ndim(amplitudes) == 2 else out[0]


def _convolve_rows(buf: np.ndarray, h: np.ndarray, out_len: int) -> np.ndarray:
    if len(h) == 1:
        out = buf * h[0] if h[0] != 1.0 else buf
        return out[:, :out_len]
    if np.count_nonzero(h) == 1 and h[np.flatnonzero(h)[0]] == 1.0:
        k = int(np.flatnonzero(h)[0])
        out = np.zeros((buf.shape[0], out_len))
        out[:, k:k + buf.shape[1]] = buf
        return out
    nfft = sfft.next_fast_len(out_len, real=True)
    return sfft.irfft(sfft.rfft(buf, nfft, axis=1) * sfft.rfft(h, nfft)[None, :],
                      nfft, axis=1)[:, :out_len]


def apply_receiver(reflections: ReflectionList, filters: ReceiverFilterSet,
                   receiver_orientation=(0.0, 0.0), length_samples: int | None = None,
                   sample_rate_hz: int | None = None, interp: str = "sinc"):
    """Single-ear RIR with every reflection filtered by its nearest direction.

    ``receiver_orientation`` is ``(yaw_deg, pitch_deg)`` of the receiver's
    forward axis in world coordinates.
    """
    from .ism import Rir

    fs = sample_rate_hz or filters.sample_rate_hz
    if length_samples is None:
        length_samples = int(math.ceil(reflections.delay.max() * fs)) + 41
    local = to_frame(reflections.arrival_dir, *receiver_orientation)
    out = receiver_render(reflections.delay * fs, reflections.amplitude, local,
                          filters, length_samples, interp)
    return Rir(fs, out)

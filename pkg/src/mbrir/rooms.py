"""Random shoebox room configurations and reverberation-time statistics.

Room geometry, receiver pose and source placement follow the ranges used for
the SB/MB datasets: ``r_x ~ U(3, 30)``, ``r_y = r_x * U(0.5, 1)``,
``r_z ~ U(2.5, 5)``, receiver inside the central 30 % of the floor plan at
1-2 m height, source 0.5-3 m away and in front of it. Per-band T60 values are
drawn from independent Gamma distributions; the single-band scalar is their
arithmetic mean.
"""
from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .errors import DegenerateData, PlacementFailure
from .seeding import mix_seed
from .settings import DEFAULT_SETTINGS, Settings

log = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 1000


class Variant(str, enum.Enum):
    SB = "SB"
    MB = "MB"
    REC_MB = "REC_MB"
    SRC_REC_MB = "SRC_REC_MB"

    @classmethod
    def parse(cls, name: "str | Variant") -> "Variant":
        if isinstance(name, Variant):
            return name
        key = name.strip().upper().replace("-", "_").replace("+", "_")
        return cls[key]

    @property
    def cli_name(self) -> str:
        return self.value.lower().replace("_", "-")

    @property
    def multiband(self) -> bool:
        return self is not Variant.SB


@dataclass(frozen=True)
class BandSpec:
    centers_hz: tuple = DEFAULT_SETTINGS.band_centers_hz
    sample_rate_hz: int = DEFAULT_SETTINGS.sample_rate_hz

    def __post_init__(self):
        c = np.asarray(self.centers_hz, dtype=float)
        if c.ndim != 1 or len(c) < 2 or np.any(np.diff(c) <= 0):
            raise ValueError("band centers must be strictly increasing")
        if self.crossovers_hz[-1] >= self.sample_rate_hz / 2:
            raise ValueError("highest crossover must lie below Nyquist")

    @property
    def n_bands(self) -> int:
        return len(self.centers_hz)

    @property
    def crossovers_hz(self) -> tuple:
        c = self.centers_hz
        return tuple(math.sqrt(c[i] * c[i + 1]) for i in range(len(c) - 1))

    @classmethod
    def from_settings(cls, settings: Settings) -> "BandSpec":
        return cls(tuple(settings.band_centers_hz), int(settings.sample_rate_hz))


@dataclass(frozen=True)
class GammaParams:
    shape_alpha: tuple = DEFAULT_SETTINGS.gamma_shape
    scale_beta: tuple = DEFAULT_SETTINGS.gamma_scale

    def __post_init__(self):
        if len(self.shape_alpha) != len(self.scale_beta):
            raise ValueError("shape and scale vectors differ in length")
        if min(self.shape_alpha) <= 0 or min(self.scale_beta) <= 0:
            raise ValueError("Gamma parameters must be strictly positive")

    @property
    def means(self) -> np.ndarray:
        return np.asarray(self.shape_alpha) * np.asarray(self.scale_beta)

    @classmethod
    def from_settings(cls, settings: Settings) -> "GammaParams":
        return cls(tuple(settings.gamma_shape), tuple(settings.gamma_scale))


@dataclass(frozen=True)
class RoomConfig:
    """One sampled acoustic scene, shared by every dataset variant."""

    id: str
    seed: int
    dims_m: tuple
    rec_pos_m: tuple
    rec_yaw_deg: float
    rec_pitch_deg: float
    src_pos_m: tuple
    t60_bands_s: tuple
    t60_scalar_s: float
    variant: Variant = Variant.MB
    warnings: tuple = field(default=(), compare=False)

    def with_variant(self, variant) -> "RoomConfig":
        d = asdict(self)
        d["variant"] = Variant.parse(variant)
        return RoomConfig(**d)

    def swapped(self) -> "RoomConfig":
        """Same room with source and receiver positions exchanged."""
        d = asdict(self)
        d["rec_pos_m"], d["src_pos_m"] = self.src_pos_m, self.rec_pos_m
        return RoomConfig(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        d["warnings"] = list(self.warnings)
        for k in ("dims_m", "rec_pos_m", "src_pos_m", "t60_bands_s"):
            d[k] = [float(v) for v in d[k]]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RoomConfig":
        names = cls.__dataclass_fields__
        kw = {k: v for k, v in d.items() if k in names}
        for k in ("dims_m", "rec_pos_m", "src_pos_m", "t60_bands_s"):
            kw[k] = tuple(float(v) for v in kw[k])
        kw["variant"] = Variant.parse(kw.get("variant", "MB"))
        kw["warnings"] = tuple(kw.get("warnings", ()))
        kw["seed"] = int(kw["seed"])
        return cls(**kw)

    def check(self) -> None:
        """Raise ``AssertionError`` when any geometric invariant is violated."""
        rx, ry, rz = self.dims_m
        rec = np.asarray(self.rec_pos_m)
        src = np.asarray(self.src_pos_m)
        assert 3 <= rx <= 30 and 0.5 * rx <= ry <= rx and 2.5 <= rz <= 5
        assert 0.35 * rx <= rec[0] <= 0.65 * rx and 0.35 * ry <= rec[1] <= 0.65 * ry
        assert 1 <= rec[2] <= 2
        assert 0.5 <= np.linalg.norm(rec - src) <= 3
        assert np.all(src > 0) and np.all(src < self.dims_m)
        assert all(t > 0 for t in self.t60_bands_s)
        assert math.isclose(self.t60_scalar_s, float(np.mean(self.t60_bands_s)), rel_tol=1e-12)


def _draw_t60(rng: np.random.Generator, params: GammaParams, clamp) -> tuple[np.ndarray, list]:
    lo, hi = clamp
    raw = np.array([rng.gamma(k, theta) for k, theta in zip(params.shape_alpha, params.scale_beta)])
    flagged = [n for n, t in enumerate(raw) if not lo <= t <= hi]
    return np.clip(raw, lo, hi), flagged


def sample_t60_bands(params: GammaParams, rng_seed: int, clamp=None) -> np.ndarray:
    """Draw one reverberation time per band from ``Gamma(shape, scale)``.

    Draws outside ``clamp`` (default 0.05-3.0 s) are clipped to the nearest
    bound. Clipping rather than redrawing keeps each band mean within about
    1% of ``shape * scale``; redrawing the low tail would inflate the means of
    the 250 Hz to 1 kHz bands by 3-4%.
    """
    clamp = clamp or DEFAULT_SETTINGS.t60_clamp_s
    values, flagged = _draw_t60(np.random.default_rng(rng_seed), params, clamp)
    if flagged:
        log.debug("seed %d: T60 bands %s clipped to %s", rng_seed, flagged, clamp)
    return values


def _rotation_dir(yaw_deg: float, pitch_deg: float) -> np.ndarray:
    yaw, pitch = math.radians(yaw_deg), math.radians(pitch_deg)
    return np.array([math.cos(pitch) * math.cos(yaw),
                     math.cos(pitch) * math.sin(yaw),
                     math.sin(pitch)])


def sample_room(rng_seed: int, variant="MB", settings: Settings = DEFAULT_SETTINGS,
                config_id: str | None = None) -> RoomConfig:
    """Sample a room, receiver pose, source position and band T60 targets.

    Source placement: a heading is drawn uniformly, the source direction is
    that heading plus U(-45, 45) deg azimuth and U(-10, 10) deg elevation, at
    distance U(0.5, 3) m. The receiver is pointed at the source and then
    jittered by yaw U(-45, 45) deg and pitch U(-10, 10) deg. Draws that put the
    source outside the room are rejected.
    """
    variant = Variant.parse(variant)
    rng = np.random.default_rng(rng_seed)
    rx = rng.uniform(3.0, 30.0)
    ry = rx * rng.uniform(0.5, 1.0)
    rz = rng.uniform(2.5, 5.0)
    dims = np.array([rx, ry, rz])
    rec = np.array([rng.uniform(0.35 * rx, 0.65 * rx),
                    rng.uniform(0.35 * ry, 0.65 * ry),
                    rng.uniform(1.0, 2.0)])

    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        heading = rng.uniform(-180.0, 180.0)
        az = heading + rng.uniform(-45.0, 45.0)
        el = rng.uniform(-10.0, 10.0)
        dist = rng.uniform(0.5, 3.0)
        src = rec + dist * _rotation_dir(az, el)
        if np.all(src > 0) and np.all(src < dims):
            break
    else:
        raise PlacementFailure(f"seed {rng_seed}: no valid source position "
                               f"after {MAX_PLACEMENT_ATTEMPTS} attempts")

    to_src = src - rec
    bore_az = math.degrees(math.atan2(to_src[1], to_src[0]))
    bore_el = math.degrees(math.asin(to_src[2] / np.linalg.norm(to_src)))
    yaw = _wrap_deg(bore_az + rng.uniform(-45.0, 45.0))
    pitch = bore_el + rng.uniform(-10.0, 10.0)

    params = GammaParams.from_settings(settings)
    t60_rng = np.random.default_rng(mix_seed(rng_seed, 0x7460))
    t60, flagged = _draw_t60(t60_rng, params, settings.t60_clamp_s)
    notes = tuple(f"t60_band_{n}_clipped" for n in flagged)

    return RoomConfig(
        id=config_id if config_id is not None else f"room_{rng_seed:016x}",
        seed=int(rng_seed),
        dims_m=tuple(float(v) for v in dims),
        rec_pos_m=tuple(float(v) for v in rec),
        rec_yaw_deg=float(yaw),
        rec_pitch_deg=float(pitch),
        src_pos_m=tuple(float(v) for v in src),
        t60_bands_s=tuple(float(v) for v in t60),
        t60_scalar_s=float(np.mean(t60)),
        variant=variant,
        warnings=notes,
    )


def _wrap_deg(a: float) -> float:
    return (a + 180.0) % 360.0 - 180.0


class AbsorptionClampWarning(UserWarning):
    pass


def sabine_absorption(dims_m, t60_s: float, sabine_constant: float = DEFAULT_SETTINGS.sabine_constant) -> float:
    """Uniform wall absorption that gives ``t60_s`` under Sabine's formula.

    Values above 0.99 are clipped and an ``AbsorptionClampWarning`` is issued.

    >>> round(sabine_absorption((10, 10, 3), 0.5), 4)
    0.3019
    """
    rx, ry, rz = (float(v) for v in dims_m)
    if min(rx, ry, rz) <= 0 or t60_s <= 0:
        raise ValueError("dimensions and T60 must be positive")
    volume = rx * ry * rz
    surface = 2.0 * (rx * ry + rx * rz + ry * rz)
    alpha = sabine_constant * volume / (surface * t60_s)
    if alpha > 0.99:
        warnings.warn(f"Sabine absorption {alpha:.3f} clamped to 0.99",
                      AbsorptionClampWarning, stacklevel=2)
        alpha = 0.99
    return alpha


def gamma_nll(samples, shape: float, scale: float) -> float:
    """Mean negative log-likelihood of ``samples`` under Gamma(shape, scale)."""
    x = np.asarray(samples, dtype=float)
    return float(special.gammaln(shape) + shape * math.log(scale)
                 - (shape - 1.0) * np.mean(np.log(x)) + np.mean(x) / scale)


def fit_gamma(samples, max_iter: int = 500, tol: float = 1e-8) -> tuple[float, float]:
    """Maximum-likelihood (shape, scale) of a Gamma distribution.

    Starts from the moment-matching estimate and runs Newton's method on the
    profile likelihood in ``log(shape)``; the scale follows as ``mean / shape``.
    Stops when the gradient of the mean NLL drops below ``tol``.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or len(x) < 30:
        raise DegenerateData("fit_gamma needs at least 30 samples")
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise DegenerateData("samples must be finite and strictly positive")
    mean = float(np.mean(x))
    var = float(np.var(x))
    if var <= 0.0 or np.ptp(x) == 0.0:
        raise DegenerateData("samples are constant")

    # ln(k) - digamma(k) = s  at the optimum
    s = math.log(mean) - float(np.mean(np.log(x)))
    k = mean * mean / var
    for _ in range(max_iter):
        f = math.log(k) - special.digamma(k) - s
        if abs(f) < tol:
            break
        fprime = 1.0 / k - special.polygamma(1, k)
        step = f / (fprime * k)  # Newton step in u = log k
        k = k * math.exp(-max(min(step, 2.0), -2.0))
    return k, mean / k

"""Clean/degraded utterance pairs for speech-enhancement evaluation.

A 4 s non-silent chunk ``y`` is convolved with an onset-aligned RIR ``h`` and
mixed with noise ``n`` at a target SNR, under one of two signal models:

* ``A``: ``x = (y * h) + g n``  (reverberant speech, dry noise)
* ``B``: ``x = (y + g n) * h``  (both reverberated by the same RIR)

``g`` is chosen so the two mixed components have exactly the requested power
ratio, measured over the whole chunk.
"""
from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import signal

from .audio import read_audio, write_audio
from .errors import SilentReference, TooShort, ZeroNoise, ZeroSpeech
from .ism import Rir
from .seeding import mix_seed
from .settings import SAMPLE_RATE
from .validate import detect_onset

log = logging.getLogger(__name__)

CHUNK_S = 4.0
GATE_DBFS = -40.0
PEAK_CEILING_DBFS = -3.0
AUDIO_EXTENSIONS = (".wav", ".flac", ".ogg", ".aiff", ".aif")


class SignalModel(str, enum.Enum):
    REVERB_SPEECH_PLUS_NOISE = "A"
    REVERB_SUM = "B"

    @classmethod
    def parse(cls, name) -> "SignalModel":
        if isinstance(name, SignalModel):
            return name
        key = str(name).strip()
        if key.upper() in ("A", "B"):
            return cls(key.upper())
        return cls[key.upper()]


class Chunk(NamedTuple):
    start: int
    samples: np.ndarray
    fallback: bool


def _window_rms_db(x: np.ndarray, width: int, starts: np.ndarray) -> np.ndarray:
    csum = np.concatenate([[0.0], np.cumsum(x * x)])
    power = (csum[starts + width] - csum[starts]) / width
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.maximum(power, 0.0))


def pick_chunk(speech: np.ndarray, seed: int, sample_rate: int = SAMPLE_RATE,
               chunk_s: float = CHUNK_S, gate_dbfs: float = GATE_DBFS,
               hop_s: float = 0.01) -> Chunk:
    """Uniformly pick a ``chunk_s`` window whose RMS clears ``gate_dbfs``.

    Candidate starts lie on a ``hop_s`` grid plus the last possible start.
    When no window clears the gate the loudest one is returned with
    ``fallback=True``.
    """
    x = np.asarray(speech, dtype=float)
    width = int(round(chunk_s * sample_rate))
    if len(x) < width:
        raise TooShort(f"need {width} samples, got {len(x)}")
    hop = max(1, int(round(hop_s * sample_rate)))
    starts = np.unique(np.append(np.arange(0, len(x) - width + 1, hop), len(x) - width))
    level = _window_rms_db(x, width, starts)
    ok = np.nonzero(level >= gate_dbfs)[0]
    if len(ok) == 0:
        start = int(starts[int(np.argmax(level))])
        return Chunk(start, x[start:start + width].copy(), True)
    rng = np.random.default_rng(seed)
    start = int(starts[ok[rng.integers(len(ok))]])
    return Chunk(start, x[start:start + width].copy(), False)


class Mixture(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    noise_gain: float
    output_gain: float
    onset_shift: int


def _power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x)))


def _convolve(a: np.ndarray, h: np.ndarray) -> np.ndarray:
    # trailing zeros add nothing; dropping them lets a bare impulse take the exact path
    nz = np.flatnonzero(h)
    h = h[:nz[-1] + 1] if len(nz) else h[:1]
    if len(h) == 1:
        return a * h[0]
    return signal.oaconvolve(a, h)[:len(a)]


def align_rir(h, sample_rate: int = SAMPLE_RATE) -> tuple[np.ndarray, int]:
    """Drop everything before the detected onset so it lands on sample 0."""
    samples = h.samples if isinstance(h, Rir) else np.asarray(h, dtype=float)
    onset = detect_onset(samples, sample_rate_hz=sample_rate)
    return samples[onset:], onset


def make_mixture(y: np.ndarray, n: np.ndarray, h, snr_db: float, model="A",
                 sample_rate: int = SAMPLE_RATE,
                 peak_ceiling_dbfs: float | None = PEAK_CEILING_DBFS) -> Mixture:
    """Degraded ``x`` and time-aligned reference for one clean chunk.

    Both outputs share one gain that keeps the louder peak at or below
    ``peak_ceiling_dbfs`` (``None`` disables it).
    """
    model = SignalModel.parse(model)
    y = np.asarray(y, dtype=float)
    n = np.asarray(n, dtype=float)
    if len(n) != len(y):
        raise ValueError("speech and noise chunks differ in length")
    if isinstance(h, Rir) and h.sample_rate_hz != sample_rate:
        raise ValueError("RIR sample rate differs from the speech sample rate")
    h_aligned, onset = align_rir(h, sample_rate)

    p_n = _power(n)
    if p_n == 0.0:
        raise ZeroNoise("noise chunk is silent")
    if model is SignalModel.REVERB_SPEECH_PLUS_NOISE:
        reverberant = _convolve(y, h_aligned)
        p_s = _power(reverberant)
        if p_s == 0.0:
            raise ZeroSpeech("speech chunk is silent")
        g = math.sqrt(p_s / (p_n * 10.0 ** (snr_db / 10.0)))
        x = reverberant + g * n
    else:
        p_s = _power(y)
        if p_s == 0.0:
            raise ZeroSpeech("speech chunk is silent")
        g = math.sqrt(p_s / (p_n * 10.0 ** (snr_db / 10.0)))
        x = _convolve(y + g * n, h_aligned)

    gain = 1.0
    if peak_ceiling_dbfs is not None:
        peak = max(np.max(np.abs(x)), np.max(np.abs(y)))
        ceiling = 10.0 ** (peak_ceiling_dbfs / 20.0)
        if peak > ceiling:
            gain = ceiling / peak
    if gain != 1.0:
        x = x * gain
        y = y * gain
    return Mixture(x, y, g, gain, onset)


def achieved_snr_db(y, n, h, noise_gain: float, model="A", sample_rate: int = SAMPLE_RATE) -> float:
    """Power ratio of the two components as actually mixed."""
    model = SignalModel.parse(model)
    h_aligned, _ = align_rir(h, sample_rate)
    speech = _convolve(np.asarray(y, float), h_aligned) if model is SignalModel.REVERB_SPEECH_PLUS_NOISE else y
    return 10.0 * math.log10(_power(speech) / _power(noise_gain * np.asarray(n, float)))


def si_sdr(reference: np.ndarray, estimate: np.ndarray, cap_db: float = 100.0) -> float:
    """Scale-invariant signal-to-distortion ratio in dB."""
    r = np.asarray(reference, dtype=float)
    e = np.asarray(estimate, dtype=float)
    if r.shape != e.shape:
        raise ValueError("reference and estimate differ in length")
    rr = float(np.dot(r, r))
    if rr == 0.0:
        raise SilentReference("reference is silent")
    target = (float(np.dot(e, r)) / rr) * r
    residual = e - target
    num = float(np.dot(target, target))
    den = float(np.dot(residual, residual))
    if den == 0.0 or num / den > 10.0 ** (cap_db / 10.0):
        return cap_db
    if num == 0.0:
        return -cap_db
    return 10.0 * math.log10(num / den)


def log_spectral_distance(reference: np.ndarray, estimate: np.ndarray, n_fft: int = 1024,
                          floor_db: float = -80.0) -> float:
    """Mean over frames of the RMS (over bins) dB difference of power spectra."""
    r = np.asarray(reference, dtype=float)
    e = np.asarray(estimate, dtype=float)
    if r.shape != e.shape:
        raise ValueError("reference and estimate differ in length")
    if not np.any(r):
        raise SilentReference("reference is silent")

    def spec_db(x):
        _, _, z = signal.stft(x, nperseg=n_fft, noverlap=n_fft // 2, window="hann",
                              boundary=None, padded=False)
        with np.errstate(divide="ignore"):
            return np.maximum(10.0 * np.log10(np.abs(z) ** 2), floor_db)

    diff = spec_db(r) - spec_db(e)
    return float(np.mean(np.sqrt(np.mean(diff ** 2, axis=0))))


@dataclass(frozen=True)
class MixtureRecord:
    speech_path: str
    noise_path: str
    rir_path: str
    chunk_start_s: float
    noise_start_s: float
    snr_db: float
    model: str
    onset_shift_samples: int
    output_gain: float
    seed: int
    chunk_fallback: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _noise_chunk(noise: np.ndarray, width: int, rng: np.random.Generator) -> tuple[int, np.ndarray]:
    if len(noise) < width:
        noise = np.tile(noise, int(math.ceil(width / len(noise))))
        return 0, noise[:width]
    start = int(rng.integers(0, len(noise) - width + 1))
    return start, noise[start:start + width]


def _list_audio(directory) -> list[Path]:
    files = sorted(p for p in Path(directory).rglob("*") if p.suffix.lower() in AUDIO_EXTENSIONS)
    if not files:
        raise FileNotFoundError(f"no audio files under {directory}")
    return files


def mixture_from_files(speech_path, noise_path, rir_path, seed: int, model="A",
                       snr_range=(0.0, 30.0), snr_db: float | None = None,
                       sample_rate: int = SAMPLE_RATE) -> tuple[MixtureRecord, Mixture]:
    """Build one pair; every random choice derives from ``seed``."""
    width = int(round(CHUNK_S * sample_rate))
    speech, _ = read_audio(speech_path, sample_rate)
    noise, _ = read_audio(noise_path, sample_rate)
    rir, _ = read_audio(rir_path, sample_rate)
    chunk = pick_chunk(speech, mix_seed(seed, 1), sample_rate)
    rng = np.random.default_rng(mix_seed(seed, 2))
    noise_start, n = _noise_chunk(noise, width, rng)
    if snr_db is None:
        snr_db = float(rng.uniform(*snr_range))
    mix = make_mixture(chunk.samples, n, rir, snr_db, model, sample_rate)
    record = MixtureRecord(
        speech_path=str(speech_path), noise_path=str(noise_path), rir_path=str(rir_path),
        chunk_start_s=chunk.start / sample_rate, noise_start_s=noise_start / sample_rate,
        snr_db=snr_db, model=SignalModel.parse(model).value,
        onset_shift_samples=mix.onset_shift, output_gain=mix.output_gain,
        seed=int(seed), chunk_fallback=chunk.fallback,
    )
    return record, mix


def reproduce(record: MixtureRecord | dict, sample_rate: int = SAMPLE_RATE) -> Mixture:
    """Rebuild the (x, y) pair described by a manifest record."""
    if isinstance(record, dict):
        record = MixtureRecord(**record)
    _, mix = mixture_from_files(record.speech_path, record.noise_path, record.rir_path,
                                record.seed, record.model, snr_db=record.snr_db,
                                sample_rate=sample_rate)
    return mix


def build_mixtures(speech_dir, noise_dir, rir_dir, count: int, seed: int, model="A",
                   out_dir="mixtures", snr_range=(0.0, 30.0),
                   sample_rate: int = SAMPLE_RATE) -> list[MixtureRecord]:
    """Write ``count`` pairs plus ``mixtures.jsonl`` under ``out_dir``.

    Speech, noise and RIR files are drawn uniformly with replacement.
    """
    speech_files = _list_audio(speech_dir)
    noise_files = _list_audio(noise_dir)
    rir_files = _list_audio(rir_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(count):
        item_seed = mix_seed(seed, i)
        rng = np.random.default_rng(mix_seed(item_seed, 0))
        sp = speech_files[rng.integers(len(speech_files))]
        nz = noise_files[rng.integers(len(noise_files))]
        rf = rir_files[rng.integers(len(rir_files))]
        record, mix = mixture_from_files(sp, nz, rf, item_seed, model, snr_range,
                                         sample_rate=sample_rate)
        pair = out / f"{i:06d}"
        write_audio(pair / "x.wav", mix.x, sample_rate)
        write_audio(pair / "y.wav", mix.y, sample_rate)
        if record.chunk_fallback:
            log.warning("%s: no chunk cleared the %.0f dBFS gate", sp, GATE_DBFS)
        records.append(record)
    with open(out / "mixtures.jsonl", "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    return records

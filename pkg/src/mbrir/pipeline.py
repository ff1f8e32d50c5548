"""Batch generation: sample rooms, render, validate, write audio and manifest.

Each RIR is a pure function of its ``RoomConfig`` and the render options, so
the output bytes do not depend on the worker count or completion order. Jobs
run on a process pool; results come back over ``as_completed`` and the
manifest is written once, sorted by id, after the pool drains.
"""
from __future__ import annotations

import hashlib
import json
import logging
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import write_audio
from .directivity import DirectivityTable, ReceiverFilterSet
from .errors import InsufficientDecay, MbrirError, OutDirUnwritable
from .ism import Rir
from .render import RenderOptions, render
from .rooms import RoomConfig, Variant, sample_room
from .seeding import mix_seed
from .settings import ORIENTATION_INTERPRETATION
from .validate import decay_fit, detect_onset

log = logging.getLogger(__name__)

WORKERS_ENV = "MBRIR_WORKERS"
SPLIT_FRACTIONS = (0.70, 0.15, 0.15)
SPLIT_NAMES = ("train", "val", "test")
GATE_BANDS = (1, 2, 3, 4)          # 250, 500, 1000, 2000 Hz
GATE_TOLERANCE = 0.20
_SPLIT_SALT = 0x5B117
_TIMING_FIELDS = ("render_time_s",)


def default_workers() -> int:
    """Worker count from ``MBRIR_WORKERS``, else the CPU count."""
    value = os.environ.get(WORKERS_ENV)
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


def _array_digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a, dtype=float)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def render_params_digest(variant, opts: RenderOptions = RenderOptions(),
                         src_table: DirectivityTable | None = None,
                         rec_filters: ReceiverFilterSet | None = None) -> str:
    """Stable hash of every knob that can change the rendered samples."""
    variant = Variant.parse(variant)
    fields = {"variant": variant.value, **opts.digest_fields()}
    if variant is Variant.SRC_REC_MB:
        if src_table is None:
            fields["src_table"] = "bundled-default"
        else:
            band = src_table.band_gains if src_table.per_band else np.zeros(0)
            fields["src_table"] = _array_digest(src_table.azimuth_grid_deg,
                                                src_table.elevation_grid_deg,
                                                src_table.gains, band)
    if variant in (Variant.REC_MB, Variant.SRC_REC_MB):
        if rec_filters is None:
            fields["rec_filters"] = "synthetic-sphere-240x128"
        else:
            fields["rec_filters"] = _array_digest(rec_filters.directions,
                                                  rec_filters.impulse_responses)
            fields["rec_filters_rate"] = rec_filters.sample_rate_hz
    blob = json.dumps(fields, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def assign_splits(ids, master_seed: int, fractions=SPLIT_FRACTIONS) -> dict:
    """Seeded shuffle, then the first 70% train, next 15% val, rest test."""
    ids = sorted(ids)
    order = np.random.default_rng(mix_seed(master_seed, _SPLIT_SALT)).permutation(len(ids))
    n_train = int(round(fractions[0] * len(ids)))
    n_val = int(round(fractions[1] * len(ids)))
    labels = {}
    for rank, k in enumerate(order):
        name = SPLIT_NAMES[0] if rank < n_train else SPLIT_NAMES[1] if rank < n_train + n_val else SPLIT_NAMES[2]
        labels[ids[k]] = name
    return labels


def measure(rir: Rir, config: RoomConfig) -> dict:
    """Band T60 estimates, onset and the soft T60 gate for one render."""
    bands = []
    for b in range(len(config.t60_bands_s)):
        try:
            bands.append(decay_fit(rir, band=b).t60_s)
        except InsufficientDecay:
            bands.append(None)
    try:
        broadband = decay_fit(rir).t60_s
    except InsufficientDecay:
        broadband = None
    if config.variant is Variant.SB:
        checks = [(broadband, config.t60_scalar_s)]
    else:
        checks = [(bands[b], config.t60_bands_s[b]) for b in GATE_BANDS]
    passed = all(m is not None and abs(m - t) <= GATE_TOLERANCE * t for m, t in checks)
    return {"measured_t60_bands_s": bands, "measured_t60_broadband_s": broadband,
            "onset_sample": detect_onset(rir), "t60_gate_passed": passed}


@dataclass(frozen=True)
class RenderJob:
    config: RoomConfig
    out_dir: str
    opts: RenderOptions = RenderOptions()
    src_table: DirectivityTable | None = None
    rec_filters: ReceiverFilterSet | None = None
    inject_failure: bool = field(default=False, compare=False)

    @property
    def rir_path(self) -> Path:
        return Path(self.out_dir) / "rirs" / f"{self.config.id}.wav"


def run_job(job: RenderJob) -> dict:
    """Render, validate and write one RIR; failures come back as records."""
    cfg = job.config
    record = cfg.to_dict()
    record["rir_path"] = str(job.rir_path.relative_to(job.out_dir))
    record["orientation_interpretation"] = ORIENTATION_INTERPRETATION
    record["render_params_digest"] = render_params_digest(cfg.variant, job.opts,
                                                          job.src_table, job.rec_filters)
    start = time.perf_counter()
    try:
        if job.inject_failure:
            raise RuntimeError("injected failure")
        rir = render(cfg, opts=job.opts, src_table=job.src_table, rec_filters=job.rec_filters)
        if not np.all(np.isfinite(rir.samples)):
            raise MbrirError("non-finite samples")
        record.update(measure(rir, cfg))
        record["warnings"] = list(cfg.warnings) + list(rir.meta.get("warnings", []))
        record["n_images"] = rir.meta.get("n_images")
        if "src_table_per_band" in rir.meta and cfg.variant is Variant.SRC_REC_MB:
            record["src_weighting"] = "per-band" if rir.meta["src_table_per_band"] else "broadband"
        write_audio(job.rir_path, rir.samples, rir.sample_rate_hz)
        record["status"] = "ok"
    except Exception as exc:  # per-record isolation: one bad room never stops the batch
        record["status"] = "failed"
        record["error"] = f"{type(exc).__name__}: {exc}"
        record["rir_path"] = None
    record["render_time_s"] = time.perf_counter() - start
    return record


def _check_writable(out_dir: Path) -> None:
    try:
        (out_dir / "rirs").mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise OutDirUnwritable(f"cannot write to {out_dir}: {exc}") from exc


def _pool_context():
    methods = multiprocessing.get_all_start_methods()
    return multiprocessing.get_context("fork" if "fork" in methods else None)


def run_jobs(jobs: list[RenderJob], workers: int = 1) -> list[dict]:
    """Run jobs in-process (``workers == 1``) or on a process pool."""
    if workers <= 1 or len(jobs) <= 1:
        return [run_job(j) for j in jobs]
    results = []
    with ProcessPoolExecutor(max_workers=workers, mp_context=_pool_context()) as pool:
        futures = [pool.submit(run_job, j) for j in jobs]
        for fut in as_completed(futures):
            results.append(fut.result())
    return results


def write_manifest(records: list[dict], path) -> None:
    with open(path, "w") as fh:
        for r in sorted(records, key=lambda r: r["id"]):
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def read_manifest(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def comparable(record: dict) -> dict:
    """Record without its wall-clock fields, for reproducibility checks."""
    return {k: v for k, v in record.items() if k not in _TIMING_FIELDS}


def render_configs(configs, out_dir, variant=None, workers: int | None = None,
                   opts: RenderOptions = RenderOptions(),
                   src_table: DirectivityTable | None = None,
                   rec_filters: ReceiverFilterSet | None = None,
                   master_seed: int = 0, fail_ids=()) -> list[dict]:
    """Render given configs into ``out_dir``; returns records sorted by id.

    ``fail_ids`` makes the named jobs raise before rendering, which is how
    crash isolation is exercised.
    """
    out = Path(out_dir)
    _check_writable(out)
    if variant is not None:
        configs = [c.with_variant(variant) for c in configs]
    ids = [c.id for c in configs]
    if len(set(ids)) != len(ids):
        raise ValueError("config ids must be unique")
    jobs = [RenderJob(c, str(out), opts, src_table, rec_filters, c.id in set(fail_ids))
            for c in configs]
    records = run_jobs(jobs, workers if workers is not None else default_workers())
    splits = assign_splits(ids, master_seed)
    for r in records:
        r["split"] = splits[r["id"]]
    records.sort(key=lambda r: r["id"])
    write_manifest(records, out / "manifest.jsonl")
    n_failed = sum(r["status"] != "ok" for r in records)
    if n_failed:
        log.warning("%d of %d renders failed", n_failed, len(records))
    return records


def sample_configs(count: int, master_seed: int, variant="MB", settings=None) -> list[RoomConfig]:
    """``count`` rooms; room ``i`` uses seed ``mix_seed(master_seed, i)``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    kw = {} if settings is None else {"settings": settings}
    return [sample_room(mix_seed(master_seed, i), variant, config_id=f"{i:06d}", **kw)
            for i in range(count)]


def generate(count: int, master_seed: int, variant="MB", out_dir="dataset",
             workers: int | None = None, opts: RenderOptions = RenderOptions(),
             src_table: DirectivityTable | None = None,
             rec_filters: ReceiverFilterSet | None = None, fail_ids=()) -> list[dict]:
    """Sample ``count`` rooms and render them; see :func:`render_configs`."""
    configs = sample_configs(count, master_seed, variant, opts.settings)
    return render_configs(configs, out_dir, None, workers, opts, src_table, rec_filters,
                          master_seed, fail_ids)


def shared_geometry_export(configs, variants=tuple(Variant)) -> dict:
    """One job list per variant, all built from the same room configs."""
    return {Variant.parse(v): [c.with_variant(v) for c in configs] for v in variants}

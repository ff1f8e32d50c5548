"""Command-line entry point: ``mbrir <verb> [options]``.

Verbs
-----
sample-rooms   write sampled room configs as JSON lines
render         render configs to WAV files plus ``manifest.jsonl``
validate       estimate band T60s and onset for existing RIR files
mix            build clean/degraded speech pairs
fit-gamma      fit per-band Gamma distributions to measured T60s

Exit status is 0 on success, 1 when any record fails a hard gate and 2 on
usage errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audio import read_audio
from .directivity import read_directivity_table, read_receiver_set
from .errors import InsufficientDecay, MbrirError, OutDirUnwritable
from .ism import Rir
from .mixture import build_mixtures
from .pipeline import default_workers, render_configs, sample_configs
from .render import RenderOptions
from .rooms import RoomConfig, Variant, fit_gamma
from .settings import BAND_CENTERS_HZ, load_settings
from .validate import decay_fit, detect_onset

log = logging.getLogger("mbrir")

EXIT_OK, EXIT_GATE, EXIT_USAGE = 0, 1, 2
VARIANT_CHOICES = [v.cli_name for v in Variant]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"\n{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mbrir", description=__doc__.split("\n\n")[0],
                formatter_class=argparse.RawDescriptionHelpFormatter,
                epilog=__doc__.split("\n\n", 1)[1])
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--config", type=Path, help="YAML settings file")
    p.add_argument("--log-level", default="INFO",
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", metavar="VERB", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("sample-rooms", help="sample room configurations")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, dest="verb_seed")
    s.add_argument("--variant", choices=VARIANT_CHOICES, default="mb")
    s.add_argument("--out", type=Path, required=True, help="output .jsonl file")

    r = sub.add_parser("render", help="render configs to RIR files")
    r.add_argument("--configs", type=Path, required=True)
    r.add_argument("--variant", choices=VARIANT_CHOICES,
                   help="override the variant stored in each config")
    r.add_argument("--out", type=Path, required=True, help="output directory")
    r.add_argument("--workers", type=int, default=None,
                   help="process count (default: $MBRIR_WORKERS or CPU count)")
    r.add_argument("--src-table", type=Path, help="source directivity table")
    r.add_argument("--rec-filters", type=Path, help="receiver filter set directory or index")
    r.add_argument("--interp", choices=["sinc", "nearest"], default="sinc")

    v = sub.add_parser("validate", help="estimate T60 and onset of RIR files")
    v.add_argument("--rir", type=Path, nargs="+", required=True)
    v.add_argument("--band", type=int, help="only this 0-based band")
    v.add_argument("--report", type=Path, required=True, help="output .jsonl report")

    m = sub.add_parser("mix", help="build speech/noise/RIR mixtures")
    m.add_argument("--speech-dir", type=Path, required=True)
    m.add_argument("--noise-dir", type=Path, required=True)
    m.add_argument("--rir-dir", type=Path, required=True)
    m.add_argument("--count", type=int, required=True)
    m.add_argument("--seed", type=int, dest="verb_seed")
    m.add_argument("--model", choices=["a", "b", "A", "B"], default="a")
    m.add_argument("--out", type=Path, required=True)

    g = sub.add_parser("fit-gamma", help="fit Gamma parameters per band")
    g.add_argument("--in", dest="input", type=Path, required=True,
                   help="two-column band,seconds file (band as index or centre Hz)")
    return p


def _seed(args) -> int:
    verb_seed = getattr(args, "verb_seed", None)
    return args.seed if verb_seed is None else verb_seed


def _cmd_sample_rooms(args, settings) -> int:
    configs = sample_configs(args.count, _seed(args), args.variant, settings)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w") as fh:
        for c in configs:
            fh.write(json.dumps(c.to_dict(), sort_keys=True) + "\n")
    log.info("wrote %d configs to %s", len(configs), args.out)
    return EXIT_OK


def _cmd_render(args, settings) -> int:
    with open(args.configs) as fh:
        configs = [RoomConfig.from_dict(json.loads(line)) for line in fh if line.strip()]
    src = read_directivity_table(args.src_table) if args.src_table else None
    rec = read_receiver_set(args.rec_filters) if args.rec_filters else None
    opts = RenderOptions(interp=args.interp, settings=settings)
    workers = args.workers if args.workers is not None else default_workers()
    records = render_configs(configs, args.out, args.variant, workers, opts, src, rec,
                             master_seed=args.seed)
    failed = [r["id"] for r in records if r["status"] != "ok"]
    soft = sum(1 for r in records if r["status"] == "ok" and not r["t60_gate_passed"])
    log.info("rendered %d, failed %d, outside T60 tolerance %d",
             len(records) - len(failed), len(failed), soft)
    return EXIT_GATE if failed else EXIT_OK


def _validate_one(path: Path, band: int | None) -> dict:
    x, fs = read_audio(path)
    rir = Rir(fs, x)
    report = {"path": str(path), "sample_rate_hz": fs, "onset_sample": detect_onset(rir)}
    bands = [band] if band is not None else range(len(BAND_CENTERS_HZ))
    t60, extrapolated = {}, {}
    for b in bands:
        try:
            fit = decay_fit(rir, band=b)
            t60[str(b)], extrapolated[str(b)] = fit.t60_s, fit.extrapolated
        except InsufficientDecay:
            t60[str(b)], extrapolated[str(b)] = None, None
    report["t60_bands_s"] = t60
    report["extrapolated"] = extrapolated
    report["ok"] = all(v is not None for v in t60.values())
    return report


def _cmd_validate(args, settings) -> int:
    reports = []
    for path in args.rir:
        try:
            reports.append(_validate_one(path, args.band))
        except (MbrirError, OSError, ValueError) as exc:
            reports.append({"path": str(path), "ok": False, "error": f"{type(exc).__name__}: {exc}"})
    args.report.parent.mkdir(parents=True, exist_ok=True)
    with open(args.report, "w") as fh:
        for r in reports:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    return EXIT_OK if all(r["ok"] for r in reports) else EXIT_GATE


def _cmd_mix(args, settings) -> int:
    records = build_mixtures(args.speech_dir, args.noise_dir, args.rir_dir, args.count,
                             _seed(args), args.model, args.out)
    log.info("wrote %d mixtures to %s", len(records), args.out)
    return EXIT_OK


def _band_index(label: str) -> int:
    value = float(label)
    if value in BAND_CENTERS_HZ:
        return BAND_CENTERS_HZ.index(value)
    if value.is_integer() and 0 <= value < len(BAND_CENTERS_HZ):
        return int(value)
    raise ValueError(f"unknown band {label!r}")


def read_t60_table(path) -> dict[int, np.ndarray]:
    """Group a ``band, seconds`` file by band; a non-numeric first row is a header."""
    samples: dict[int, list] = {}
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            row = [c.strip() for c in row if c.strip()]
            if not row or row[0].startswith("#"):
                continue
            try:
                b, t = _band_index(row[0]), float(row[1])
            except ValueError:
                if i == 0:
                    continue
                raise
            samples.setdefault(b, []).append(t)
    return {b: np.asarray(v) for b, v in sorted(samples.items())}


def _cmd_fit_gamma(args, settings) -> int:
    table = read_t60_table(args.input)
    print("band_hz,shape,scale")
    for b, values in table.items():
        shape, scale = fit_gamma(values)
        print(f"{BAND_CENTERS_HZ[b]:g},{shape:.6g},{scale:.6g}")
    return EXIT_OK


COMMANDS = {
    "sample-rooms": _cmd_sample_rooms,
    "render": _cmd_render,
    "validate": _cmd_validate,
    "mix": _cmd_mix,
    "fit-gamma": _cmd_fit_gamma,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format='{"time":"%(asctime)s","level":"%(levelname)s",'
                               '"logger":"%(name)s","msg":"%(message)s"}')
    try:
        settings = load_settings(args.config)
        return COMMANDS[args.verb](args, settings)
    except (MbrirError, OSError, ValueError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        usage = isinstance(exc, OutDirUnwritable) or not isinstance(exc, MbrirError)
        return EXIT_USAGE if usage else EXIT_GATE


def dispatch(argv) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())

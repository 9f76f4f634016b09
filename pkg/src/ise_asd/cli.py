"""Command-line front end: mix, enhance, evaluate, calibrate.

Exit codes: 0 success, 1 usage, 2 I/O, 3 pipeline (pitch or calibration),
4 partial batch failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import re
import shlex
import subprocess
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import (
    MixSpec,
    detect_vuv,
    load_vuv_labels,
    load_wav,
    mix_at_snr,
    plan_frames,
    snr_db,
    write_wav,
)
from .calibrate import (
    calibrate_gains,
    load_training_manifest,
    read_profile_json,
    write_profile_json,
    write_trace_csv,
)
from .enhance import (
    EnhancementConfig,
    GainProfile,
    builtin_profiles,
    enhance_utterance,
    run_pipeline,
)
from .errors import (
    AudioFormatError,
    AudioIOError,
    CalibrationImpossibleError,
    ContractError,
    IseError,
    PitchUnavailableError,
)
from .metrics import (
    ANOVA_FIELDS,
    SUMMARY_FIELDS,
    EstoiReference,
    EvalRecord,
    anova_by_condition,
    attach_deltas,
    summarize,
    write_records_csv,
    write_table_csv,
)
from .pitch import estimate_pitch_track

log = logging.getLogger("ise_asd")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_PIPELINE, EXIT_PARTIAL = 0, 1, 2, 3, 4
METHODS = ("unprocessed", "unit", "gtf_f0", "ise_asd")
IDENTITY_TOLERANCE = 1e-6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _resolve_profile(spec: str | None, default: str = "ise_asd") -> GainProfile:
    spec = spec or default
    for p in builtin_profiles():
        if p.name == spec:
            return p
    path = Path(spec)
    if path.suffix == ".json":
        if not path.exists():
            raise AudioIOError(f"profile file {path} not found")
        return read_profile_json(path)
    raise UsageError(f"unknown profile {spec!r}; use ise_asd, gtf_f0, unit or a JSON file")


# ---------------------------------------------------------------------- mix


def cmd_mix(args) -> int:
    clean = load_wav(args.clean)
    noise = load_wav(args.noise)
    spec = MixSpec(args.snr, noise, args.offset, args.random_offset, args.seed)
    mixed = mix_at_snr(clean, spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    scale = write_wav(out, mixed)
    _write_json(
        out.with_suffix(".json"),
        {
            "clean": str(args.clean),
            "noise": str(args.noise),
            "target_snr_db": args.snr,
            "achieved_snr_db": round(snr_db(clean, mixed), 6),
            "snr_convention": "global",
            "seed": args.seed,
            "random_offset": args.random_offset,
            "scale_factor": scale,
        },
    )
    return EXIT_OK


# ------------------------------------------------------------------ enhance


def cmd_enhance(args) -> int:
    w = load_wav(args.input)
    plan = plan_frames(w)
    mask = load_vuv_labels(args.vuv, plan) if args.vuv else None
    profile = _resolve_profile(args.profile)
    cfg = EnhancementConfig(profile=profile, bandwidth_rule=args.bandwidth_rule)
    result = run_pipeline(w, mask, cfg, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    meta = dict(result.metadata)
    meta["input"] = str(args.input)
    meta["seed"] = args.seed
    meta["scale_factor"] = write_wav(out, result.waveform)
    code = EXIT_OK
    if args.verify_identity:
        n = plan.frame_length
        interior = slice(n, max(n, len(w) - n))
        err = float(np.max(np.abs(result.waveform.samples - w.samples)[interior], initial=0.0))
        meta["identity_max_error"] = err
        if err >= IDENTITY_TOLERANCE:
            print(f"identity check failed: max error {err:.3e}", file=sys.stderr)
            code = EXIT_PIPELINE
    if args.pitch_csv and result.track is not None:
        result.track.to_csv(args.pitch_csv)
    _write_json(out.with_suffix(".json"), meta)
    if not meta["pitch_available"]:
        print(f"warning: pitch unavailable for {args.input}; input copied through", file=sys.stderr)
        return EXIT_PIPELINE
    return code


# ----------------------------------------------------------------- evaluate


@dataclass
class ManifestRow:
    clean_path: Path
    vuv_path: Path | None
    noise_path: Path
    snr_db: list
    methods: list


@dataclass
class ExperimentManifest:
    rows: list
    out_dir: Path
    seed: int = 0
    profiles: dict = field(default_factory=dict)


def _split_list(text):
    return [t for t in re.split(r"[;| ]+", text.strip()) if t]


def read_manifest(path, out_dir, seed=0, extra_profiles=None) -> ExperimentManifest:
    """CSV `clean_path,vuv_path,noise_path,snr_db,methods`; list-valued
    fields are ';'-separated and relative paths resolve against the manifest."""
    path = Path(path)
    base = path.parent
    profiles = {p.name: p for p in builtin_profiles()}
    profiles.update(extra_profiles or {})
    rows = []
    with open(path, newline="") as fh:
        for i, rec in enumerate(csv.DictReader(fh), start=2):
            try:
                clean = base / rec["clean_path"]
                noise = base / rec["noise_path"]
                vuv = base / rec["vuv_path"] if rec.get("vuv_path") else None
                snrs = [float(s) for s in _split_list(rec["snr_db"])]
                methods = _split_list(rec.get("methods") or "unprocessed;ise_asd")
            except (KeyError, ValueError) as exc:
                raise UsageError(f"{path}:{i}: malformed manifest row ({exc})") from exc
            for m in methods:
                if m != "unprocessed" and m not in profiles:
                    raise UsageError(f"{path}:{i}: unknown method {m!r}")
            for p in [clean, noise] + ([vuv] if vuv else []):
                if not p.exists():
                    raise AudioIOError(f"{path}:{i}: {p} not found")
            rows.append(ManifestRow(clean, vuv, noise, snrs, methods))
    return ExperimentManifest(rows, Path(out_dir), seed, profiles)


def _pesq(command, clean, degraded):
    with tempfile.TemporaryDirectory() as tmp:
        ref, deg = Path(tmp) / "ref.wav", Path(tmp) / "deg.wav"
        write_wav(ref, clean)
        write_wav(deg, degraded)
        argv = [a.format(ref=ref, deg=deg) for a in shlex.split(command)]
        out = subprocess.run(argv, capture_output=True, text=True, check=True).stdout
    numbers = re.findall(r"[-+]?\d+\.\d+", out)
    return float(numbers[-1]) if numbers else math.nan


def _run_cell(task):
    """Score every method of one (utterance, noise, snr) cell."""
    row, snr, cell_seed, profiles, pesq_command, bandwidth_rule = task
    clean = load_wav(row.clean_path)
    noise = load_wav(row.noise_path)
    mix_seed, pitch_seed = np.random.SeedSequence(cell_seed).generate_state(2)
    noisy = mix_at_snr(clean, MixSpec(snr, noise, random_offset=True, seed=int(mix_seed)))
    plan = plan_frames(noisy)
    mask = load_vuv_labels(row.vuv_path, plan) if row.vuv_path else detect_vuv(clean, plan)
    ref = EstoiReference(clean)
    utt, noise_name = row.clean_path.stem, row.noise_path.stem
    track = None
    if any(m != "unprocessed" for m in row.methods) and mask.voiced.any():
        try:
            track = estimate_pitch_track(noisy, plan, mask, seed=int(pitch_seed))
        except PitchUnavailableError:
            track = None
    records = []
    for method in row.methods:
        if method == "unprocessed":
            out = noisy
        else:
            cfg = EnhancementConfig(profile=profiles[method], bandwidth_rule=bandwidth_rule)
            out = enhance_utterance(noisy, mask, track, cfg, plan)
        rec = EvalRecord(utt, noise_name, snr, method, ref.score(out))
        if pesq_command:
            rec.pesq = _pesq(pesq_command, clean, out)
        records.append(rec)
    return records


def evaluate_manifest(manifest: ExperimentManifest, jobs=1, pesq_command=None, bandwidth_rule="fixed"):
    tasks = []
    for r, row in enumerate(manifest.rows):
        for s, snr in enumerate(row.snr_db):
            cell_seed = [manifest.seed, r, s]
            tasks.append((row, snr, cell_seed, manifest.profiles, pesq_command, bandwidth_rule))
    records, failures = [], []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_cell, t) for t in tasks]
            outcomes = []
            for f in futures:
                try:
                    outcomes.append((f.result(), None))
                except Exception as exc:  # noqa: BLE001 - recorded per cell
                    outcomes.append((None, exc))
    else:
        outcomes = []
        for t in tasks:
            try:
                outcomes.append((_run_cell(t), None))
            except Exception as exc:  # noqa: BLE001 - recorded per cell
                outcomes.append((None, exc))
    for task, (recs, exc) in zip(tasks, outcomes):
        if exc is None:
            records.extend(recs)
        else:
            row, snr = task[0], task[1]
            failures.append(
                {"utterance": row.clean_path.stem, "noise": row.noise_path.stem, "snr_db": snr, "error": repr(exc)}
            )
    attach_deltas(records)
    return records, failures


def write_reports(records, failures, out_dir, pesq=False) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_records_csv(records, out_dir / "records.csv")
    if records:
        write_table_csv(summarize(records), SUMMARY_FIELDS, out_dir / "summary.csv")
        rows = anova_by_condition(records, "estoi")
        if pesq:
            rows += anova_by_condition(records, "pesq")
        write_table_csv(rows, ANOVA_FIELDS, out_dir / "anova.csv")
    if pesq:
        with open(out_dir / "pesq.csv", "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["utterance", "noise", "snr_db", "method", "pesq"])
            for r in sorted(records, key=lambda r: (r.noise, r.snr_db, r.method, r.utterance)):
                out.writerow([r.utterance, r.noise, f"{r.snr_db:g}", r.method, f"{r.pesq:.4f}"])
    with open(out_dir / "failures.csv", "w", newline="") as fh:
        out = csv.DictWriter(fh, ["utterance", "noise", "snr_db", "error"], lineterminator="\n")
        out.writeheader()
        out.writerows(failures)


def cmd_evaluate(args) -> int:
    extra = {}
    if args.profile:
        p = _resolve_profile(args.profile)
        extra[p.name] = p
    manifest = read_manifest(args.manifest, args.out_dir, args.seed, extra)
    records, failures = evaluate_manifest(manifest, args.jobs, args.pesq_cmd, args.bandwidth_rule)
    write_reports(records, failures, manifest.out_dir, pesq=bool(args.pesq_cmd))
    for f in failures:
        print(f"cell failed: {f['utterance']} {f['noise']} {f['snr_db']:g} dB: {f['error']}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------- calibrate


def cmd_calibrate(args) -> int:
    items = load_training_manifest(args.manifest, seed=args.seed)
    cfg = EnhancementConfig(bandwidth_rule=args.bandwidth_rule)
    try:
        run = calibrate_gains(items, cfg, size=args.filters, step=args.step, seed=args.seed)
    except CalibrationImpossibleError as exc:
        print(f"calibration impossible: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_profile_json(run.profile, out / "profile.json")
    write_trace_csv(run, out / "trace.csv")
    _write_json(
        out / "calibration.json",
        {
            "baseline_mean_estoi": round(run.baseline_score, 8),
            "final_mean_estoi": round(run.final_score, 8),
            "skipped": run.skipped,
            "items": run.manifest,
            "step": run.step,
            "bounds": list(run.bounds),
            "seed": args.seed,
        },
    )
    return EXIT_OK


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ise-asd", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of option defaults; flags win")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--bandwidth-rule", choices=("fixed", "harmonic"), default=None)

    p = sub.add_parser("mix", help="mix speech with noise at a target SNR")
    p.add_argument("clean")
    p.add_argument("noise")
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--random-offset", action="store_true")
    common(p)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("enhance", help="run the harmonic enhancement pipeline on one file")
    p.add_argument("input")
    p.add_argument("--vuv", help="label file 'start end V|U'; detector used when absent")
    p.add_argument("--profile", default=None, help="ise_asd, gtf_f0, unit or profile JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--verify-identity", action="store_true")
    p.add_argument("--pitch-csv")
    common(p)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("evaluate", help="score every manifest cell and write reports")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--profile", default=None, help="extra profile JSON usable as a method")
    p.add_argument("--pesq-cmd", default=None, help="external PESQ command with {ref} and {deg}")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate", help="greedy gain search on a training manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--filters", type=int, default=None)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--out-dir", required=True)
    common(p)
    p.set_defaults(func=cmd_calibrate)
    return parser


DEFAULTS = {"seed": 0, "jobs": 1, "bandwidth_rule": "fixed", "filters": 10, "step": 0.25}


def _apply_config(args) -> None:
    config = {}
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise AudioIOError(f"config file {args.config} not found") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {args.config}: {exc}") from exc
    config = {k.replace("-", "_"): v for k, v in config.items()}
    for key in set(DEFAULTS) | set(config):
        if getattr(args, key, "absent") is None:
            setattr(args, key, config.get(key, DEFAULTS.get(key)))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _apply_config(args)
        return args.func(args)
    except UsageError as exc:
        print(f"ise-asd: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AudioIOError, AudioFormatError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"ise-asd: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PitchUnavailableError, CalibrationImpossibleError) as exc:
        print(f"ise-asd: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except (ContractError, IseError) as exc:
        print(f"ise-asd: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())

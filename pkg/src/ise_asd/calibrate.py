"""Greedy per-filter gain search maximising mean ESTOI over a training set."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import (
    MixSpec,
    VoicedMask,
    Waveform,
    detect_vuv,
    load_vuv_labels,
    load_wav,
    mix_at_snr,
    plan_frames,
    split_frames,
    synthesis_weights,
)
from .enhance import GAIN_MAX, GAIN_MIN, GAIN_STEP, EnhancementConfig, GainProfile, frame_filters
from .errors import CalibrationImpossibleError, ContractError, PitchUnavailableError
from .gammatone import cascade_filter
from .metrics import EstoiReference
from .pitch import estimate_pitch_track

log = logging.getLogger(__name__)


@dataclass(eq=False)
class TrainingItem:
    name: str
    clean: Waveform
    noisy: Waveform
    mask: VoicedMask


@dataclass(eq=False)
class CalibrationRun:
    manifest: list
    step: float
    bounds: tuple
    traces: list  # per filter: list of (gain, mean_estoi)
    profile: GainProfile
    baseline_score: float = math.nan
    final_score: float = math.nan
    skipped: list = field(default_factory=list)

    def trace_rows(self):
        for k, trace in enumerate(self.traces, start=1):
            for gain, score in trace:
                yield k, gain, score

    def audit(self) -> bool:
        """Recompute each filter's argmax from its trace and compare."""
        for k, trace in enumerate(self.traces):
            scores = [s for _, s in trace]
            best = trace[int(np.argmax(scores))][0]
            if best != self.profile.gains[k]:
                return False
        return True


class _BandCache:
    """Per-item harmonic band contributions, cross-faded to utterance length.

    The enhanced utterance for gains G is noisy + sum_k (G_k - 1) * bands[k],
    which follows from the cascade's telescoping sum.
    """

    def __init__(self, item: TrainingItem, size: int, config: EnhancementConfig, seed: int):
        w = item.noisy
        plan = plan_frames(w)
        self.noisy = w
        self.reference = EstoiReference(item.clean)
        track = estimate_pitch_track(w, plan, item.mask, config.pitch, seed=seed)
        frames = split_frames(w, plan)
        weights = synthesis_weights(plan)
        bands = np.zeros((size, plan.padded_length))
        n = plan.frame_length
        for q in item.mask.voiced_frames:
            f0 = track.f0[q]
            if math.isnan(f0):
                continue
            filters = frame_filters(f0, w.sample_rate, size, config)
            if not filters:
                continue
            out = cascade_filter(frames[q], filters)
            start = plan.starts[q]
            bands[: len(filters), start : start + n] += out.bands * weights[q]
        self.bands = bands[:, : len(w)]

    def score(self, gains) -> float:
        g = np.asarray(gains, dtype=float) - 1.0
        y = self.noisy.samples + g @ self.bands
        return self.reference.score(Waveform(y, self.noisy.sample_rate))


def gain_grid(step=GAIN_STEP, bounds=(GAIN_MIN, GAIN_MAX)) -> np.ndarray:
    lo, hi = bounds
    count = int(round((hi - lo) / step)) + 1
    return lo + step * np.arange(count)


def calibrate_gains(
    items,
    config: EnhancementConfig = EnhancementConfig(),
    size: int = 10,
    step: float = GAIN_STEP,
    bounds=(GAIN_MIN, GAIN_MAX),
    seed: int = 0,
    progress=None,
) -> CalibrationRun:
    """Sweep G_1..G_L in turn over the gain grid, fixing each at its argmax.

    While filter k is swept, earlier gains hold their chosen values and later
    ones stay at 1. The full grid is always evaluated; ties go to the smaller
    gain.
    """
    items = list(items)
    if not items:
        raise ContractError("empty training set")
    if size < 1:
        raise ContractError("need at least one filter to calibrate")
    seeds = np.random.SeedSequence(seed).generate_state(len(items))
    caches, skipped = [], []
    for item, s in zip(items, seeds):
        if not item.mask.voiced.any():
            skipped.append(item.name)
            continue
        try:
            caches.append(_BandCache(item, size, config, int(s)))
        except PitchUnavailableError:
            skipped.append(item.name)
    if not caches:
        raise CalibrationImpossibleError("no training item carries usable voiced content")

    def mean_score(gains):
        return float(np.mean([c.score(gains) for c in caches]))

    grid = gain_grid(step, bounds)
    gains = [1.0] * size
    baseline = mean_score(gains)
    traces = []
    best_score = baseline
    for k in range(size):
        trace = []
        for g in grid:
            trial = gains.copy()
            trial[k] = float(g)
            trace.append((float(g), mean_score(trial)))
        scores = [sc for _, sc in trace]
        i = int(np.argmax(scores))
        gains[k] = trace[i][0]
        best_score = scores[i]
        traces.append(trace)
        if progress:
            progress(k + 1, gains[k], best_score)
        log.info("filter %d: gain %.2f, mean ESTOI %.5f", k + 1, gains[k], best_score)

    profile = GainProfile("calibrated", tuple(gains))
    manifest = [item.name for item in items]
    return CalibrationRun(manifest, step, tuple(bounds), traces, profile, baseline, best_score, skipped)


def matches_reference_shape(profile: GainProfile, saturated: int = 2) -> bool:
    """First gains pinned at the upper bound, the rest non-increasing."""
    g = profile.gains
    if len(g) < saturated or any(v != GAIN_MAX for v in g[:saturated]):
        return False
    return all(a >= b for a, b in zip(g[saturated - 1 :], g[saturated:]))


# -------------------------------------------------------------------- files


def load_training_manifest(path, seed: int = 0) -> list[TrainingItem]:
    """CSV `clean_path,noise_path,snr_db[,vuv_path]`; relative paths resolve
    against the manifest's directory. Without a label path, a sibling `.lab`
    file is used if present, else the detector runs on the clean signal."""
    path = Path(path)
    base = path.parent
    items = []
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    seeds = np.random.SeedSequence(seed).generate_state(max(len(rows), 1))
    for i, row in enumerate(rows):
        clean_path = base / row["clean_path"]
        noise_path = base / row["noise_path"]
        clean = load_wav(clean_path)
        noise = load_wav(noise_path)
        snr = float(row["snr_db"])
        noisy = mix_at_snr(clean, MixSpec(snr, noise, random_offset=True, seed=int(seeds[i])))
        plan = plan_frames(clean)
        vuv = row.get("vuv_path") or ""
        lab = base / vuv if vuv else clean_path.with_suffix(".lab")
        mask = load_vuv_labels(lab, plan) if lab.exists() else detect_vuv(clean, plan)
        items.append(TrainingItem(f"{clean_path.stem}|{noise_path.stem}|{snr:g}", clean, noisy, mask))
    return items


def write_profile_json(profile: GainProfile, path) -> None:
    Path(path).write_text(json.dumps(profile.to_dict(), indent=2) + "\n", encoding="utf-8")


def read_profile_json(path) -> GainProfile:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return GainProfile(data["name"], tuple(data["gains"]))


def write_trace_csv(run: CalibrationRun, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["filter", "gain", "mean_estoi"])
        for k, gain, score in run.trace_rows():
            out.writerow([k, f"{gain:g}", f"{score:.8f}"])

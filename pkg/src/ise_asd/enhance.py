"""Harmonic emphasis of voiced frames and full-utterance reassembly."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .audio import FramePlan, VoicedMask, Waveform, detect_vuv, plan_frames, split_frames, synthesis_weights
from .errors import ContractError, PitchUnavailableError
from .gammatone import build_filter, cascade_filter, harmonic_count
from .pitch import PitchConfig, PitchTrack, estimate_pitch_track

log = logging.getLogger(__name__)

GAIN_STEP = 0.25
GAIN_MIN = 1.0
GAIN_MAX = 10.0


@dataclass(frozen=True)
class GainProfile:
    name: str
    gains: tuple

    def __post_init__(self):
        gains = tuple(float(g) for g in self.gains)
        if not gains:
            raise ContractError("gain profile must hold at least one gain")
        for g in gains:
            if not GAIN_MIN <= g <= GAIN_MAX or abs(g / GAIN_STEP - round(g / GAIN_STEP)) > 1e-9:
                raise ContractError(f"gain {g} not on the {GAIN_STEP} grid within [1, 10]")
        object.__setattr__(self, "gains", gains)

    @property
    def size(self) -> int:
        return len(self.gains)

    def to_dict(self) -> dict:
        return {"name": self.name, "gains": list(self.gains)}


ISE_ASD = GainProfile("ise_asd", (10, 10, 4.5, 3.5, 2.5, 2, 1.75, 1.75, 1.5, 1.25))
GTF_F0 = GainProfile("gtf_f0", (5.0, 5.0, 4.0, 2.5))


def unit_profile(size: int = 10) -> GainProfile:
    return GainProfile("unit", (1.0,) * size)


def builtin_profiles(unit_size: int = 10) -> list[GainProfile]:
    return [ISE_ASD, GTF_F0, unit_profile(unit_size)]


def profile_by_name(name: str) -> GainProfile:
    for p in builtin_profiles():
        if p.name == name:
            return p
    raise ContractError(f"unknown profile {name!r}; choose from ise_asd, gtf_f0, unit")


@dataclass(frozen=True)
class EnhancementConfig:
    profile: GainProfile = ISE_ASD
    pitch: PitchConfig = field(default_factory=PitchConfig)
    bandwidth_rule: str = "fixed"  # or "harmonic"
    order: int = 4


def frame_filters(f0, fs, size, config: EnhancementConfig = EnhancementConfig()):
    count = harmonic_count(f0, fs, size)
    return [
        build_filter(f0, k, fs, config.order, config.bandwidth_rule)
        for k in range(1, count + 1)
    ]


def enhance_frame(frame, f0, profile: GainProfile, fs, config: EnhancementConfig = EnhancementConfig()):
    """Gain-weighted sum of harmonic bands plus the cascade residual.

    The number of bands is clamped so every centre stays below Nyquist.
    """
    filters = frame_filters(f0, fs, profile.size, config)
    if not filters:
        return np.array(frame, dtype=np.float64)
    out = cascade_filter(frame, filters)
    return out.combine(profile.gains[: len(filters)])


def clamped_size(f0, fs, profile: GainProfile) -> int:
    return harmonic_count(f0, fs, profile.size)


def enhance_utterance(
    w: Waveform,
    mask: VoicedMask,
    track: PitchTrack | None,
    config: EnhancementConfig = EnhancementConfig(),
    plan: FramePlan | None = None,
) -> Waveform:
    """Enhance voiced frames and overlap-add them back into the utterance.

    Only the per-frame change is cross-faded into the input, so samples
    covered solely by unvoiced frames come back bit-identical.
    """
    plan = plan or plan_frames(w)
    if len(mask) != plan.frame_count:
        raise ContractError("mask does not match the frame plan")
    if track is not None and track.f0.size != plan.frame_count:
        raise ContractError("pitch track does not match the frame plan")
    if track is None or not track.has_estimate[mask.voiced].any():
        if mask.voiced.any():
            warnings.warn("pitch unavailable; utterance returned unmodified", RuntimeWarning)
        return Waveform(w.samples.copy(), w.sample_rate)

    frames = split_frames(w, plan)
    weights = synthesis_weights(plan)
    delta = np.zeros(plan.padded_length)
    n = plan.frame_length
    for q in mask.voiced_frames:
        f0 = track.f0[q]
        if math.isnan(f0):
            continue
        change = enhance_frame(frames[q], f0, config.profile, w.sample_rate, config) - frames[q]
        start = plan.starts[q]
        delta[start : start + n] += weights[q] * change
    return Waveform(w.samples + delta[: len(w)], w.sample_rate)


@dataclass(eq=False)
class EnhancementResult:
    waveform: Waveform
    mask: VoicedMask
    track: PitchTrack | None
    metadata: dict


def run_pipeline(
    w: Waveform,
    mask: VoicedMask | None = None,
    config: EnhancementConfig = EnhancementConfig(),
    seed: int = 0,
) -> EnhancementResult:
    """V/UV (detector fallback) -> pitch track -> enhancement, with metadata."""
    plan = plan_frames(w)
    if mask is None:
        mask = detect_vuv(w, plan)
    meta = {
        "profile": config.profile.to_dict(),
        "bandwidth_rule": config.bandwidth_rule,
        "sample_rate": w.sample_rate,
        "frames": plan.frame_count,
        "voiced_frames": int(mask.voiced.sum()),
        "vuv_source": mask.source,
        "warnings": [],
    }
    try:
        track = estimate_pitch_track(w, plan, mask, config.pitch, seed=seed)
    except PitchUnavailableError as exc:
        meta["warnings"].append(f"pitch-unavailable: {exc}")
        meta["pitch_available"] = False
        return EnhancementResult(Waveform(w.samples.copy(), w.sample_rate), mask, None, meta)

    voiced_f0 = track.f0[mask.voiced]
    meta["pitch_available"] = True
    meta["pitch"] = {
        "median_hz": float(np.median(voiced_f0)),
        "min_hz": float(np.min(voiced_f0)),
        "max_hz": float(np.max(voiced_f0)),
        "fallback_frames": int(track.fallback.sum()),
    }
    clamps = [
        {"frame": int(q), "bands": clamped_size(track.f0[q], w.sample_rate, config.profile)}
        for q in mask.voiced_frames
        if clamped_size(track.f0[q], w.sample_rate, config.profile) < config.profile.size
    ]
    meta["clamped_frames"] = clamps
    out = enhance_utterance(w, mask, track, config, plan)
    return EnhancementResult(out, mask, track, meta)

"""Waveform container, WAV I/O, framing, overlap-add, V/UV masks and noise mixing."""

from __future__ import annotations

import logging
import math
import wave
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .errors import (
    AudioFormatError,
    AudioIOError,
    ContractError,
    DegenerateInputError,
    LabelsIncompleteError,
)

log = logging.getLogger(__name__)

FRAME_SECONDS = 0.032
RESAMPLE_TAPS = 64
CROSSFADE_SECONDS = 0.010
LABEL_TOLERANCE_SECONDS = 0.010


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ContractError(f"expected mono samples, got shape {x.shape}")
        if x.size < 1:
            raise ContractError("waveform must hold at least one sample")
        if not np.all(np.isfinite(x)):
            raise ContractError("waveform contains NaN or Inf")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ContractError(f"invalid sample rate {self.sample_rate!r}")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def power(self) -> float:
        return float(np.mean(self.samples**2))


# --------------------------------------------------------------------------- I/O


def load_wav(path) -> Waveform:
    """Read a 16-bit PCM mono WAV file, scaling samples to [-1, 1)."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            declared = fh.getnframes()
            if channels != 1 or width != 2:
                raise AudioFormatError(
                    f"{path}: need 16-bit mono PCM, got {channels} ch x {8 * width} bit"
                )
            raw = fh.readframes(declared)
    except wave.Error as exc:
        raise AudioFormatError(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise AudioIOError(f"{path}: truncated file") from exc
    if len(raw) < 2 * declared:
        raise AudioIOError(f"{path}: truncated, {len(raw) // 2} of {declared} frames present")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if samples.size == 0:
        raise AudioIOError(f"{path}: no audio frames")
    return Waveform(samples, rate)


def write_wav(path, w: Waveform) -> float:
    """Write `w` as 16-bit PCM. Peak-normalises if any |sample| > 1.

    Returns the scale factor applied (1.0 when untouched).
    """
    x = w.samples
    peak = float(np.max(np.abs(x)))
    scale = 1.0
    if peak > 1.0:
        scale = 1.0 / peak
        x = x * scale
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(w.sample_rate)
        fh.writeframes(pcm.tobytes())
    return scale


def resample(w: Waveform, rate: int) -> Waveform:
    """Polyphase windowed-sinc resampling (64 zero-crossings per kernel)."""
    if rate == w.sample_rate:
        return w
    ratio = Fraction(int(rate), w.sample_rate)
    up, down = ratio.numerator, ratio.denominator
    m = max(up, down)
    taps = sps.firwin(RESAMPLE_TAPS * m + 1, 1.0 / m, window=("kaiser", 5.0))
    y = sps.resample_poly(w.samples, up, down, window=taps)
    return Waveform(y, rate)


# ---------------------------------------------------------------------- framing


@dataclass(frozen=True)
class FramePlan:
    frame_length: int
    hop: int
    frame_count: int
    signal_length: int
    sample_rate: int

    @property
    def starts(self) -> np.ndarray:
        return np.arange(self.frame_count) * self.hop

    @property
    def padded_length(self) -> int:
        return (self.frame_count - 1) * self.hop + self.frame_length


def frame_length_for(sample_rate: int) -> int:
    # even length so that the hop is exactly half a frame
    return 2 * int(round(FRAME_SECONDS * sample_rate / 2))


def plan_frames(w: Waveform) -> FramePlan:
    n = frame_length_for(w.sample_rate)
    hop = n // 2
    if len(w) < n:
        log.warning("signal of %d samples is shorter than one %d-sample frame; padding", len(w), n)
        q = 1
    else:
        q = math.ceil((len(w) - n) / hop) + 1
    return FramePlan(n, hop, q, len(w), w.sample_rate)


def split_frames(w: Waveform, plan: FramePlan) -> np.ndarray:
    """Rectangular analysis frames, shape (Q, frame_length); tail zero-padded."""
    x = np.zeros(plan.padded_length)
    x[: len(w)] = w.samples
    idx = plan.starts[:, None] + np.arange(plan.frame_length)[None, :]
    return x[idx]


def synthesis_weights(plan: FramePlan) -> np.ndarray:
    """Triangular cross-fade weights summing to one at every sample.

    The outer halves of the first and last frames are flat so the
    reconstruction is exact up to the signal edges.
    """
    h = plan.hop
    ramp = np.arange(h) / h
    tri = np.concatenate([ramp, 1.0 - ramp])
    w = np.tile(tri, (plan.frame_count, 1))
    w[0, :h] = 1.0
    w[-1, h:] = 1.0
    return w


def overlap_add(frames, plan: FramePlan) -> Waveform:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape != (plan.frame_count, plan.frame_length):
        raise ContractError(
            f"frames shape {frames.shape} does not match plan "
            f"({plan.frame_count}, {plan.frame_length})"
        )
    out = np.zeros(plan.padded_length)
    weighted = frames * synthesis_weights(plan)
    for q, start in enumerate(plan.starts):
        out[start : start + plan.frame_length] += weighted[q]
    return Waveform(out[: plan.signal_length], plan.sample_rate)


# ------------------------------------------------------------------- V/UV masks


@dataclass(frozen=True, eq=False)
class VoicedMask:
    voiced: np.ndarray
    source: str = "external-file"

    def __post_init__(self):
        object.__setattr__(self, "voiced", np.asarray(self.voiced, dtype=bool))

    def __len__(self):
        return self.voiced.size

    @property
    def voiced_frames(self) -> np.ndarray:
        return np.flatnonzero(self.voiced)

    @property
    def unvoiced_frames(self) -> np.ndarray:
        return np.flatnonzero(~self.voiced)


def read_label_intervals(path) -> list[tuple[float, float, bool]]:
    intervals = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[2].upper() not in ("V", "U"):
            raise ContractError(f"{path}:{lineno}: expected 'start end V|U', got {line!r}")
        start, end = float(parts[0]), float(parts[1])
        if end < start:
            raise ContractError(f"{path}:{lineno}: end before start")
        intervals.append((start, end, parts[2].upper() == "V"))
    return intervals


def write_label_intervals(path, intervals) -> None:
    lines = [f"{s:.6f} {e:.6f} {'V' if v else 'U'}" for s, e, v in intervals]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def mask_from_intervals(intervals, plan: FramePlan, source="external-file") -> VoicedMask:
    duration = plan.signal_length / plan.sample_rate
    tol = LABEL_TOLERANCE_SECONDS
    if not intervals:
        raise LabelsIncompleteError("no label intervals")
    covered = 0.0
    for start, end, _ in sorted(intervals):
        if start > covered + tol:
            raise LabelsIncompleteError(f"labels leave a gap at {covered:.3f}-{start:.3f} s")
        covered = max(covered, end)
    if covered < duration - tol:
        raise LabelsIncompleteError(f"labels end at {covered:.3f} s, utterance lasts {duration:.3f} s")

    fs = plan.sample_rate
    voiced = np.zeros(plan.padded_length, dtype=bool)
    for start, end, is_voiced in intervals:
        if is_voiced:
            voiced[int(round(start * fs)) : int(round(end * fs))] = True
    voiced[plan.signal_length :] = False
    idx = plan.starts[:, None] + np.arange(plan.frame_length)[None, :]
    counts = voiced[idx].sum(axis=1)
    return VoicedMask(counts > plan.frame_length / 2, source)


def load_vuv_labels(path, plan: FramePlan) -> VoicedMask:
    """Per-frame mask from a `start_sec end_sec V|U` label file.

    A frame is voiced when more than half of its samples lie in voiced regions.
    """
    return mask_from_intervals(read_label_intervals(path), plan)


def frame_rms(frames: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean(frames**2, axis=1))


def zero_crossing_rate(frames: np.ndarray) -> np.ndarray:
    s = np.signbit(frames)
    return np.mean(s[:, 1:] != s[:, :-1], axis=1)


def detect_vuv(w: Waveform, plan: FramePlan, rms_ratio=0.3, max_zcr=0.25) -> VoicedMask:
    """Energy and zero-crossing heuristic used when no label file exists."""
    frames = split_frames(w, plan)
    rms = frame_rms(frames)
    peak = rms.max()
    active = rms > max(1e-3 * peak, 1e-10)
    if not active.any():
        return VoicedMask(np.zeros(plan.frame_count, dtype=bool), "detector")
    threshold = rms_ratio * np.median(rms[active])
    voiced = active & (rms > threshold) & (zero_crossing_rate(frames) < max_zcr)
    return VoicedMask(voiced, "detector")


# ----------------------------------------------------------------------- mixing


@dataclass(frozen=True, eq=False)
class MixSpec:
    target_snr: float
    noise: Waveform
    offset: int = 0
    random_offset: bool = False
    seed: int | None = None


def _loop_noise(noise: np.ndarray, start: int, length: int, fade: int) -> np.ndarray:
    out = noise[start:]
    while out.size < length:
        # cross-fade the running tail into the head of the next repetition
        k = min(fade, out.size, noise.size // 2)
        ramp = np.arange(k) / k if k else np.zeros(0)
        seam = out[out.size - k :] * (1.0 - ramp) + noise[:k] * ramp
        out = np.concatenate([out[: out.size - k], seam, noise[k:]])
    return out[:length].copy()


def noise_segment(spec: MixSpec, length: int) -> np.ndarray:
    noise = spec.noise.samples
    if spec.random_offset:
        rng = np.random.default_rng(spec.seed)
        hi = noise.size - length + 1 if noise.size >= length else noise.size
        start = int(rng.integers(0, hi))
    else:
        start = int(spec.offset) % noise.size
    fade = int(round(CROSSFADE_SECONDS * spec.noise.sample_rate))
    return _loop_noise(noise, start, length, fade)


def noise_scale(speech: Waveform, segment: np.ndarray, target_snr: float) -> float:
    p_speech = speech.power()
    p_noise = float(np.mean(segment**2))
    if p_speech <= 0.0 or p_noise <= 0.0:
        raise DegenerateInputError("speech and noise must both have nonzero power")
    return math.sqrt(p_speech / (p_noise * 10.0 ** (target_snr / 10.0)))


def mix_at_snr(speech: Waveform, spec: MixSpec) -> Waveform:
    """Add a noise segment scaled so the utterance-global SNR hits the target."""
    noise = spec.noise
    if noise.sample_rate != speech.sample_rate:
        noise = resample(noise, speech.sample_rate)
        spec = MixSpec(spec.target_snr, noise, spec.offset, spec.random_offset, spec.seed)
    seg = noise_segment(spec, len(speech))
    alpha = noise_scale(speech, seg, spec.target_snr)
    return Waveform(speech.samples + alpha * seg, speech.sample_rate)


def snr_db(speech: Waveform, mixture: Waveform) -> float:
    noise = mixture.samples - speech.samples
    return 10.0 * math.log10(speech.power() / float(np.mean(noise**2)))

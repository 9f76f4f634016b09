"""F0 estimation from the amplitude envelopes of EEMD modes (HHT-Amp)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .audio import FramePlan, VoicedMask, Waveform, split_frames
from .emd import EemdConfig, ImfDecomposition, eemd
from .errors import ContractError, PitchUnavailableError

F0_MIN = 50.0
F0_MAX = 400.0


@dataclass(frozen=True)
class PitchConfig:
    f0_min: float = F0_MIN
    f0_max: float = F0_MAX
    peak_floor: float = 0.3
    eemd: EemdConfig = field(default_factory=EemdConfig)


@dataclass(frozen=True)
class PitchCandidate:
    imf_index: int  # 1-based, as in IMF_1 .. IMF_K
    lag: int
    f0: float
    peak: float


@dataclass(eq=False)
class PitchTrack:
    f0: np.ndarray  # Hz per frame, NaN where absent
    candidates: list  # list[list[PitchCandidate]] per frame
    fallback: np.ndarray  # True where the value was filled in, not measured
    frame_starts: np.ndarray
    sample_rate: int

    @property
    def has_estimate(self) -> np.ndarray:
        return ~np.isnan(self.f0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["frame_index", "start_sec", "voiced", "f0_hz"])
            for q, f in enumerate(self.f0):
                voiced = not math.isnan(f)
                out.writerow(
                    [
                        q,
                        f"{self.frame_starts[q] / self.sample_rate:.6f}",
                        int(voiced),
                        f"{f:.4f}" if voiced else "",
                    ]
                )


def lag_bounds(fs: float, f0_min=F0_MIN, f0_max=F0_MAX) -> tuple[int, int]:
    return int(math.floor(fs / f0_max)), int(math.ceil(fs / f0_min))


def analytic_signal(x) -> np.ndarray:
    """Analytic signal via a one-sided spectrum (DC and Nyquist kept once)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    spec = np.fft.fft(x)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1 : n // 2] = 2.0
    else:
        h[1 : (n + 1) // 2] = 2.0
    return np.fft.ifft(spec * h)


def instantaneous_amplitudes(dec: ImfDecomposition) -> list[np.ndarray]:
    return [np.abs(analytic_signal(imf)) for imf in dec.imfs]


def amplitude_acf(a) -> np.ndarray | None:
    """Mean-removed autocorrelation normalised so that r(0) = 1.

    Returns None for a constant sequence, which carries no periodicity.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        raise ContractError("empty amplitude sequence")
    d = a - a.mean()
    energy = float(np.dot(d, d))
    if energy <= 1e-20 * max(float(np.dot(a, a)), 1e-300):
        return None
    n = d.size
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    spec = np.fft.rfft(d, nfft)
    r = np.fft.irfft(spec * np.conj(spec), nfft)[:n]
    return r / r[0]


def _first_peak(r, lo, hi, floor):
    hi = min(hi, r.size - 2)
    tau = max(lo, 1)
    while tau <= hi:
        if r[tau] > r[tau - 1]:
            j = tau
            while j < r.size - 1 and r[j + 1] == r[j]:
                j += 1
            if j < r.size - 1 and r[j + 1] < r[j] and r[tau] > floor:
                return tau
            tau = j + 1
        else:
            tau += 1
    return None


def extract_candidate(r, fs, imf_index=1, config: PitchConfig = PitchConfig()):
    """Lowest-lag ACF peak inside the admissible F0 range, or None."""
    if r is None:
        return None
    lo, hi = lag_bounds(fs, config.f0_min, config.f0_max)
    tau = _first_peak(np.asarray(r), lo, hi, config.peak_floor)
    if tau is None:
        return None
    return PitchCandidate(imf_index, int(tau), fs / tau, float(r[tau]))


def select_f0(candidates) -> float | None:
    """Pick the candidate with the strongest normalised ACF peak.

    Ties go to the lower IMF index.
    """
    if not candidates:
        return None
    best = min(candidates, key=lambda c: (-c.peak, c.imf_index))
    return best.f0


def frame_candidates(frame, fs, config: PitchConfig = PitchConfig(), seed=0):
    dec = eemd(frame, seed=seed, config=config.eemd)
    out = []
    for k, a in enumerate(instantaneous_amplitudes(dec), start=1):
        cand = extract_candidate(amplitude_acf(a), fs, k, config)
        if cand is not None:
            out.append(cand)
    return out


def estimate_pitch_track(
    w: Waveform,
    plan: FramePlan,
    mask: VoicedMask,
    config: PitchConfig = PitchConfig(),
    seed: int = 0,
    strict: bool = True,
) -> PitchTrack:
    """Per-frame F0 for every voiced frame.

    Voiced frames that yield no candidate inherit the previous voiced
    estimate, or the median of all measured estimates when none precedes.
    With `strict`, an utterance with no measurable voiced frame raises
    PitchUnavailableError; otherwise the empty track is returned.
    """
    if len(mask) != plan.frame_count:
        raise ContractError("mask and plan disagree on frame count")
    frames = split_frames(w, plan)
    q_total = plan.frame_count
    f0 = np.full(q_total, np.nan)
    cands: list = [[] for _ in range(q_total)]
    seeds = np.random.SeedSequence(seed).generate_state(q_total)
    for q in mask.voiced_frames:
        cands[q] = frame_candidates(frames[q], w.sample_rate, config, int(seeds[q]))
        choice = select_f0(cands[q])
        if choice is not None:
            f0[q] = choice

    measured = ~np.isnan(f0)
    track = PitchTrack(f0, cands, np.zeros(q_total, dtype=bool), plan.starts, w.sample_rate)
    if not measured.any():
        if strict:
            raise PitchUnavailableError("no voiced frame produced a pitch candidate")
        return track

    median = float(np.median(f0[measured]))
    last = None
    for q in mask.voiced_frames:
        if measured[q]:
            last = f0[q]
        else:
            f0[q] = last if last is not None else median
            track.fallback[q] = True
    return track


def gross_error_rate(estimates, truth, tolerance=0.2) -> float:
    estimates = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    ok = ~np.isnan(truth)
    err = np.abs(estimates[ok] - truth[ok]) > tolerance * truth[ok]
    err |= np.isnan(estimates[ok])
    return float(np.mean(err))

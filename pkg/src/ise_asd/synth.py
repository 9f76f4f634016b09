"""Synthetic speech-like material with known F0 and V/UV ground truth.

Utterances are syllable sequences: an optional fricative or plosive onset
followed by a vowel built by additive synthesis of a harmonic source shaped
by three formant resonances. Speech-shaped noise is white noise coloured
with the long-term average spectrum of a batch of such utterances.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .audio import Waveform, write_label_intervals, write_wav

# F1, F2, F3 in Hz
VOWELS = {
    "a": (730, 1090, 2440),
    "e": (530, 1840, 2480),
    "i": (270, 2290, 3010),
    "o": (570, 840, 2410),
    "u": (300, 870, 2240),
    "ae": (660, 1720, 2410),
    "er": (490, 1350, 1690),
}
FORMANT_BW = (80.0, 100.0, 140.0)
FRICATIVE_BANDS = ((2500, 7000), (1500, 4500), (800, 6000), (3500, 7500))


@dataclass(eq=False)
class Utterance:
    name: str
    waveform: Waveform
    intervals: list  # (start_sec, end_sec, voiced)
    f0: np.ndarray  # per-sample Hz, NaN outside voiced regions

    def frame_f0(self, plan) -> np.ndarray:
        """Mean true F0 over each frame's voiced samples, NaN if none."""
        f = np.full(plan.padded_length, np.nan)
        f[: self.f0.size] = self.f0
        idx = plan.starts[:, None] + np.arange(plan.frame_length)[None, :]
        seg = f[idx]
        out = np.full(plan.frame_count, np.nan)
        has = (~np.isnan(seg)).any(axis=1)
        out[has] = np.nanmean(seg[has], axis=1)
        return out


def _formant_gain(freq, formants):
    g = np.ones_like(freq)
    for fc, bw in zip(formants, FORMANT_BW):
        fc = np.asarray(fc)
        g /= np.sqrt((1.0 - (freq / fc) ** 2) ** 2 + (freq * bw / fc**2) ** 2)
    return g


def harmonic_signal(f0, fs, formants=None, n_harmonics=None, tilt=1.0, phase_seed=None):
    """Additive harmonic synthesis along a per-sample F0 contour.

    `formants` is None (flat spectrum) or three per-sample (or scalar) centre
    frequencies. Harmonics at or above 0.45*fs are dropped sample by sample.
    """
    f0 = np.asarray(f0, dtype=float)
    phase = 2 * np.pi * np.cumsum(f0) / fs
    limit = 0.45 * fs
    kmax = int(limit // f0.min()) if n_harmonics is None else n_harmonics
    rng = np.random.default_rng(phase_seed)
    out = np.zeros_like(f0)
    for k in range(1, kmax + 1):
        fk = k * f0
        amp = np.where(fk < limit, k**-tilt, 0.0)
        if formants is not None:
            amp = amp * _formant_gain(fk, formants)
        offset = rng.uniform(0, 2 * np.pi) if phase_seed is not None else 0.0
        out += amp * np.cos(k * phase + offset)
    return out


def harmonic_source(f0, duration, fs, n_harmonics=10, tilt=1.0, seed=None) -> Waveform:
    """Stationary harmonic complex of `n_harmonics` partials."""
    n = int(round(duration * fs))
    x = harmonic_signal(np.full(n, float(f0)), fs, n_harmonics=n_harmonics, tilt=tilt, phase_seed=seed)
    return Waveform(0.5 * x / np.max(np.abs(x)), fs)


def _ramp(n, fs, ms=15.0):
    r = min(int(fs * ms / 1000), n // 2)
    env = np.ones(n)
    if r > 0:
        w = 0.5 - 0.5 * np.cos(np.pi * np.arange(r) / r)
        env[:r] = w
        env[-r:] = w[::-1]
    return env


def synthetic_utterance(seed: int, fs: int = 16000, duration: float = 2.5, name=None) -> Utterance:
    rng = np.random.default_rng(seed)
    n_total = int(round(duration * fs))
    x = np.zeros(n_total)
    f0_track = np.full(n_total, np.nan)
    female = rng.random() < 0.4
    base = rng.uniform(170, 240) if female else rng.uniform(90, 140)
    t_all = np.arange(n_total) / fs
    contour = base * (1 + 0.08 * np.sin(2 * np.pi * rng.uniform(0.3, 0.9) * t_all + rng.uniform(0, 6.3)))
    contour *= 1.0 - 0.15 * t_all / duration

    intervals = []
    pos = int(rng.uniform(0.08, 0.2) * fs)
    intervals.append((0, pos, False))
    vowel_names = list(VOWELS)
    while True:
        onset = rng.choice(["none", "fricative", "plosive"], p=[0.3, 0.45, 0.25])
        c_len = {"none": 0, "fricative": int(rng.uniform(0.06, 0.12) * fs), "plosive": int(0.055 * fs)}[onset]
        v_len = int(rng.uniform(0.14, 0.3) * fs)
        gap = int(rng.uniform(0.03, 0.09) * fs)
        if pos + c_len + v_len + gap > n_total - int(0.05 * fs):
            break
        if onset == "fricative":
            lo, hi = FRICATIVE_BANDS[rng.integers(len(FRICATIVE_BANDS))]
            sos = sps.butter(4, [lo, min(hi, 0.45 * fs)], btype="band", fs=fs, output="sos")
            burst = sps.sosfilt(sos, rng.standard_normal(c_len))
            burst *= rng.uniform(0.15, 0.35) / (np.std(burst) + 1e-12) * _ramp(c_len, fs, 10)
            x[pos : pos + c_len] += burst
        elif onset == "plosive":
            burst_len = int(0.015 * fs)
            sos = sps.butter(2, [500, min(6000, 0.45 * fs)], btype="band", fs=fs, output="sos")
            burst = sps.sosfilt(sos, rng.standard_normal(burst_len)) * _ramp(burst_len, fs, 3)
            burst *= 0.4 / (np.std(burst) + 1e-12)
            x[pos + c_len - burst_len : pos + c_len] += burst
        if c_len:
            intervals.append((pos, pos + c_len, False))
        pos += c_len

        v1, v2 = rng.choice(vowel_names, 2)
        alpha = np.linspace(0, 1, v_len)[:, None]
        formants = (1 - alpha) * np.array(VOWELS[v1]) + alpha * np.array(VOWELS[v2])
        f0 = contour[pos : pos + v_len] * (1 + 0.05 * np.sin(np.pi * np.linspace(0, 1, v_len)))
        vowel = harmonic_signal(f0, fs, formants=formants.T, tilt=1.0, phase_seed=int(rng.integers(1 << 31)))
        vowel *= rng.uniform(0.6, 1.0) / (np.std(vowel) + 1e-12) * _ramp(v_len, fs, 20)
        x[pos : pos + v_len] += vowel
        f0_track[pos : pos + v_len] = f0
        intervals.append((pos, pos + v_len, True))
        pos += v_len
        intervals.append((pos, pos + gap, False))
        pos += gap
    intervals.append((pos, n_total, False))

    x *= 0.5 / np.max(np.abs(x))
    merged = []
    for s, e, v in intervals:
        if e <= s:
            continue
        if merged and merged[-1][2] == v and merged[-1][1] == s:
            merged[-1] = (merged[-1][0], e, v)
        else:
            merged.append((s, e, v))
    secs = [(s / fs, e / fs, v) for s, e, v in merged]
    return Utterance(name or f"syn{seed:04d}", Waveform(x, fs), secs, f0_track)


def make_corpus(count: int, seed: int = 0, fs: int = 16000, duration: float = 2.5) -> list[Utterance]:
    seeds = np.random.SeedSequence(seed).generate_state(count)
    return [
        synthetic_utterance(int(s), fs, duration, name=f"syn{seed:03d}_{i:03d}")
        for i, s in enumerate(seeds)
    ]


def long_term_spectrum(waveforms, nperseg=1024):
    psd = None
    for w in waveforms:
        f, p = sps.welch(w.samples, fs=w.sample_rate, nperseg=nperseg)
        psd = p if psd is None else psd + p
    return f, psd / len(waveforms)


def speech_shaped_noise(duration: float, fs: int = 16000, seed: int = 0, reference=None) -> Waveform:
    """Stationary noise with the long-term spectrum of `reference` utterances.

    Without a reference, a batch of synthetic utterances supplies the spectrum.
    """
    if reference is None:
        reference = [u.waveform for u in make_corpus(12, seed=10_000 + seed, fs=fs)]
    f, psd = long_term_spectrum(reference)
    n = int(round(duration * fs))
    rng = np.random.default_rng(seed)
    spec = np.fft.rfft(rng.standard_normal(n))
    shape = np.sqrt(np.interp(np.fft.rfftfreq(n, 1 / fs), f, psd))
    y = np.fft.irfft(spec * shape, n)
    return Waveform(0.1 * y / np.std(y), fs)


def write_corpus(utterances, directory) -> list[tuple[Path, Path]]:
    """Write `<name>.wav` and `<name>.lab` for each utterance."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for u in utterances:
        wav = directory / f"{u.name}.wav"
        lab = directory / f"{u.name}.lab"
        write_wav(wav, u.waveform)
        write_label_intervals(lab, u.intervals)
        paths.append((wav, lab))
    return paths

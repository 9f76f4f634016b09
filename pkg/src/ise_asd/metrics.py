"""ESTOI intelligibility, STI-style categories, one-way ANOVA and report tables."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import stats

from .audio import Waveform, resample
from .errors import ContractError, DegenerateVarianceError, MetricUndefinedError


@dataclass(frozen=True)
class EstoiConfig:
    sample_rate: int = 10000
    frame_length: int = 256  # 25.6 ms
    fft_size: int = 512
    num_bands: int = 15
    min_center: float = 150.0
    segment_frames: int = 30  # 384 ms
    dynamic_range_db: float = 40.0


def third_octave_matrix(cfg: EstoiConfig = EstoiConfig()):
    """Binary band-grouping matrix (num_bands x fft bins) and centre frequencies."""
    freqs = np.linspace(0, cfg.sample_rate, cfg.fft_size + 1)[: cfg.fft_size // 2 + 1]
    k = np.arange(cfg.num_bands)
    centers = cfg.min_center * 2.0 ** (k / 3)
    lower = cfg.min_center * 2.0 ** ((2 * k - 1) / 6)
    upper = cfg.min_center * 2.0 ** ((2 * k + 1) / 6)
    obm = np.zeros((cfg.num_bands, freqs.size))
    for i in range(cfg.num_bands):
        lo = int(np.argmin(np.abs(freqs - lower[i])))
        hi = int(np.argmin(np.abs(freqs - upper[i])))
        obm[i, lo:hi] = 1.0
    return obm, centers


def _window(n):
    return np.hanning(n + 2)[1:-1]


def _frames(x, n, hop):
    count = (x.size - n) // hop + (1 if x.size >= n else 0)
    if count <= 0:
        return np.zeros((0, n))
    idx = np.arange(count)[:, None] * hop + np.arange(n)[None, :]
    return x[idx]


def _drop_silence(x, y, cfg):
    """Remove frames whose clean energy is more than the dynamic range below
    the loudest frame, then overlap-add the survivors back together."""
    n, hop = cfg.frame_length, cfg.frame_length // 2
    win = _window(n)
    xf = _frames(x, n, hop) * win
    yf = _frames(y, n, hop) * win
    if xf.shape[0] == 0:
        raise MetricUndefinedError("signal shorter than one analysis frame")
    energy = 20 * np.log10(np.linalg.norm(xf, axis=1) + np.finfo(float).eps)
    keep = energy > energy.max() - cfg.dynamic_range_db
    if np.linalg.norm(xf, axis=1).max() == 0.0:
        raise MetricUndefinedError("clean reference is silent")
    xf, yf = xf[keep], yf[keep]
    m = xf.shape[0]
    xs = np.zeros((m - 1) * hop + n)
    ys = np.zeros_like(xs)
    for i in range(m):
        xs[i * hop : i * hop + n] += xf[i]
        ys[i * hop : i * hop + n] += yf[i]
    return xs, ys


def _band_envelopes(x, cfg, obm):
    n, hop = cfg.frame_length, cfg.frame_length // 2
    frames = _frames(x, n, hop) * _window(n)
    spec = np.fft.rfft(frames, cfg.fft_size, axis=1)
    return np.sqrt(obm @ (np.abs(spec) ** 2).T)  # (bands, frames)


def _normalize(v, axis):
    v = v - v.mean(axis=axis, keepdims=True)
    norm = np.linalg.norm(v, axis=axis, keepdims=True)
    return np.divide(v, norm, out=np.zeros_like(v), where=norm > 0)


def _segments(tob, n):
    m = tob.shape[1] - n + 1
    idx = np.arange(m)[:, None] + np.arange(n)[None, :]
    seg = tob[:, idx].transpose(1, 0, 2)  # (segments, bands, frames)
    return _normalize(_normalize(seg, 2), 1)


def _prepare(clean: Waveform, degraded: Waveform, cfg: EstoiConfig):
    n = min(len(clean), len(degraded))
    x = resample(Waveform(clean.samples[:n], clean.sample_rate), cfg.sample_rate).samples
    y = resample(Waveform(degraded.samples[:n], degraded.sample_rate), cfg.sample_rate).samples
    return _drop_silence(x, y, cfg)


def estoi(clean: Waveform, degraded: Waveform, cfg: EstoiConfig = EstoiConfig()) -> float:
    """Extended short-time objective intelligibility of `degraded` against `clean`."""
    if clean.sample_rate != degraded.sample_rate:
        raise ContractError("clean and degraded sample rates differ")
    x, y = _prepare(clean, degraded, cfg)
    obm, _ = third_octave_matrix(cfg)
    xt = _band_envelopes(x, cfg, obm)
    yt = _band_envelopes(y, cfg, obm)
    if xt.shape[1] < cfg.segment_frames:
        raise MetricUndefinedError(
            f"only {xt.shape[1]} non-silent frames, need {cfg.segment_frames}"
        )
    xs = _segments(xt, cfg.segment_frames)
    ys = _segments(yt, cfg.segment_frames)
    return float(np.sum(xs * ys) / (cfg.segment_frames * xs.shape[0]))


class EstoiReference:
    """Clean-side ESTOI features cached for scoring many degraded versions."""

    def __init__(self, clean: Waveform, cfg: EstoiConfig = EstoiConfig()):
        self.clean = clean
        self.cfg = cfg
        self.obm, _ = third_octave_matrix(cfg)

    @cached_property
    def _clean_side(self):
        x = resample(self.clean, self.cfg.sample_rate).samples
        n, hop = self.cfg.frame_length, self.cfg.frame_length // 2
        xf = _frames(x, n, hop) * _window(n)
        if xf.shape[0] == 0 or np.linalg.norm(xf, axis=1).max() == 0.0:
            raise MetricUndefinedError("clean reference is silent or too short")
        energy = 20 * np.log10(np.linalg.norm(xf, axis=1) + np.finfo(float).eps)
        keep = energy > energy.max() - self.cfg.dynamic_range_db
        xs, _ = _drop_silence(x, x, self.cfg)
        xt = _band_envelopes(xs, self.cfg, self.obm)
        if xt.shape[1] < self.cfg.segment_frames:
            raise MetricUndefinedError("too few non-silent frames")
        return keep, _segments(xt, self.cfg.segment_frames)

    def score(self, degraded: Waveform) -> float:
        if len(degraded) != len(self.clean) or degraded.sample_rate != self.clean.sample_rate:
            return estoi(self.clean, degraded, self.cfg)
        keep, xs = self._clean_side
        y = resample(degraded, self.cfg.sample_rate).samples
        n, hop = self.cfg.frame_length, self.cfg.frame_length // 2
        yf = (_frames(y, n, hop) * _window(n))[keep]
        ys_sig = np.zeros((yf.shape[0] - 1) * hop + n)
        for i in range(yf.shape[0]):
            ys_sig[i * hop : i * hop + n] += yf[i]
        ys = _segments(_band_envelopes(ys_sig, self.cfg, self.obm), self.cfg.segment_frames)
        return float(np.sum(xs * ys) / (self.cfg.segment_frames * xs.shape[0]))


# ------------------------------------------------------------ STI categories

STI_BOUNDS = ((0.30, "poor"), (0.45, "fair"), (0.60, "good"), (0.75, "excellent"))
STI_CATEGORIES = ("bad", "poor", "fair", "good", "excellent")


def sti_category(score: float) -> str:
    """Reporting band for an ESTOI score; boundaries belong to the upper band."""
    label = "bad"
    for bound, name in STI_BOUNDS:
        if score >= bound:
            label = name
    return label


# --------------------------------------------------------------------- ANOVA


@dataclass(frozen=True)
class AnovaResult:
    f_statistic: float
    p_value: float
    groups: int
    observations: int

    @property
    def df_between(self) -> int:
        return self.groups - 1

    @property
    def df_within(self) -> int:
        return self.observations - self.groups


def one_way_anova(groups) -> AnovaResult:
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2 or any(g.size < 2 for g in groups):
        raise ContractError("ANOVA needs at least two groups of at least two observations")
    total = np.concatenate(groups)
    grand = total.mean()
    ssb = sum(g.size * (g.mean() - grand) ** 2 for g in groups)
    ssw = sum(float(np.sum((g - g.mean()) ** 2)) for g in groups)
    k, n = len(groups), total.size
    if ssw == 0.0:
        raise DegenerateVarianceError("every group has zero within-group variance")
    f = (ssb / (k - 1)) / (ssw / (n - k))
    p = float(stats.f.sf(f, k - 1, n - k))
    return AnovaResult(float(f), min(max(p, 0.0), 1.0), k, n)


# ------------------------------------------------------------------- records

RECORD_FIELDS = ["utterance", "noise", "snr_db", "method", "estoi", "delta_estoi", "sti_category"]
ANOVA_FIELDS = ["noise", "snr_db", "metric", "f_stat", "p_value"]
SUMMARY_STATS = ["mean", "median", "q1", "q3", "min", "max"]


@dataclass
class EvalRecord:
    utterance: str
    noise: str
    snr_db: float
    method: str
    estoi: float
    delta_estoi: float = 0.0
    sti_category: str = field(default="")
    pesq: float | None = None

    def __post_init__(self):
        if not self.sti_category:
            self.sti_category = sti_category(self.estoi)

    def row(self) -> list:
        return [
            self.utterance,
            self.noise,
            _fmt(self.snr_db),
            self.method,
            _fmt(self.estoi),
            _fmt(self.delta_estoi),
            self.sti_category,
        ]


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return f"{float(v):.6g}"


def attach_deltas(records) -> list[EvalRecord]:
    """Fill delta_estoi against the matching unprocessed record."""
    base = {
        (r.utterance, r.noise, r.snr_db): r.estoi for r in records if r.method == "unprocessed"
    }
    for r in records:
        key = (r.utterance, r.noise, r.snr_db)
        r.delta_estoi = r.estoi - base[key] if key in base else float("nan")
    return records


def record_sort_key(r: EvalRecord):
    return (r.noise, r.snr_db, r.method, r.utterance)


def _describe(values) -> dict:
    v = np.asarray(values, dtype=float)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return dict.fromkeys(SUMMARY_STATS, float("nan"))
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {
        "mean": float(v.mean()),
        "median": float(med),
        "q1": float(q1),
        "q3": float(q3),
        "min": float(v.min()),
        "max": float(v.max()),
    }


def summarize(records) -> list[dict]:
    """Per (noise, snr, method) distribution statistics of ESTOI and delta."""
    if not records:
        raise ContractError("no records to summarise")
    cells: dict = {}
    for r in records:
        cells.setdefault((r.noise, r.snr_db, r.method), []).append(r)
    rows = []
    for (noise, snr, method) in sorted(cells):
        group = cells[(noise, snr, method)]
        row = {"noise": noise, "snr_db": snr, "method": method, "count": len(group)}
        for name, vals in (
            ("estoi", [r.estoi for r in group]),
            ("delta_estoi", [r.delta_estoi for r in group]),
        ):
            for stat, value in _describe(vals).items():
                row[f"{name}_{stat}"] = value
        rows.append(row)
    return rows


SUMMARY_FIELDS = ["noise", "snr_db", "method", "count"] + [
    f"{m}_{s}" for m in ("estoi", "delta_estoi") for s in SUMMARY_STATS
]


def anova_by_condition(records, metric="estoi") -> list[dict]:
    """ANOVA across methods at each (noise, snr) cell."""
    cells: dict = {}
    for r in records:
        cells.setdefault((r.noise, r.snr_db), {}).setdefault(r.method, []).append(getattr(r, metric))
    rows = []
    for noise, snr in sorted(cells):
        groups = [cells[(noise, snr)][m] for m in sorted(cells[(noise, snr)])]
        try:
            res = one_way_anova(groups)
            f, p = res.f_statistic, res.p_value
        except (ContractError, DegenerateVarianceError):
            f = p = float("nan")
        rows.append({"noise": noise, "snr_db": snr, "metric": metric, "f_stat": f, "p_value": p})
    return rows


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(RECORD_FIELDS)
        for r in sorted(records, key=record_sort_key):
            out.writerow(r.row())


def write_table_csv(rows, fields, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(fields)
        for row in rows:
            out.writerow([row[f] if isinstance(row[f], str) else _fmt(row[f]) for f in fields])


def read_records_csv(path) -> list[EvalRecord]:
    with open(path, newline="") as fh:
        return [
            EvalRecord(
                row["utterance"],
                row["noise"],
                float(row["snr_db"]),
                row["method"],
                float(row["estoi"]),
                float(row["delta_estoi"]),
                row["sti_category"],
            )
            for row in csv.DictReader(fh)
        ]

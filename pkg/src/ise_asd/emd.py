"""Empirical mode decomposition and its noise-assisted ensemble variant.

Sifting, extrema detection and the natural cubic spline envelopes are
compiled with numba; an EEMD of a 512-sample frame with 50 members runs in
a few tens of milliseconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ContractError

MIN_FRAME = 8


@dataclass(frozen=True)
class EemdConfig:
    ensemble_size: int = 50
    noise_std_ratio: float = 0.2
    sd_threshold: float = 0.2
    max_sifts: int = 10
    # extra sifts allowed, past max_sifts, to reach the extrema/zero-crossing balance
    max_extra_sifts: int = 40
    mirror_count: int = 2


@dataclass(frozen=True, eq=False)
class ImfDecomposition:
    imfs: np.ndarray  # shape (K, n)
    residual: np.ndarray
    ensemble_size: int = 1
    noise_std_ratio: float = 0.0
    sift_counts: tuple = field(default=())

    @property
    def count(self) -> int:
        return self.imfs.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.imfs.sum(axis=0) + self.residual


def max_imf_count(n: int) -> int:
    return int(math.ceil(math.log2(n))) + 1


# ------------------------------------------------------------------ kernels


@numba.njit(cache=True)
def _extrema(x):
    """Indices of local maxima and minima; plateaus resolve to their centre."""
    n = x.size
    maxima = np.empty(n, np.int64)
    minima = np.empty(n, np.int64)
    nmax = 0
    nmin = 0
    i = 1
    while i < n - 1:
        if x[i] > x[i - 1]:
            j = i
            while j < n - 1 and x[j + 1] == x[j]:
                j += 1
            if j < n - 1 and x[j + 1] < x[j]:
                maxima[nmax] = (i + j) // 2
                nmax += 1
            i = j + 1
        elif x[i] < x[i - 1]:
            j = i
            while j < n - 1 and x[j + 1] == x[j]:
                j += 1
            if j < n - 1 and x[j + 1] > x[j]:
                minima[nmin] = (i + j) // 2
                nmin += 1
            i = j + 1
        else:
            i += 1
    return maxima[:nmax], minima[:nmin]


@numba.njit(cache=True)
def _zero_crossings(x):
    count = 0
    prev = 0.0
    for v in x:
        if v != 0.0:
            if prev != 0.0 and (v > 0.0) != (prev > 0.0):
                count += 1
            prev = v
    return count


@numba.njit(cache=True)
def _natural_spline(t, y, n):
    """Evaluate the natural cubic spline through (t, y) at 0..n-1."""
    m = t.size
    out = np.empty(n)
    if m == 2:
        slope = (y[1] - y[0]) / (t[1] - t[0])
        for i in range(n):
            out[i] = y[0] + slope * (i - t[0])
        return out
    h = np.empty(m - 1)
    for i in range(m - 1):
        h[i] = t[i + 1] - t[i]
    # tridiagonal system for interior second derivatives
    k = m - 2
    diag = np.empty(k)
    rhs = np.empty(k)
    for i in range(k):
        diag[i] = 2.0 * (h[i] + h[i + 1])
        rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i])
    for i in range(1, k):
        w = h[i] / diag[i - 1]
        diag[i] -= w * h[i]
        rhs[i] -= w * rhs[i - 1]
    sec = np.zeros(m)
    sec[k] = rhs[k - 1] / diag[k - 1]
    for i in range(k - 2, -1, -1):
        sec[i + 1] = (rhs[i] - h[i + 1] * sec[i + 2]) / diag[i]
    seg = 0
    for i in range(n):
        ti = float(i)
        while seg < m - 2 and ti > t[seg + 1]:
            seg += 1
        hs = h[seg]
        a = (t[seg + 1] - ti) / hs
        b = (ti - t[seg]) / hs
        out[i] = (
            a * y[seg]
            + b * y[seg + 1]
            + ((a**3 - a) * sec[seg] + (b**3 - b) * sec[seg + 1]) * hs * hs / 6.0
        )
    return out


@numba.njit(cache=True)
def _mirrored_knots(idx, x, nsym):
    """Knot set with the outermost extrema reflected about both frame edges."""
    n = x.size
    cnt = idx.size
    left = min(nsym, cnt)
    right = min(nsym, cnt)
    t = np.empty(cnt + left + right)
    y = np.empty(cnt + left + right)
    p = 0
    for j in range(left - 1, -1, -1):
        if idx[j] > 0:
            t[p] = -float(idx[j])
            y[p] = x[idx[j]]
            p += 1
    for j in range(cnt):
        t[p] = float(idx[j])
        y[p] = x[idx[j]]
        p += 1
    for j in range(cnt - 1, cnt - 1 - right, -1):
        if idx[j] < n - 1:
            t[p] = 2.0 * (n - 1) - idx[j]
            y[p] = x[idx[j]]
            p += 1
    return t[:p], y[:p]


@numba.njit(cache=True)
def _is_balanced(h):
    mx, mn = _extrema(h)
    return abs(mx.size + mn.size - _zero_crossings(h)) <= 1


@numba.njit(cache=True)
def _sift(h, sd_threshold, max_sifts, max_extra, nsym):
    n = h.size
    h = h.copy()
    sifts = 0
    while True:
        mx, mn = _extrema(h)
        if mx.size < 2 or mn.size < 2:
            break
        tu, yu = _mirrored_knots(mx, h, nsym)
        tl, yl = _mirrored_knots(mn, h, nsym)
        upper = _natural_spline(tu, yu, n)
        lower = _natural_spline(tl, yl, n)
        num = 0.0
        den = 0.0
        for i in range(n):
            mean = 0.5 * (upper[i] + lower[i])
            num += mean * mean
            den += h[i] * h[i]
            h[i] -= mean
        sifts += 1
        sd = num / den if den > 0.0 else 0.0
        if sifts >= max_sifts + max_extra:
            break
        if sd < sd_threshold or sifts >= max_sifts:
            if _is_balanced(h):
                break
    return h, sifts


@numba.njit(cache=True)
def _emd(x, max_imfs, sd_threshold, max_sifts, max_extra, nsym):
    n = x.size
    imfs = np.zeros((max_imfs, n))
    sifts = np.zeros(max_imfs, np.int64)
    residue = x.copy()
    k = 0
    while k < max_imfs:
        mx, mn = _extrema(residue)
        if mx.size < 2 or mn.size < 2:
            break
        imf, s = _sift(residue, sd_threshold, max_sifts, max_extra, nsym)
        imfs[k] = imf
        sifts[k] = s
        residue = residue - imf
        k += 1
    return imfs[:k], sifts[:k]


@numba.njit(cache=True)
def _ensemble(x, noise, max_imfs, sd_threshold, max_sifts, max_extra, nsym):
    members, n = noise.shape
    total = np.zeros((max_imfs, n))
    kmax = 0
    for e in range(members):
        imfs, _ = _emd(x + noise[e], max_imfs, sd_threshold, max_sifts, max_extra, nsym)
        k = imfs.shape[0]
        for i in range(k):
            total[i] += imfs[i]
        if k > kmax:
            kmax = k
    return total[:kmax] / members


# ---------------------------------------------------------------- public API


def _check_frame(frame) -> np.ndarray:
    x = np.ascontiguousarray(frame, dtype=np.float64)
    if x.ndim != 1 or x.size < MIN_FRAME:
        raise ContractError(f"EMD needs a 1-D frame of at least {MIN_FRAME} samples")
    if not np.all(np.isfinite(x)):
        raise ContractError("frame contains non-finite samples")
    return x


def emd(frame, config: EemdConfig = EemdConfig()) -> ImfDecomposition:
    """Decompose `frame` into IMFs by cubic-spline sifting.

    The residual is the input minus the extracted IMFs, so the decomposition
    sums back to the input up to round-off. Frames with fewer than two maxima
    or two minima come back as a bare residual (K = 0).
    """
    x = _check_frame(frame)
    imfs, sifts = _emd(
        x,
        max_imf_count(x.size),
        config.sd_threshold,
        config.max_sifts,
        config.max_extra_sifts,
        config.mirror_count,
    )
    residual = x - imfs.sum(axis=0) if imfs.shape[0] else x.copy()
    return ImfDecomposition(imfs, residual, 1, 0.0, tuple(int(s) for s in sifts))


def eemd(
    frame,
    ensemble_size: int | None = None,
    noise_std_ratio: float | None = None,
    seed: int = 0,
    config: EemdConfig = EemdConfig(),
) -> ImfDecomposition:
    """Ensemble EMD: average the IMFs of noise-perturbed copies of `frame`.

    Members with fewer IMFs contribute zeros to the missing indices. The
    averaged IMFs are not re-sifted. The residual is whatever the averaged
    IMFs leave of the input, which absorbs the ensemble-mean noise.
    """
    x = _check_frame(frame)
    members = config.ensemble_size if ensemble_size is None else int(ensemble_size)
    ratio = config.noise_std_ratio if noise_std_ratio is None else float(noise_std_ratio)
    if members < 1:
        raise ContractError("ensemble_size must be at least 1")
    if not 0.0 < ratio <= 1.0:
        raise ContractError("noise_std_ratio must lie in (0, 1]")
    std = float(np.std(x))
    if std == 0.0:
        return emd(x, config)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((members, x.size)) * (ratio * std)
    imfs = _ensemble(
        x,
        noise,
        max_imf_count(x.size),
        config.sd_threshold,
        config.max_sifts,
        config.max_extra_sifts,
        config.mirror_count,
    )
    residual = x - imfs.sum(axis=0) if imfs.shape[0] else x.copy()
    return ImfDecomposition(imfs, residual, members, ratio)


def imf_property_gap(imf) -> int:
    """|#extrema - #zero-crossings| of one IMF."""
    imf = np.ascontiguousarray(imf, dtype=np.float64)
    mx, mn = _extrema(imf)
    return abs(mx.size + mn.size - _zero_crossings(imf))


def dump_imfs_csv(dec: ImfDecomposition, path) -> None:
    cols = np.vstack([dec.imfs, dec.residual[None, :]]).T
    header = ",".join([f"imf{k + 1}" for k in range(dec.count)] + ["residual"])
    np.savetxt(path, cols, delimiter=",", header=header, comments="", fmt="%.10g")

"""Phase-compensated gammatone filters centred on F0 harmonics, and the
subtractive cascade that splits a frame into harmonic bands plus a residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy import signal as sps

from .errors import ContractError, FilterOutOfBandError

ORDER = 4
BANDWIDTH_FACTOR = 0.25
TRUNCATION_DB = 60.0
MAX_DURATION_BANDWIDTHS = 4.0  # cap on the response length, in units of 1/b


@dataclass(frozen=True, eq=False)
class GammatoneFilter:
    order: int
    center_frequency: float
    bandwidth: float
    compensation: float  # t_c in seconds
    amplitude: float
    sample_rate: int
    response: np.ndarray  # h[m] for m = -offset .. len-offset-1
    offset: int  # index of t = 0 in `response`

    @property
    def truncation_length(self) -> int:
        return self.response.size

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.response.size) - self.offset) / self.sample_rate

    def envelope(self) -> np.ndarray:
        """Gamma envelope a (t+t_c)^(n-1) exp(-2 pi b (t+t_c)) on the sample grid."""
        s = self.times + self.compensation
        return self.amplitude * s ** (self.order - 1) * np.exp(-2 * np.pi * self.bandwidth * s)

    def frequency_response(self, freqs) -> np.ndarray:
        m = np.arange(self.response.size) - self.offset
        w = 2 * np.pi * np.asarray(freqs, dtype=float)[..., None] / self.sample_rate
        return np.exp(-1j * w * m) @ self.response


def compensation_time(bandwidth: float, order: int = ORDER) -> float:
    return (order - 1) / (2 * math.pi * bandwidth)


def _decay_end(tc: float, bandwidth: float, order: int) -> float:
    """Time after envelope onset where it falls TRUNCATION_DB below its peak."""
    cap = MAX_DURATION_BANDWIDTHS / bandwidth
    if order == 1:
        end = TRUNCATION_DB / 20 * math.log(10) / (2 * math.pi * bandwidth)
        return min(end, cap)
    target = -TRUNCATION_DB / 20 * math.log(10)

    def level(s):
        return (order - 1) * math.log(s / tc) - 2 * math.pi * bandwidth * (s - tc) - target

    if level(cap) > 0:
        return cap
    return optimize.brentq(level, tc, cap)


def build_filter(
    f0: float,
    k: int,
    fs: int,
    order: int = ORDER,
    bandwidth_rule: str = "fixed",
    check_range: bool = True,
) -> GammatoneFilter:
    """Sampled, peak-aligned gammatone response for harmonic `k` of `f0`.

    Bandwidth is 0.25*f0 ("fixed") or 0.25*k*f0 ("harmonic"). The amplitude
    is chosen so the discrete-time response has unit gain at k*f0.
    """
    if check_range and not 50.0 <= f0 <= 400.0:
        raise ContractError(f"f0 {f0} Hz outside [50, 400]")
    if k < 1 or order < 1:
        raise ContractError("harmonic index and order must be positive")
    fc = k * f0
    if fc >= fs / 2:
        raise FilterOutOfBandError(f"centre {fc} Hz is at or above Nyquist {fs / 2} Hz")
    if bandwidth_rule == "fixed":
        b = BANDWIDTH_FACTOR * f0
    elif bandwidth_rule == "harmonic":
        b = BANDWIDTH_FACTOR * k * f0
    else:
        raise ContractError(f"unknown bandwidth rule {bandwidth_rule!r}")
    tc = compensation_time(b, order)
    end = _decay_end(tc, b, order)
    m0 = math.ceil(-tc * fs)
    m1 = math.floor((end - tc) * fs)
    m = np.arange(m0, m1 + 1)
    t = m / fs
    s = t + tc
    h = s ** (order - 1) * np.cos(2 * np.pi * fc * t) * np.exp(-2 * np.pi * b * s)
    gain = abs(np.exp(-2j * np.pi * fc * m / fs) @ h)
    a = 1.0 / gain
    return GammatoneFilter(order, fc, b, tc, a, int(fs), h * a, -m0)


def harmonic_count(f0: float, fs: float, limit: int) -> int:
    """Largest L <= limit with L*f0 strictly below Nyquist."""
    return max(0, min(limit, math.ceil(fs / 2 / f0) - 1))


def apply_filter(x, filt: GammatoneFilter, method: str = "direct") -> np.ndarray:
    """Zero-padded linear convolution trimmed back to len(x), aligned at t = 0."""
    x = np.asarray(x, dtype=np.float64)
    if method == "direct":
        full = np.convolve(x, filt.response)
    elif method == "fft":
        full = sps.fftconvolve(x, filt.response)
    else:
        raise ContractError(f"unknown convolution method {method!r}")
    return full[filt.offset : filt.offset + x.size]


@dataclass(eq=False)
class CascadeOutput:
    bands: np.ndarray  # shape (L, n)
    residual: np.ndarray

    def combine(self, gains) -> np.ndarray:
        gains = np.asarray(gains, dtype=float)
        return gains @ self.bands + self.residual


def cascade_filter(frame, filters, method: str = "direct") -> CascadeOutput:
    """Filter successively, subtracting each band from the running input."""
    x = np.array(frame, dtype=np.float64)
    if len(filters) < 1:
        raise ContractError("cascade needs at least one filter")
    bands = np.empty((len(filters), x.size))
    for k, filt in enumerate(filters):
        bands[k] = apply_filter(x, filt, method)
        x = x - bands[k]
    return CascadeOutput(bands, x)

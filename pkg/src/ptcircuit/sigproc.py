"""Eigenfrequency estimation from voltage traces.

Oscillation frequencies come from Hann-windowed DFT peaks refined by
three-point log-parabolic interpolation; the imaginary part comes from a
least-squares line through the logarithm of the extrema of ``|v|`` (one
per beat period when two tones beat against each other).
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GrowthOverflowError

MIN_DFT_SAMPLES = 256
NOISE_FLOOR = 0.05
TRANSIENT_FRACTION = 0.2
ZERO_PAD = 8


class Regime(str, enum.Enum):
    DECAYING_BEATS = "DECAYING_BEATS"
    NEAR_DEGENERATE = "NEAR_DEGENERATE"
    GROWING_SINGLE_MODE = "GROWING_SINGLE_MODE"


@dataclass(frozen=True)
class SpectralEstimate:
    frequencies: tuple
    envelope_rate: float
    regime: Regime
    r_squared: float
    diagnostics: dict = field(default_factory=dict)

    def as_record(self):
        """``key=value`` lines with 17 significant digits."""
        f = list(self.frequencies) + [math.nan] * (2 - len(self.frequencies))
        lines = [
            f"omega_r_1={f[0]:.17g}",
            f"omega_r_2={f[1]:.17g}",
            f"omega_i={self.envelope_rate:.17g}",
            f"regime={self.regime.value}",
            f"r_squared={self.r_squared:.17g}",
        ]
        return "\n".join(lines) + "\n"


def bin_width(n_samples, dt):
    """Angular-frequency spacing of the unpadded DFT."""
    return 2 * np.pi / (n_samples * dt)


def dft_peaks(v, dt, max_peaks=2):
    """Strongest spectral peaks of a real signal as ``(omega, amplitude)`` pairs.

    The signal is Hann-windowed and zero-padded by a factor of 8 before the
    transform. Peaks are local maxima above 5% of the global maximum; each is
    refined by a parabola through the log-magnitudes of its neighbours.
    Results are ordered by decreasing amplitude.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    if n < MIN_DFT_SAMPLES:
        raise DomainError(f"DFT peak search needs at least {MIN_DFT_SAMPLES} samples, got {n}")
    window = np.hanning(n)
    n_fft = 1 << int(math.ceil(math.log2(ZERO_PAD * n)))
    mag = np.abs(np.fft.rfft(v * window, n_fft))
    top = mag.max()
    if top == 0.0:
        return []
    inner = mag[1:-1]
    is_peak = (inner > mag[:-2]) & (inner >= mag[2:]) & (inner >= NOISE_FLOOR * top)
    candidates = np.nonzero(is_peak)[0] + 1
    candidates = candidates[np.argsort(mag[candidates])[::-1]][:max_peaks]

    step = 2 * np.pi / (n_fft * dt)
    gain = window.sum() / 2
    peaks = []
    for k in candidates:
        a, b, g = np.log(mag[k - 1:k + 2])
        curvature = a - 2 * b + g
        offset = 0.5 * (a - g) / curvature if curvature != 0 else 0.0
        log_peak = b - 0.25 * (a - g) * offset
        peaks.append((float((k + offset) * step), float(math.exp(log_peak) / gain)))
    return peaks


def _extrema_envelope(v, dt):
    a = np.abs(np.asarray(v, dtype=float))
    if not np.all(np.isfinite(a)):
        first = int(np.argmin(np.isfinite(a)))
        raise GrowthOverflowError("non-finite values in envelope", time_reached=first * dt)
    inner = a[1:-1]
    idx = np.nonzero((inner > a[:-2]) & (inner >= a[2:]))[0] + 1
    left, mid, right = a[idx - 1], a[idx], a[idx + 1]
    curvature = left - 2 * mid + right
    with np.errstate(divide="ignore", invalid="ignore"):
        offset = np.where(curvature != 0, 0.5 * (left - right) / curvature, 0.0)
    peak = mid - 0.25 * (left - right) * offset
    return (idx + offset) * dt, peak


def _beat_maxima(t, peak, beat_period):
    bucket = np.floor((t - t[0]) / beat_period).astype(int)
    keep = []
    for b in np.unique(bucket):
        members = np.nonzero(bucket == b)[0]
        keep.append(members[np.argmax(peak[members])])
    keep = np.array(keep)
    return t[keep], peak[keep]


def envelope_rate(v, dt, beat_period=None):
    """Exponential rate of the oscillation envelope and the fit's r-squared.

    The envelope samples are the local maxima of ``|v|``. With a
    ``beat_period`` only the largest extremum of each beat-period window is
    kept, so a two-tone signal is followed along its beat maxima. The first
    20% of the envelope samples are discarded as transient.
    """
    t, peak = _extrema_envelope(v, dt)
    if t.size < 4:
        raise DomainError(f"envelope fit needs at least 4 extrema, found {t.size}")
    if np.any(peak <= 0):
        raise DomainError("envelope contains non-positive extrema")
    if beat_period is not None:
        tb, pb = _beat_maxima(t, peak, beat_period)
        if tb.size - int(math.floor(TRANSIENT_FRACTION * tb.size)) >= 4:
            t, peak = tb, pb
    start = int(math.floor(TRANSIENT_FRACTION * t.size))
    t, y = t[start:], np.log(peak[start:])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    if ss_res <= 1e-12 * y.size:
        # flat to within 1e-6 in log: an exact fit, even when ss_tot is only jitter
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return float(slope), r2


def classify(n_peaks, separation_bins, rate, r_squared):
    """Dynamical regime from the number of peaks, their spacing and the envelope fit.

    Two peaks closer than 3 bins or a poor envelope fit (r^2 < 0.9) are near
    degenerate. Otherwise two decaying peaks are beats and one growing peak is
    the single-mode growth of the broken phase; the remaining mixed cases
    (one decaying peak, two peaks with growth) are also reported as near
    degenerate because neither clean picture applies.
    """
    if r_squared < 0.9:
        return Regime.NEAR_DEGENERATE
    if n_peaks == 2:
        if separation_bins < 3 or rate >= 0:
            return Regime.NEAR_DEGENERATE
        return Regime.DECAYING_BEATS
    if rate > 0:
        return Regime.GROWING_SINGLE_MODE
    return Regime.NEAR_DEGENERATE


def estimate_modes(trace, channel=1):
    v = trace.voltage(channel)
    peaks = dft_peaks(v, trace.dt, max_peaks=2)
    if not peaks:
        raise DomainError(f"no spectral peak found in channel {channel}")
    freqs = tuple(sorted((f for f, _ in peaks), reverse=True))
    width = bin_width(v.size, trace.dt)
    beat_period = None
    separation = math.inf
    if len(freqs) == 2:
        separation = (freqs[0] - freqs[1]) / width
        beat_period = 2 * np.pi / (freqs[0] - freqs[1])
    rate, r2 = envelope_rate(v, trace.dt, beat_period=beat_period)
    regime = classify(len(freqs), separation, rate, r2)
    diagnostics = {
        "peak_amplitudes": tuple(a for _, a in sorted(peaks, key=lambda p: p[0], reverse=True)),
        "n_peaks": len(freqs),
        "separation_bins": separation,
        "bin_width": width,
        "fit_r_squared": r2,
    }
    return SpectralEstimate(frequencies=freqs, envelope_rate=rate, regime=regime, r_squared=r2,
                            diagnostics=diagnostics)

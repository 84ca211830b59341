"""Digital demodulation and ensemble statistics of homodyne records.

The measurement pipeline multiplies the photocurrent by cos/sin at the
sideband frequency and integrates over contiguous windows of an integer
number of sideband periods (hop = window). Ensemble means and variances
use the population estimator <A^2> - <A>^2. Variances are reported in
shot-noise units once divided by the calibration scalar from blank,
control-free runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .detection import HomodyneRecord


class CalibrationError(RuntimeError):
    """Shot-noise calibration unstable across ensemble halves."""


@dataclass
class QuadratureSeries:
    """Windowed quadratures X(t), Y(t) of one record."""

    times: np.ndarray  # window centers, s
    x: np.ndarray
    y: np.ndarray
    window: float  # t_m, s
    omega: float  # rad/s
    n_cycles: int


@dataclass
class QuadratureStats:
    """Pointwise ensemble statistics of demodulated records."""

    times: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    var_x: np.ndarray
    var_y: np.ndarray
    n_realizations: int
    window: float
    omega: float
    shot_reference: float = 1.0

    def normalized(self, shot: float) -> "QuadratureStats":
        """Rescale so that the given calibration scalar becomes 1."""
        if shot <= 0:
            raise ValueError("shot reference must be > 0")
        root = np.sqrt(shot)
        return QuadratureStats(
            times=self.times,
            mean_x=self.mean_x / root,
            mean_y=self.mean_y / root,
            var_x=self.var_x / shot,
            var_y=self.var_y / shot,
            n_realizations=self.n_realizations,
            window=self.window,
            omega=self.omega,
            shot_reference=shot,
        )


def pick_cycles(omega: float, sample_rate: float) -> int:
    """Pick n in {2, 3, 4} whose window best matches a whole number of
    samples (exact for commensurate sideband/sampling rates)."""
    best, best_err = 3, np.inf
    for n in (3, 2, 4):
        span = n * 2 * np.pi / omega * sample_rate
        err = abs(span - round(span))
        if err < best_err - 1e-12:
            best, best_err = n, err
    return best


def demodulate(record: HomodyneRecord, omega: float, n_cycles: int,
               phase: float = 0.0) -> QuadratureSeries:
    """Windowed IQ demodulation at omega.

    X_k = (2/t_m) integral of s(t) cos(omega t + phase) over window k,
    and likewise Y_k with sin; windows are contiguous, hop = t_m.
    Normalization recovers a noiseless tone's (X0, Y0) exactly.
    """
    if not 2 <= n_cycles <= 4:
        raise ValueError("n_cycles must be within [2, 4]")
    t_m = n_cycles * 2 * np.pi / omega
    ns = int(round(t_m * record.sample_rate))
    if ns < 4:
        raise ValueError("demodulation window shorter than 4 samples")
    values = record.values()
    n_win = values.size // ns
    if n_win < 1:
        raise ValueError("record too short for one demodulation window")
    values = values[: n_win * ns]
    t = record.times()[: n_win * ns]
    c = np.cos(omega * t + phase)
    s = np.sin(omega * t + phase)
    x = (values * c).reshape(n_win, ns).sum(axis=1) * (2.0 / ns)
    y = (values * s).reshape(n_win, ns).sum(axis=1) * (2.0 / ns)
    centers = record.t0 + (np.arange(n_win) + 0.5) * ns / record.sample_rate
    return QuadratureSeries(times=centers, x=x, y=y, window=t_m,
                            omega=omega, n_cycles=n_cycles)


def _check_shared_grid(series: Sequence[QuadratureSeries]):
    first = series[0]
    for s in series[1:]:
        if s.x.size != first.x.size or s.omega != first.omega \
                or s.n_cycles != first.n_cycles \
                or not np.allclose(s.times, first.times, rtol=0, atol=1e-12):
            raise ValueError("mismatched series grids")


def ensemble_stats(series: Sequence[QuadratureSeries]) -> QuadratureStats:
    """Pointwise ensemble mean and population variance, <A^2> - <A>^2."""
    if len(series) < 2:
        raise ValueError("need at least 2 realizations")
    _check_shared_grid(series)
    xs = np.stack([s.x for s in series])
    ys = np.stack([s.y for s in series])
    mean_x = xs.mean(axis=0)
    mean_y = ys.mean(axis=0)
    var_x = (xs**2).mean(axis=0) - mean_x**2
    var_y = (ys**2).mean(axis=0) - mean_y**2
    f = series[0]
    return QuadratureStats(times=f.times, mean_x=mean_x, mean_y=mean_y,
                           var_x=var_x, var_y=var_y,
                           n_realizations=len(series),
                           window=f.window, omega=f.omega)


@dataclass
class SubtractionResult:
    """Transient-subtraction output with its noise accounting.

    Sample-wise subtraction of a paired blank removes the deterministic
    control transient but, like a 50/50 beamsplitter, doubles the noise:
    a vacuum-level input comes out at variance 2, so corrected variances
    subtract one shot unit from the subtracted ones.
    """

    raw: QuadratureStats
    subtracted: QuadratureStats
    corrected_var_x: np.ndarray
    corrected_var_y: np.ndarray


def subtract_transients(signal_records: Sequence[HomodyneRecord],
                        blank_records: Sequence[HomodyneRecord],
                        omega: float, n_cycles: int) -> SubtractionResult:
    """Point-to-point subtraction of paired blank runs before demodulation."""
    if len(signal_records) != len(blank_records):
        raise ValueError("signal and blank runs must be paired one to one")
    raw_series = []
    sub_series = []
    for sig, blank in zip(signal_records, blank_records):
        if sig.samples.size != blank.samples.size or sig.t0 != blank.t0:
            raise ValueError("paired records must share the sampling window")
        raw_series.append(demodulate(sig, omega, n_cycles))
        diff = HomodyneRecord(
            samples=sig.values() - blank.values(),
            t0=sig.t0, sample_rate=sig.sample_rate, bits=sig.bits,
            full_scale=sig.full_scale, quantized=False, meta=sig.meta,
        )
        sub_series.append(demodulate(diff, omega, n_cycles))
    raw = ensemble_stats(raw_series)
    sub = ensemble_stats(sub_series)
    return SubtractionResult(
        raw=raw,
        subtracted=sub,
        corrected_var_x=sub.var_x - 1.0,
        corrected_var_y=sub.var_y - 1.0,
    )


def shot_noise_calibration(records: Sequence[HomodyneRecord], omega: float,
                           n_cycles: int) -> float:
    """Mean demodulated variance of blank, control-free records.

    The returned scalar defines the shot-noise unit. Raises
    CalibrationError when the estimate differs by more than 10% between
    the two halves of the ensemble.
    """
    if len(records) < 100:
        raise ValueError("shot-noise calibration needs at least 100 runs")
    series = [demodulate(r, omega, n_cycles) for r in records]
    _check_shared_grid(series)

    def mean_var(chunk):
        st = ensemble_stats(chunk)
        return 0.5 * (st.var_x.mean() + st.var_y.mean())

    half = len(series) // 2
    v1 = mean_var(series[:half])
    v2 = mean_var(series[half:])
    v = mean_var(series)
    if abs(v1 - v2) > 0.10 * v:
        raise CalibrationError(
            f"calibration halves disagree: {v1:.4f} vs {v2:.4f}"
        )
    return float(v)


def moving_average_complex(mean_x: np.ndarray, mean_y: np.ndarray,
                           width: int = 3) -> np.ndarray:
    """Centered moving average of the complex mean trace X + iY."""
    z = mean_x + 1j * mean_y
    kernel = np.ones(width) / width
    return np.convolve(z, kernel, mode="same")


def extract_pulse_metrics(stats: QuadratureStats, t_start: float,
                          t_end: float, smooth: int = 3):
    """Peak amplitude |X+iY| and phase of the smoothed mean trace inside
    [t_start, t_end]; returns (amplitude, phase, t_peak)."""
    z = moving_average_complex(stats.mean_x, stats.mean_y, smooth)
    mask = (stats.times >= t_start) & (stats.times <= t_end)
    if not np.any(mask):
        raise ValueError("no demodulation windows inside the requested span")
    idx = np.nonzero(mask)[0]
    k = idx[np.argmax(np.abs(z[idx]))]
    return float(np.abs(z[k])), float(np.angle(z[k])), float(stats.times[k])


def write_stats_csv(stats: QuadratureStats, path) -> None:
    """CSV export: t, mean_x, mean_y, var_x, var_y (shot-noise units)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([
            "t (s)",
            "mean_x (shot-noise units)",
            "mean_y (shot-noise units)",
            "var_x (shot-noise units)",
            "var_y (shot-noise units)",
        ])
        for i in range(stats.times.size):
            w.writerow([repr(float(v)) for v in (
                stats.times[i], stats.mean_x[i], stats.mean_y[i],
                stats.var_x[i], stats.var_y[i])])


def read_stats_csv(path) -> QuadratureStats:
    rows = []
    with open(path, newline="") as f:
        r = csv.reader(f)
        next(r)  # header
        for row in r:
            rows.append([float(v) for v in row])
    arr = np.array(rows)
    return QuadratureStats(
        times=arr[:, 0], mean_x=arr[:, 1], mean_y=arr[:, 2],
        var_x=arr[:, 3], var_y=arr[:, 4], n_realizations=0,
        window=float(arr[1, 0] - arr[0, 0]) if len(rows) > 1 else 0.0,
        omega=0.0,
    )

"""Homodyne photocurrent synthesis: signal, control transient, shot noise, ADC.

A record holds the sampled photocurrent difference of one experimental
realization. Quadrature units are shot-noise normalized: a blank record
demodulated over the reference window (``demod_cycles`` sideband periods)
has unit variance per quadrature. The deterministic part of a record is
identical across realizations for identical settings; only the noise
depends on the seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .medium import ControlField
from .storage import StorageOutcome


class SaturationError(RuntimeError):
    """More than 0.1% of samples clipped at the quantizer rails."""


@dataclass
class AcquisitionConfig:
    """Digitizer and local-oscillator settings.

    full_scale maps quadrature units to the ADC rails; demod_cycles is
    the reference demodulation window length (in sideband periods) that
    defines the shot-noise unit. shot_noise / quantizer switch those two
    stages off for noiseless or unquantized pipelines.
    """

    sample_rate: float = 50e6
    bits: int = 14
    full_scale: float = 96.0
    lo_phase: float = 0.0
    phase_jitter: float = 0.0  # rad rms, residual LO lock error
    demod_cycles: int = 3
    shot_noise: bool = True
    quantizer: bool = True

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")
        if not 8 <= self.bits <= 24:
            raise ValueError("bits must be within [8, 24]")
        if self.full_scale <= 0:
            raise ValueError("full_scale must be > 0")
        if not 2 <= self.demod_cycles <= 4:
            raise ValueError("demod_cycles must be within [2, 4]")

    @property
    def max_code(self) -> int:
        return 2 ** (self.bits - 1) - 1

    @property
    def lsb(self) -> float:
        return self.full_scale / self.max_code


@dataclass
class RecordMeta:
    realization: int = 0
    seed: Optional[int] = None
    blank: bool = False
    omega: float = 0.0  # rad/s


@dataclass
class HomodyneRecord:
    """Sampled photocurrent trace of one realization."""

    samples: np.ndarray  # int16 codes when quantized, float64 otherwise
    t0: float
    sample_rate: float
    bits: int
    full_scale: float
    quantized: bool
    meta: RecordMeta = field(default_factory=RecordMeta)

    def values(self) -> np.ndarray:
        """Samples in quadrature units (dequantized if needed)."""
        if self.quantized:
            lsb = self.full_scale / (2 ** (self.bits - 1) - 1)
            return self.samples.astype(np.float64) * lsb
        return self.samples

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.sample_rate


def quantize(values: np.ndarray, acq: AcquisitionConfig) -> np.ndarray:
    """Mid-tread uniform quantizer, round-half-to-even, saturating codes.

    An input of +full_scale maps exactly to the maximum code.
    """
    codes = np.rint(np.asarray(values, dtype=np.float64) / acq.lsb)
    return np.clip(codes, -acq.max_code, acq.max_code).astype(np.int16)


def count_saturated(values: np.ndarray, acq: AcquisitionConfig) -> int:
    return int(np.count_nonzero(np.abs(values) > acq.full_scale))


def shot_noise_sigma(acq: AcquisitionConfig, omega: float) -> float:
    """Per-sample noise std giving unit demodulated variance over the
    reference window t_m = demod_cycles * 2*pi / omega."""
    t_m = acq.demod_cycles * 2 * np.pi / omega
    return float(np.sqrt(acq.sample_rate * t_m / 2.0))


def control_transient(
    t: np.ndarray, control: ControlField, omega: float, lo_phase: float = 0.0
) -> np.ndarray:
    """Deterministic switching artifact coupled into the signal channel.

    Modeled as the normalized envelope derivative carried at the sideband
    frequency, so its spectral content sits inside the demodulation band.
    """
    if control.envelope is None or control.leakage_amp == 0.0:
        return np.zeros_like(t)
    # peak of the cubic ramp slope is 1.5/ramp
    bump = control.envelope.slope(t) * control.ramp_time / 1.5
    return control.leakage_amp * bump * np.cos(omega * t + lo_phase)


def synthesize_record(
    outcome: Optional[StorageOutcome],
    control: ControlField,
    acq: AcquisitionConfig,
    seed,
    window: Optional[tuple] = None,
    omega: Optional[float] = None,
    realization: int = 0,
) -> HomodyneRecord:
    """Synthesize one homodyne record.

    ``outcome=None`` produces a blank record (no signal field): shot noise
    plus the control transient if the control carries a gating envelope.
    ``window`` is (t_start, t_stop); when omitted it is derived from the
    outcome support or from the control envelope timing.
    """
    if outcome is not None:
        omega = outcome.omega
    elif omega is None:
        raise ValueError("omega is required for blank records")

    if window is None:
        if outcome is not None:
            window = (0.0, outcome.retrieved.support[1] + 2e-6)
        elif control.envelope is not None:
            window = (0.0, control.envelope.t_on + 2 * control.ramp_time + 2e-6)
        else:
            raise ValueError("window is required when neither outcome nor "
                             "control envelope define the timing")

    t0, t1 = window
    n = int(np.ceil((t1 - t0) * acq.sample_rate))
    t = t0 + np.arange(n) / acq.sample_rate

    rng = np.random.default_rng(seed)
    lo = acq.lo_phase
    if acq.phase_jitter > 0.0:
        lo = lo + rng.normal(0.0, acq.phase_jitter)

    s = np.zeros(n)
    if outcome is not None:
        env = outcome.leak(t) + outcome.retrieved(t)
        s += 2 * env.real * np.cos(omega * t + lo)
        s += 2 * env.imag * np.sin(omega * t + lo)
    s += control_transient(t, control, omega, lo)
    if acq.shot_noise:
        sigma = shot_noise_sigma(acq, omega)
        s = s + rng.normal(0.0, sigma, n)
        if outcome is not None and outcome.excess_noise > 0.0:
            r0, r1 = outcome.retrieved.support
            mask = (t >= r0) & (t <= r1)
            s[mask] += rng.normal(
                0.0, np.sqrt(outcome.excess_noise) * sigma, int(mask.sum())
            )

    meta = RecordMeta(
        realization=realization,
        seed=None if not np.isscalar(seed) else int(seed) if seed is not None else None,
        blank=outcome is None,
        omega=float(omega),
    )
    if acq.quantizer:
        n_sat = count_saturated(s, acq)
        if n_sat > 0.001 * n:
            raise SaturationError(
                f"{n_sat}/{n} samples beyond full scale {acq.full_scale}"
            )
        samples = quantize(s, acq)
        return HomodyneRecord(samples, t0, acq.sample_rate, acq.bits,
                              acq.full_scale, True, meta)
    return HomodyneRecord(s, t0, acq.sample_rate, acq.bits,
                          acq.full_scale, False, meta)


# Flat binary record format: little-endian header {sample_rate: f64,
# bits: u16, count: u64} followed by int16 codes, plus a text sidecar.
_HEADER = struct.Struct("<dHQ")


def write_record(record: HomodyneRecord, path) -> None:
    if not record.quantized:
        raise ValueError("only quantized records can be exported")
    codes = record.samples.astype("<i2")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(record.sample_rate, record.bits, codes.size))
        f.write(codes.tobytes())
    meta_lines = [
        f"t0 = {record.t0!r}",
        f"full_scale = {record.full_scale!r}",
        f"omega = {record.meta.omega!r}",
        f"realization = {record.meta.realization}",
        f"blank = {int(record.meta.blank)}",
        f"seed = {'' if record.meta.seed is None else record.meta.seed}",
    ]
    with open(str(path) + ".meta", "w") as f:
        f.write("\n".join(meta_lines) + "\n")


def read_record(path) -> HomodyneRecord:
    with open(path, "rb") as f:
        sample_rate, bits, count = _HEADER.unpack(f.read(_HEADER.size))
        codes = np.frombuffer(f.read(2 * count), dtype="<i2").copy()
    if codes.size != count:
        raise ValueError(f"truncated record file {path}")
    kv = {}
    with open(str(path) + ".meta") as f:
        for line in f:
            if "=" in line:
                k, v = line.split("=", 1)
                kv[k.strip()] = v.strip()
    meta = RecordMeta(
        realization=int(kv.get("realization", 0)),
        seed=int(kv["seed"]) if kv.get("seed") else None,
        blank=bool(int(kv.get("blank", 0))),
        omega=float(kv.get("omega", 0.0)),
    )
    return HomodyneRecord(
        samples=codes,
        t0=float(kv["t0"]),
        sample_rate=sample_rate,
        bits=bits,
        full_scale=float(kv["full_scale"]),
        quantized=True,
        meta=meta,
    )

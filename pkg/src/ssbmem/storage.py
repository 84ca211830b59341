"""Write -> hold -> read storage channel, phenomenological backend.

The phenomenological channel reproduces the measured input-output facts
of the memory: exponential decay of the amplitude efficiency with the
hold time, the linear retrieved-phase law phi_r = phi_i + delta*tau,
the transparency-window penalty for a detuned sideband, and a leak
pulse carrying the unstored fraction of the input. It is linear in the
input amplitude, which keeps Monte-Carlo ensembles cheap. A 1D
slow-light solver backend lives in :mod:`ssbmem.propagation`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.constants import c as C_LIGHT, h as H_PLANCK

from .medium import (
    ControlField,
    MediumParams,
    _smoothstep,
    two_photon_detuning,
    window_amplitude_factor,
)

DEFAULT_ETA0 = 0.25
SIGNAL_WAVELENGTH = 852e-9  # m, optical carrier used for power bookkeeping
WEAK_SIGNAL_MAX_POWER = 1e-9  # W


class Envelope:
    """Complex field amplitude vs time, zero outside its support."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], support: tuple):
        self._fn = fn
        self.support = (float(support[0]), float(support[1]))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        lo, hi = self.support
        mask = (t >= lo) & (t <= hi)
        if np.any(mask):
            out[mask] = self._fn(t[mask])
        return out

    def energy(self, n: int = 20001) -> float:
        """Time integral of |envelope|^2 over the support."""
        lo, hi = self.support
        if hi <= lo:
            return 0.0
        t = np.linspace(lo, hi, n)
        return float(np.trapezoid(np.abs(self(t)) ** 2, t))

    @classmethod
    def zero(cls) -> "Envelope":
        return cls(lambda t: np.zeros_like(t, dtype=complex), (0.0, 0.0))

    @classmethod
    def from_samples(cls, times: np.ndarray, values: np.ndarray) -> "Envelope":
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=complex)

        def interp(t):
            return np.interp(t, times, values.real) + 1j * np.interp(
                t, times, values.imag
            )

        return cls(interp, (times[0], times[-1]))


def _unit_shape(kind: str, start: float, duration: float, ramp: float):
    """Unit-plateau pulse shape on [start, start + duration]."""
    if kind == "rectangular":
        return lambda t: np.ones_like(t)
    if kind == "smoothed-rectangular":
        if duration < 2 * ramp:
            raise ValueError("pulse duration must be at least twice the ramp")

        def shape(t):
            up = _smoothstep((t - start) / ramp)
            down = 1.0 - _smoothstep((t - start - duration + ramp) / ramp)
            return up * down

        return shape
    raise ValueError(f"unknown envelope kind {kind!r}")


@dataclass
class SignalPulse:
    """Single-sideband coherent input.

    amplitude is the complex amplitude of the pulse mode in shot-noise
    units: the demodulated quadratures of the pulse are X = 2 Re(alpha),
    Y = 2 Im(alpha). omega is the sideband offset from the carrier.
    """

    omega: float  # rad/s
    amplitude: complex
    duration: float  # s
    envelope: str = "smoothed-rectangular"
    ramp: float = 0.5e-6
    start_time: float = 0.0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be > 0")
        self.amplitude = complex(self.amplitude)
        _unit_shape(self.envelope, self.start_time, self.duration, self.ramp)

    @property
    def phase(self) -> float:
        return float(np.angle(self.amplitude))

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration

    def shape(self) -> Envelope:
        fn = _unit_shape(self.envelope, self.start_time, self.duration, self.ramp)
        return Envelope(fn, (self.start_time, self.end_time))

    def field(self) -> Envelope:
        fn = _unit_shape(self.envelope, self.start_time, self.duration, self.ramp)
        amp = self.amplitude
        return Envelope(lambda t: amp * fn(t), (self.start_time, self.end_time))

    def power_watts(self, wavelength: float = SIGNAL_WAVELENGTH,
                    reference_cycles: int = 3) -> float:
        """Mean optical power of the pulse at the optical carrier.

        |amplitude|^2 photons arrive per reference demodulation window
        t_m = reference_cycles * 2 pi / omega.
        """
        t_m = reference_cycles * 2 * np.pi / self.omega
        flux = abs(self.amplitude) ** 2 / t_m
        return flux * H_PLANCK * C_LIGHT / wavelength

    @property
    def is_weak_signal(self) -> bool:
        return self.power_watts() < WEAK_SIGNAL_MAX_POWER


@dataclass
class SpinWave:
    """Stored ground-state coherence (lumped mode, optional z profile)."""

    amplitude: complex
    z: Optional[np.ndarray] = None
    profile: Optional[np.ndarray] = None


@dataclass
class StorageOutcome:
    """Result of one pass through the memory channel."""

    omega: float
    leak: Envelope
    retrieved: Envelope
    spin_wave: SpinWave
    amplitude_efficiency: float
    retrieved_phase: float  # rad, not wrapped
    excess_noise: float
    read_start: float
    energy_audit: Optional[dict] = None


def excess_noise_of_power(power: float, table) -> float:
    """Excess quadrature noise (shot units) vs control power.

    ``table`` is a sequence of (power_W, excess) pairs; linear
    interpolation, clamped at the ends.
    """
    if table is None or len(table) == 0:
        return 0.0
    pts = sorted((float(p), float(e)) for p, e in table)
    ps = np.array([p for p, _ in pts])
    es = np.array([e for _, e in pts])
    return float(np.interp(power, ps, es))


def phenomenological_store(
    pulse: SignalPulse,
    hold_time: float,
    medium: MediumParams,
    control: ControlField,
    excess_noise: float = 0.0,
    eta0: float = DEFAULT_ETA0,
    write_fraction: Optional[float] = None,
    guard: float = 0.0,
) -> StorageOutcome:
    """Phenomenological store/retrieve channel.

    eta(tau) = eta0 * exp(-tau/tau_m) * w(delta), where w is the
    single-pass transparency-window amplitude factor of the write-in at
    the two-photon detuning delta = 2*Omega_L - Omega. The retrieved
    pulse has the input envelope family, compressed by the read/write
    control power ratio, peak amplitude eta*|alpha| and phase
    phi_i + delta*tau. The leak pulse carries the unstored amplitude
    sqrt(1 - kappa^2)*|alpha| with kappa the write-in fraction (default
    sqrt(eta0), a symmetric write/read split).
    """
    if hold_time < 0:
        raise ValueError("hold_time must be >= 0")
    if excess_noise < 0:
        raise ValueError("excess_noise must be >= 0")
    if not 0.0 <= eta0 <= 1.0:
        raise ValueError("eta0 must be within [0, 1]")
    kappa = np.sqrt(eta0) if write_fraction is None else float(write_fraction)
    if not 0.0 < kappa <= 1.0:
        raise ValueError("write fraction must be in (0, 1]")
    if eta0 > kappa:
        raise ValueError("eta0 may not exceed the write-in fraction")

    read_power = control.power if control.read_power is None else control.read_power
    if read_power < control.power:
        raise ValueError("read power below write power is not supported")
    compression = 1.0 if control.power == 0 else read_power / control.power

    delta = two_photon_detuning(medium.larmor, pulse.omega)
    window = float(window_amplitude_factor(delta, control, medium))
    eta = eta0 * np.exp(-hold_time / medium.tau_m) * window

    leak_amp = np.sqrt(1.0 - kappa**2) * pulse.amplitude
    leak_shape = _unit_shape(pulse.envelope, pulse.start_time, pulse.duration,
                             pulse.ramp)
    leak = Envelope(lambda t: leak_amp * leak_shape(t),
                    (pulse.start_time, pulse.end_time))

    t_off = pulse.end_time + guard
    read_start = t_off + hold_time + control.ramp_time
    ret_duration = pulse.duration / compression
    ret_ramp = min(pulse.ramp / compression, ret_duration / 2)
    ret_shape = _unit_shape(pulse.envelope, read_start, ret_duration, ret_ramp)
    phase_shift = delta * hold_time
    ret_amp = eta * pulse.amplitude * np.exp(1j * phase_shift)
    retrieved = Envelope(lambda t: ret_amp * ret_shape(t),
                         (read_start, read_start + ret_duration))

    spin = SpinWave(amplitude=kappa * pulse.amplitude)
    audit = {
        "input": abs(pulse.amplitude) ** 2,
        "leak": abs(leak_amp) ** 2,
        "retrieved": abs(ret_amp) ** 2 / compression,
    }
    return StorageOutcome(
        omega=pulse.omega,
        leak=leak,
        retrieved=retrieved,
        spin_wave=spin,
        amplitude_efficiency=float(eta),
        retrieved_phase=pulse.phase + phase_shift,
        excess_noise=excess_noise,
        read_start=read_start,
        energy_audit=audit,
    )


@dataclass
class PhenomenologicalBackend:
    """Callable storage backend wrapping :func:`phenomenological_store`."""

    eta0: float = DEFAULT_ETA0
    write_fraction: Optional[float] = None
    excess_noise: float = 0.0
    excess_noise_table: Optional[Sequence] = None
    guard: float = 0.0

    name = "phenomenological"

    def __call__(self, pulse, hold_time, medium, control) -> StorageOutcome:
        eps = self.excess_noise
        if self.excess_noise_table is not None:
            eps = excess_noise_of_power(control.power, self.excess_noise_table)
        return phenomenological_store(
            pulse, hold_time, medium, control,
            excess_noise=eps, eta0=self.eta0,
            write_fraction=self.write_fraction, guard=self.guard,
        )


def efficiency_vs_time(backend, taus, pulse, medium, control):
    """Map the backend over hold times; returns [(tau, eta), ...]."""
    out = []
    for tau in taus:
        outcome = backend(pulse, float(tau), medium, control)
        out.append((float(tau), outcome.amplitude_efficiency))
    return out


def efficiency_vs_frequency(backend, omegas, larmor_tracking, pulse, medium,
                            control, hold_time):
    """Map the backend over sideband frequencies; returns [(omega, eta), ...].

    With larmor_tracking the Larmor frequency is retuned to omega/2 at
    every point so the two-photon resonance follows the sideband.
    """
    out = []
    for omega in omegas:
        m = replace(medium, larmor=omega / 2.0) if larmor_tracking else medium
        p = replace(pulse, omega=float(omega))
        outcome = backend(p, hold_time, m, control)
        out.append((float(omega), outcome.amplitude_efficiency))
    return out

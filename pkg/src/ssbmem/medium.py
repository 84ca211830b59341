"""Lambda-type atomic medium: EIT susceptibility, transparency window, tuning.

Conventions
-----------
All rates and frequencies are angular (rad/s) unless a name says Hz.
The linear susceptibility is normalized so that the bare two-level
resonance has Im chi = 1; the intensity transmission through the cell
is then ``exp(-d * Im chi)`` with ``d`` the resonant optical depth.

The two-photon detuning is ``delta = 2*Omega_L - Omega``: the mismatch
between the Zeeman coherence frequency (twice the Larmor frequency) and
the signal-control beat frequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# Control Rabi coupling per unit optical power, Omega_c^2 = RABI_COEFFICIENT * P.
# Fit parameter, not a measured value: chosen so the EIT window of the default
# medium is ~0.7 MHz FWHM at 10 mW control power (kept below 1 MHz).
RABI_COEFFICIENT_DEFAULT = 7.2e16  # rad^2 s^-2 / W

# Effective Zeeman pumping efficiency of the collapsed two-sublevel model.
PUMPING_EFFICIENCY_DEFAULT = 0.92

_DIP_DEPTH_MIN = 1e-6


class WindowError(ValueError):
    """No resolvable EIT transparency window for the given parameters."""


def _smoothstep(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _smoothstep_slope(u: np.ndarray) -> np.ndarray:
    inside = (u > 0.0) & (u < 1.0)
    return np.where(inside, 6.0 * u * (1.0 - u), 0.0)


class ControlEnvelope:
    """Gating function of the control beam: on, ramp off, hold, ramp on.

    The envelope is C1-smooth (cubic ramps), lies in [0, 1], and exposes
    its analytic time derivative for the switching-transient model.
    """

    def __init__(self, t_off: float, t_on: float, ramp: float):
        if ramp <= 0.0:
            raise ValueError("ramp duration must be > 0")
        if t_on < t_off + ramp:
            raise ValueError("control must switch fully off before switching on")
        self.t_off = t_off
        self.t_on = t_on
        self.ramp = ramp

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        down = 1.0 - _smoothstep((t - self.t_off) / self.ramp)
        up = _smoothstep((t - self.t_on) / self.ramp)
        return np.clip(down + up, 0.0, 1.0)

    def slope(self, t):
        """d(envelope)/dt in 1/s."""
        t = np.asarray(t, dtype=float)
        down = -_smoothstep_slope((t - self.t_off) / self.ramp) / self.ramp
        up = _smoothstep_slope((t - self.t_on) / self.ramp) / self.ramp
        return down + up


@dataclass
class MediumParams:
    """Atomic-ensemble description.

    Attributes:
        optical_depth: resonant optical depth d (dimensionless).
        gamma_e: optical coherence decay rate of the excited state, rad/s.
        gamma_0: ground-state coherence decay rate entering the EIT
            lineshape, rad/s.
        tau_m: spin-coherence memory decay time constant, s (sets the
            storage-efficiency decay; distinct from gamma_0).
        larmor: Larmor angular frequency Omega_L, rad/s. The two-photon
            resonance sits at a sideband frequency of 2*Omega_L.
        length: cell length, m.
        temperature: cell temperature in Celsius, optional. If given
            together with optical_depth the two must agree through
            optical_depth_of_temperature (5% relative tolerance).
        pumping_efficiency: fraction of atoms prepared in the active
            Zeeman sublevel; scales the effective optical depth.
    """

    optical_depth: float = 18.0
    gamma_e: float = 2 * np.pi * 2.6e6
    gamma_0: float = 1.0e3
    tau_m: float = 10e-6
    larmor: float = 2 * np.pi * 625e3
    length: float = 0.03
    temperature: Optional[float] = None
    pumping_efficiency: float = PUMPING_EFFICIENCY_DEFAULT

    def __post_init__(self):
        if self.optical_depth <= 0:
            raise ValueError("optical_depth must be > 0")
        if self.gamma_e < 0 or self.gamma_0 < 0:
            raise ValueError("decay rates must be >= 0")
        if self.tau_m <= 0:
            raise ValueError("tau_m must be > 0")
        if not 0.0 < self.pumping_efficiency <= 1.0:
            raise ValueError("pumping_efficiency must be in (0, 1]")
        if self.temperature is not None:
            d_temp = optical_depth_of_temperature(self.temperature)
            if abs(self.optical_depth - d_temp) > 0.05 * d_temp:
                raise ValueError(
                    f"optical_depth={self.optical_depth} inconsistent with "
                    f"temperature {self.temperature} C (expected ~{d_temp:.2f})"
                )

    @classmethod
    def at_temperature(cls, temperature: float, **kwargs) -> "MediumParams":
        d = optical_depth_of_temperature(temperature)
        return cls(optical_depth=d, temperature=temperature, **kwargs)

    @property
    def effective_depth(self) -> float:
        """Optical depth seen by the signal after imperfect pumping."""
        return self.optical_depth * self.pumping_efficiency


@dataclass
class ControlField:
    """Classical control beam.

    The Rabi frequency derives from the optical power through a fixed
    conversion constant: ``rabi**2 = rabi_coefficient * power``.
    ``leakage_amp`` scales the fraction of the switching transient that
    couples into the signal detection channel.
    """

    power: float = 10e-3  # W
    ramp_time: float = 0.5e-6  # s
    leakage_amp: float = 0.0
    read_power: Optional[float] = None  # defaults to write power
    rabi_coefficient: float = RABI_COEFFICIENT_DEFAULT
    envelope: Optional[ControlEnvelope] = field(default=None, repr=False)

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("control power must be >= 0")
        if self.ramp_time <= 0:
            raise ValueError("ramp_time must be > 0")
        if self.leakage_amp < 0:
            raise ValueError("leakage_amp must be >= 0")

    @classmethod
    def from_rabi(cls, rabi: float, **kwargs) -> "ControlField":
        """Build a control field with a given Rabi frequency (rad/s)."""
        coef = kwargs.pop("rabi_coefficient", RABI_COEFFICIENT_DEFAULT)
        return cls(power=rabi**2 / coef, rabi_coefficient=coef, **kwargs)

    @property
    def rabi(self) -> float:
        """Control Rabi angular frequency, rad/s."""
        return float(np.sqrt(self.rabi_coefficient * self.power))

    @property
    def read_rabi(self) -> float:
        p = self.power if self.read_power is None else self.read_power
        return float(np.sqrt(self.rabi_coefficient * p))

    def with_timing(self, t_off: float, t_on: float) -> "ControlField":
        """Return a copy carrying the gating envelope for a run."""
        return ControlField(
            power=self.power,
            ramp_time=self.ramp_time,
            leakage_amp=self.leakage_amp,
            read_power=self.read_power,
            rabi_coefficient=self.rabi_coefficient,
            envelope=ControlEnvelope(t_off, t_on, self.ramp_time),
        )


def two_photon_detuning(larmor: float, omega_sideband: float) -> float:
    """delta = 2*Omega_L - Omega, rad/s."""
    return 2.0 * larmor - omega_sideband


def _chi(one_photon, two_photon, omega_c, gamma_e, gamma_0):
    """Normalized Lambda-system susceptibility (accepts arrays)."""
    num = 1j * gamma_e * (gamma_0 - 1j * np.asarray(two_photon))
    den = (gamma_e - 1j * np.asarray(one_photon)) * (
        gamma_0 - 1j * np.asarray(two_photon)
    ) + omega_c**2 / 4.0
    return num / den


def susceptibility(
    one_photon_detuning,
    two_photon_detuning,
    control: ControlField,
    medium: MediumParams,
):
    """Normalized linear susceptibility chi(Delta, delta).

    chi = i*Gamma*(gamma_0 - i*delta) / [(Gamma - i*Delta)(gamma_0 - i*delta)
    + Omega_c^2/4], scaled so that Im chi = 1 at Omega_c = 0, Delta = 0
    (bare resonant absorption). Intensity transmission through the cell
    is exp(-d * Im chi).
    """
    if medium.gamma_e == 0:
        raise ValueError("susceptibility requires gamma_e > 0")
    return _chi(
        one_photon_detuning,
        two_photon_detuning,
        control.rabi,
        medium.gamma_e,
        medium.gamma_0,
    )


def _window_transmission(delta, omega_c, medium: MediumParams):
    im = np.imag(_chi(0.0, delta, omega_c, medium.gamma_e, medium.gamma_0))
    return np.exp(-medium.effective_depth * im)


def eit_fwhm(control: ControlField, medium: MediumParams) -> float:
    """FWHM in Hz of the EIT transparency dip in the intensity transmission.

    The dip is measured against the far-detuned absorption background
    exp(-d); its half-maximum points are located by bisection on a scan
    of the two-photon detuning at line center.
    """
    if control.power < 0:
        raise ValueError("control power must be >= 0")
    omega_c = control.rabi
    t_bg = np.exp(-medium.effective_depth)
    t_max = float(_window_transmission(0.0, omega_c, medium))
    if t_max - t_bg < _DIP_DEPTH_MIN:
        raise WindowError(
            f"transparency dip depth {t_max - t_bg:.2e} below {_DIP_DEPTH_MIN}"
        )
    t_half = t_bg + 0.5 * (t_max - t_bg)
    lo, hi = 0.0, max(omega_c, medium.gamma_0, 1.0)
    while _window_transmission(hi, omega_c, medium) > t_half:
        hi *= 2.0
        if hi > 1e16:
            raise WindowError("could not bracket the half-maximum point")
    for _ in range(128):
        mid = 0.5 * (lo + hi)
        if _window_transmission(mid, omega_c, medium) > t_half:
            lo = mid
        else:
            hi = mid
    half_width = 0.5 * (lo + hi)  # rad/s, positive side
    return 2.0 * half_width / (2.0 * np.pi)


def window_amplitude_factor(
    two_photon_detuning, control: ControlField, medium: MediumParams
):
    """Single-pass amplitude transmission at detuning delta, relative to
    the center of the transparency window: exp(-d/2 * (Im chi(delta) -
    Im chi(0))). Equals 1 at delta = 0 for any gamma_0.
    """
    omega_c = control.rabi
    im = np.imag(_chi(0.0, two_photon_detuning, omega_c, medium.gamma_e, medium.gamma_0))
    im0 = np.imag(_chi(0.0, 0.0, omega_c, medium.gamma_e, medium.gamma_0))
    return np.exp(-0.5 * medium.effective_depth * (im - im0))


# Anchors of the optical-depth vs temperature interpolation.
_TEMP_ANCHORS = ((30.0, 6.0), (40.0, 18.0))
_TEMP_RANGE = (30.0, 50.0)


def optical_depth_of_temperature(temperature: float) -> float:
    """Resonant optical depth of the cell at a given temperature (Celsius).

    Log-linear interpolation anchored at (30 C, 6) and (40 C, 18),
    extrapolated log-linearly up to 50 C. Valid range 30..50 C.
    """
    lo, hi = _TEMP_RANGE
    if not lo <= temperature <= hi:
        raise ValueError(f"temperature {temperature} C outside calibrated range {lo}..{hi}")
    (t0, d0), (t1, d1) = _TEMP_ANCHORS
    log_d = np.log(d0) + (temperature - t0) / (t1 - t0) * (np.log(d1) - np.log(d0))
    return float(np.exp(log_d))

"""Two-sideband quadrature algebra and Gaussian storage channels.

The homodyne photocurrent demodulated at Omega measures the composed
quadratures of the two sidebands at +/-Omega:

    i(t) = (x_plus + x_minus) cos(Omega t) + (y_plus - y_minus) sin(Omega t)

States are Gaussian: a mean vector and a 4x4 covariance matrix over
(x_plus, y_plus, x_minus, y_minus), with vacuum variance 1 per
quadrature per sideband. In the measurement convention the combined
two-sideband vacuum defines the shot level, so composed variances are
reported as quadratic forms divided by two.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from .medium import ControlField, MediumParams, two_photon_detuning, \
    window_amplitude_factor
from .storage import DEFAULT_ETA0

# commutator scale [x, y] = 2i per sideband mode
_J_MODE = np.array([[0.0, 2.0], [-2.0, 0.0]])
_J = np.block([[_J_MODE, np.zeros((2, 2))], [np.zeros((2, 2)), _J_MODE]])

DUAN_SEPARABILITY_BOUND = 4.0  # on var(x+ + x-) + var(y+ + y-)


@dataclass
class SidebandPair:
    """Gaussian state of the +Omega / -Omega sideband modes."""

    mean: np.ndarray  # (x+, y+, x-, y-)
    cov: np.ndarray  # 4x4
    omega: float  # rad/s

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(4)
        self.cov = np.asarray(self.cov, dtype=float).reshape(4, 4)
        if not np.allclose(self.cov, self.cov.T, atol=1e-10):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(self.cov).min() < -1e-9:
            raise ValueError("covariance must be positive semidefinite")
        # Robertson-Schroedinger: cov + (i/2)*J >= 0 with [x, y] = 2i
        herm = self.cov.astype(complex) + 0.5j * _J
        if np.linalg.eigvalsh(herm).min() < -1e-6:
            raise ValueError("covariance violates the uncertainty relation")

    @classmethod
    def vacuum(cls, omega: float) -> "SidebandPair":
        return cls(np.zeros(4), np.eye(4), omega)

    @classmethod
    def coherent(cls, alpha_plus: complex, alpha_minus: complex,
                 omega: float) -> "SidebandPair":
        mean = np.array([
            2 * np.real(alpha_plus), 2 * np.imag(alpha_plus),
            2 * np.real(alpha_minus), 2 * np.imag(alpha_minus),
        ])
        return cls(mean, np.eye(4), omega)

    def is_vacuum(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.mean, 0.0, atol=tol)
                    and np.allclose(self.cov, np.eye(4), atol=tol))


def compose_photocurrent(pair: SidebandPair, t) -> np.ndarray:
    """Mean photocurrent (x+ + x-) cos(Omega t) + (y+ - y-) sin(Omega t)."""
    t = np.asarray(t, dtype=float)
    xp, yp, xm, ym = pair.mean
    return (xp + xm) * np.cos(pair.omega * t) + (yp - ym) * np.sin(pair.omega * t)


def composed_variances(pair: SidebandPair) -> Tuple[float, float]:
    """Variances of the conjugate modulation quadratures X(Omega), Y(Omega).

    X(Omega) = amplitude modulation, x+ + x-; Y(Omega) = the conjugate
    phase modulation, y+ + y-, read by rotating the local oscillator 90
    degrees. Both are normalized so the combined two-sideband vacuum is
    1; their product obeys var_X * var_Y >= 1.
    """
    a_x = np.array([1.0, 0.0, 1.0, 0.0])
    a_y = np.array([0.0, 1.0, 0.0, 1.0])
    vx = a_x @ pair.cov @ a_x / 2.0
    vy = a_y @ pair.cov @ a_y / 2.0
    return float(vx), float(vy)


def demodulated_variances(pair: SidebandPair) -> Tuple[float, float]:
    """Variances of the two commuting demodulated photocurrent
    quadratures, cos -> x+ + x- and sin -> y+ - y-, vacuum = 1."""
    a_x = np.array([1.0, 0.0, 1.0, 0.0])
    a_y = np.array([0.0, 1.0, 0.0, -1.0])
    vx = a_x @ pair.cov @ a_x / 2.0
    vy = a_y @ pair.cov @ a_y / 2.0
    return float(vx), float(vy)


@dataclass
class SingleSidebandVariance:
    """Demodulated variance of a single occupied sideband.

    ``raw`` uses per-sideband vacuum units (var(x+) + 1 from the empty
    mirror sideband); ``shot_units`` divides by the combined two-sideband
    vacuum, the convention of the measured noise traces.
    """

    x_raw: float
    y_raw: float

    @property
    def x_shot(self) -> float:
        return self.x_raw / 2.0

    @property
    def y_shot(self) -> float:
        return self.y_raw / 2.0


def single_sideband_variance(pair: SidebandPair) -> SingleSidebandVariance:
    """Variance penalty of measuring one sideband against an empty one.

    Requires the -Omega sideband to be uncorrelated vacuum; the mirror
    vacuum then adds one unit per quadrature to the raw measured
    variance.
    """
    minus_block = pair.cov[2:, 2:]
    cross = pair.cov[:2, 2:]
    if not np.allclose(minus_block, np.eye(2), atol=1e-12) or \
            not np.allclose(cross, 0.0, atol=1e-12):
        raise ValueError("the -Omega sideband must be uncorrelated vacuum")
    return SingleSidebandVariance(
        x_raw=float(pair.cov[0, 0] + 1.0),
        y_raw=float(pair.cov[1, 1] + 1.0),
    )


def squeezed_pair(r: float, omega: float) -> SidebandPair:
    """Entangled sideband pair of an amplitude-squeezed field.

    Two-mode squeezing between +Omega and -Omega: composed variances are
    e^{-2r} on the amplitude modulation X(Omega) and e^{+2r} on the
    conjugate phase modulation Y(Omega). Each sideband alone is thermal
    with variance cosh(2r); the squeezing lives in the cross-sideband
    correlations (x anticorrelated, y correlated).
    """
    ch, sh = np.cosh(2 * r), np.sinh(2 * r)
    cov = np.eye(4) * ch
    cov[0, 2] = cov[2, 0] = -sh
    cov[1, 3] = cov[3, 1] = +sh
    return SidebandPair(np.zeros(4), cov, omega)


def duan_value(pair: SidebandPair) -> float:
    """Combined EPR variance var(x+ + x-) + var(y+ - y-).

    The two demodulated quadratures are per-mode conjugate; any
    separable state satisfies the sum >= DUAN_SEPARABILITY_BOUND (= 4),
    so a smaller value witnesses sideband entanglement.
    """
    a_u = np.array([1.0, 0.0, 1.0, 0.0])
    a_v = np.array([0.0, 1.0, 0.0, -1.0])
    return float(a_u @ pair.cov @ a_u + a_v @ pair.cov @ a_v)


def sample_quadratures(pair: SidebandPair, n: int, seed) -> np.ndarray:
    """Draw n Gaussian samples of (x+, y+, x-, y-); shape (n, 4)."""
    rng = np.random.default_rng(seed)
    # eigen factorization tolerates the semidefinite covariances of
    # deterministic channels
    w, v = np.linalg.eigh(pair.cov)
    root = v @ np.diag(np.sqrt(np.clip(w, 0.0, None)))
    return pair.mean + rng.normal(size=(n, 4)) @ root.T


@dataclass
class StorageChannel:
    """Gaussian map of one sideband through the memory.

    Means rotate by the accumulated phase and shrink by eta; the
    beamsplitter vacuum 1 - eta^2 plus any excess noise is added to each
    quadrature.
    """

    eta: float
    phase: float = 0.0
    excess: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must be within [0, 1]")
        if self.excess < 0:
            raise ValueError("excess must be >= 0")

    @property
    def matrix(self) -> np.ndarray:
        c, s = np.cos(self.phase), np.sin(self.phase)
        return self.eta * np.array([[c, -s], [s, c]])

    @property
    def added_noise(self) -> np.ndarray:
        return (1.0 - self.eta**2 + self.excess) * np.eye(2)


def apply_channels(pair: SidebandPair, chan_plus: StorageChannel,
                   chan_minus: StorageChannel) -> SidebandPair:
    """Apply independent Gaussian channels to the two sidebands."""
    k = np.zeros((4, 4))
    k[:2, :2] = chan_plus.matrix
    k[2:, 2:] = chan_minus.matrix
    n = np.zeros((4, 4))
    n[:2, :2] = chan_plus.added_noise
    n[2:, 2:] = chan_minus.added_noise
    return SidebandPair(k @ pair.mean, k @ pair.cov @ k.T + n, pair.omega)


def sideband_channel(omega_signed: float, medium: MediumParams,
                     control: ControlField, hold_time: float,
                     eta0: float = DEFAULT_ETA0,
                     excess: float = 0.0) -> StorageChannel:
    """Phenomenological storage channel for a sideband at a signed
    frequency offset: its own two-photon detuning sets the efficiency
    penalty and the accumulated phase delta * tau."""
    delta = two_photon_detuning(medium.larmor, omega_signed)
    window = float(window_amplitude_factor(delta, control, medium))
    eta = eta0 * np.exp(-hold_time / medium.tau_m) * window
    return StorageChannel(eta=eta, phase=delta * hold_time, excess=excess)


def dual_sideband_store(pair: SidebandPair, medium: MediumParams,
                        control: ControlField, hold_time: float,
                        eta0: float = DEFAULT_ETA0,
                        excess: float = 0.0) -> SidebandPair:
    """Store both sidebands in one ensemble within a single EIT window.

    The +Omega and -Omega components see two-photon detunings
    2*Omega_L -/+ Omega, so their efficiencies and phases differ unless
    2*Omega is well inside the transparency window.
    """
    chan_p = sideband_channel(+pair.omega, medium, control, hold_time,
                              eta0, excess)
    chan_m = sideband_channel(-pair.omega, medium, control, hold_time,
                              eta0, excess)
    return apply_channels(pair, chan_p, chan_m)


def composite_modulation_efficiency(pair_in: SidebandPair,
                                    pair_out: SidebandPair) -> float:
    """Amplitude ratio of the composed mean modulation, out over in."""
    def amp(p):
        xp, yp, xm, ym = p.mean
        return np.hypot(xp + xm, yp - ym)

    a_in = amp(pair_in)
    if a_in == 0:
        raise ValueError("input pair carries no mean modulation")
    return float(amp(pair_out) / a_in)


def two_ensemble_store(pair: SidebandPair,
                       memory_a: Tuple[MediumParams, ControlField],
                       memory_b: Tuple[MediumParams, ControlField],
                       hold_time: float,
                       eta0: float = DEFAULT_ETA0,
                       excess: float = 0.0) -> SidebandPair:
    """Split the sidebands, store each in its own ensemble, recombine.

    Ensemble A holds the +Omega sideband with its Larmor frequency tuned
    to Omega/2; ensemble B holds -Omega tuned to -Omega/2. The splitter
    and recombiner are ideal, so no vacuum is added beyond the channels
    themselves; identity channels return the input state exactly.
    """
    medium_a, control_a = memory_a
    medium_b, control_b = memory_b
    medium_a = replace(medium_a, larmor=+pair.omega / 2)
    medium_b = replace(medium_b, larmor=-pair.omega / 2)
    chan_p = sideband_channel(+pair.omega, medium_a, control_a, hold_time,
                              eta0, excess)
    chan_m = sideband_channel(-pair.omega, medium_b, control_b, hold_time,
                              eta0, excess)
    return apply_channels(pair, chan_p, chan_m)

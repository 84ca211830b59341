"""Run configuration: schema, validation, YAML load/save.

One structured text file (YAML; nested keys, comments allowed)
describes a complete run: medium, control beam, signal pulse, timing
sequence, digitizer, storage backend and an optional parameter sweep.
Frequencies in the file carry a ``_hz`` suffix and are converted to
angular units on load; durations are seconds, powers watts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml

from .detection import AcquisitionConfig
from .medium import ControlField, MediumParams
from .storage import SignalPulse

NYQUIST_SAFETY = 4.0  # sideband frequency must stay below fs / (2 * safety)

SWEEP_KINDS = (
    "storage_time",
    "sideband_frequency",
    "input_phase",
    "larmor",
    "control_power",
    "dual_vs_single",
)

BACKENDS = ("phenomenological", "propagation")


@dataclass
class SequenceConfig:
    """Timing of one experimental sequence plus ensemble bookkeeping."""

    pulse_duration: float = 5e-6
    hold_time: float = 9.163e-6
    read_duration: float = 8e-6
    pump_duration: float = 6e-3
    dark_period: float = 0.5e-3
    n_realizations: int = 2000
    master_seed: int = 20210513

    def __post_init__(self):
        for name in ("pulse_duration", "hold_time", "read_duration",
                     "pump_duration", "dark_period"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        self.master_seed = int(self.master_seed)


@dataclass
class SweepSpec:
    """A named parameter sweep over one knob of the run configuration."""

    kind: str
    grid: list
    larmor_tracking: bool = True
    dual_frequency_hz: float = 400e3

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ValueError(f"unknown sweep kind {self.kind!r}; "
                             f"choose from {SWEEP_KINDS}")
        if len(self.grid) == 0:
            raise ValueError("sweep grid must be non-empty")
        self.grid = [float(v) for v in self.grid]
        if self.kind in ("storage_time", "control_power", "dual_vs_single"):
            if min(self.grid) <= 0:
                raise ValueError(f"{self.kind} grid values must be > 0")
        if self.kind == "sideband_frequency" and min(self.grid) <= 0:
            raise ValueError("sideband frequencies must be > 0")


@dataclass
class RunConfig:
    """Complete, validated description of a run."""

    medium: MediumParams
    control: ControlField
    pulse: SignalPulse
    sequence: SequenceConfig
    acquisition: AcquisitionConfig
    backend: str = "phenomenological"
    eta0: float = 0.25
    write_fraction: Optional[float] = None
    excess_noise_table: Optional[list] = None
    nz: int = 128
    dt: float = 1e-8
    sweep: Optional[SweepSpec] = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        f_side = self.pulse.omega / (2 * np.pi)
        fs = self.acquisition.sample_rate
        if f_side > fs / (2 * NYQUIST_SAFETY):
            raise ValueError(
                f"sideband frequency {f_side:.3g} Hz above "
                f"{fs:.3g}/(2*{NYQUIST_SAFETY}) Hz Nyquist safety margin"
            )
        # pulse spectral content must stay below Nyquist
        bw = 2.0 / min(self.pulse.ramp, self.pulse.duration) \
            if self.pulse.envelope == "smoothed-rectangular" \
            else 2.0 / self.pulse.duration
        if f_side + bw > fs / 2:
            raise ValueError("pulse bandwidth extends beyond Nyquist")
        if self.sweep is not None and self.sweep.kind == "sideband_frequency":
            if max(self.sweep.grid) > fs / (2 * NYQUIST_SAFETY):
                raise ValueError("sweep frequencies violate the Nyquist margin")


def _medium_from_dict(d: dict) -> MediumParams:
    kw = {}
    if "temperature_c" in d and d["temperature_c"] is not None:
        kw["temperature"] = float(d["temperature_c"])
        if d.get("optical_depth") is not None:
            kw["optical_depth"] = float(d["optical_depth"])
        else:
            from .medium import optical_depth_of_temperature
            kw["optical_depth"] = optical_depth_of_temperature(kw["temperature"])
    elif d.get("optical_depth") is not None:
        kw["optical_depth"] = float(d["optical_depth"])
    if "gamma_e_hz" in d:
        kw["gamma_e"] = 2 * np.pi * float(d["gamma_e_hz"])
    if "gamma_0" in d:
        kw["gamma_0"] = float(d["gamma_0"])
    if "tau_m" in d:
        kw["tau_m"] = float(d["tau_m"])
    if "length" in d:
        kw["length"] = float(d["length"])
    if "pumping_efficiency" in d:
        kw["pumping_efficiency"] = float(d["pumping_efficiency"])
    larmor = d.get("larmor_hz", "track")
    if larmor != "track":
        kw["larmor"] = 2 * np.pi * float(larmor)
    return MediumParams(**kw), larmor == "track"


def from_dict(data: dict) -> RunConfig:
    data = data or {}
    medium, track = _medium_from_dict(data.get("medium", {}))

    c = data.get("control", {})
    control = ControlField(
        power=float(c.get("power", 10e-3)),
        ramp_time=float(c.get("ramp_time", 0.5e-6)),
        leakage_amp=float(c.get("leakage_amp", 0.0)),
        read_power=None if c.get("read_power") is None
        else float(c["read_power"]),
        rabi_coefficient=float(c.get("rabi_coefficient",
                                     ControlField().rabi_coefficient)),
    )
    table = c.get("excess_noise_table")
    if table is not None:
        table = [[float(p), float(e)] for p, e in table]

    s = data.get("signal", {})
    omega = 2 * np.pi * float(s.get("frequency_hz", 1.25e6))
    amp = float(s.get("amplitude", 23.0)) * np.exp(1j * float(s.get("phase", 0.0)))
    seq_d = data.get("sequence", {})
    duration = float(s.get("duration", seq_d.get("pulse_duration", 5e-6)))
    acq_d = data.get("acquisition", {})
    acquisition = AcquisitionConfig(
        sample_rate=float(acq_d.get("sample_rate", 50e6)),
        bits=int(acq_d.get("bits", 14)),
        full_scale=float(acq_d.get("full_scale", 96.0)),
        lo_phase=float(acq_d.get("lo_phase", 0.0)),
        phase_jitter=float(acq_d.get("phase_jitter", 0.0)),
        demod_cycles=int(acq_d.get("demod_cycles", 3)),
        shot_noise=bool(acq_d.get("shot_noise", True)),
        quantizer=bool(acq_d.get("quantizer", True)),
    )
    # demodulation windows align to the pulse start: default one window
    # of pre-roll unless the file pins start_time explicitly
    t_m = acquisition.demod_cycles * 2 * np.pi / omega
    start_time = float(s["start_time"]) if "start_time" in s else t_m
    pulse = SignalPulse(
        omega=omega,
        amplitude=amp,
        duration=duration,
        envelope=s.get("envelope", "smoothed-rectangular"),
        ramp=float(s.get("ramp", 0.5e-6)),
        start_time=start_time,
    )
    if track:
        medium = MediumParams(
            optical_depth=medium.optical_depth, gamma_e=medium.gamma_e,
            gamma_0=medium.gamma_0, tau_m=medium.tau_m, larmor=omega / 2,
            length=medium.length, temperature=medium.temperature,
            pumping_efficiency=medium.pumping_efficiency,
        )

    sequence = SequenceConfig(
        pulse_duration=duration,
        hold_time=float(seq_d.get("hold_time", 9.163e-6)),
        read_duration=float(seq_d.get("read_duration", 8e-6)),
        pump_duration=float(seq_d.get("pump_duration", 6e-3)),
        dark_period=float(seq_d.get("dark_period", 0.5e-3)),
        n_realizations=int(seq_d.get("n_realizations", 2000)),
        master_seed=int(seq_d.get("master_seed", 20210513)),
    )

    st = data.get("storage", {})
    prop = data.get("propagation", {})
    sweep_d = data.get("sweep")
    sweep = None
    if sweep_d is not None:
        kind = sweep_d["kind"]
        if "grid_hz" in sweep_d:
            grid = [float(v) for v in sweep_d["grid_hz"]]
        else:
            grid = [float(v) for v in sweep_d["grid"]]
        sweep = SweepSpec(
            kind=kind,
            grid=grid,
            larmor_tracking=bool(sweep_d.get("larmor_tracking", True)),
            dual_frequency_hz=float(sweep_d.get("dual_frequency_hz", 400e3)),
        )

    return RunConfig(
        medium=medium,
        control=control,
        pulse=pulse,
        sequence=sequence,
        acquisition=acquisition,
        backend=seq_d.get("backend", data.get("backend", "phenomenological")),
        eta0=float(st.get("eta0", 0.25)),
        write_fraction=None if st.get("write_fraction") is None
        else float(st["write_fraction"]),
        excess_noise_table=table,
        nz=int(prop.get("nz", 128)),
        dt=float(prop.get("dt", 1e-8)),
        sweep=sweep,
    )


def to_dict(cfg: RunConfig) -> dict:
    """Canonical nested-dict form; round-trips through from_dict."""
    d = {
        "medium": {
            "optical_depth": cfg.medium.optical_depth,
            "gamma_e_hz": cfg.medium.gamma_e / (2 * np.pi),
            "gamma_0": cfg.medium.gamma_0,
            "tau_m": cfg.medium.tau_m,
            "larmor_hz": cfg.medium.larmor / (2 * np.pi),
            "length": cfg.medium.length,
            "pumping_efficiency": cfg.medium.pumping_efficiency,
        },
        "control": {
            "power": cfg.control.power,
            "ramp_time": cfg.control.ramp_time,
            "leakage_amp": cfg.control.leakage_amp,
            "read_power": cfg.control.read_power,
            "rabi_coefficient": cfg.control.rabi_coefficient,
            "excess_noise_table": cfg.excess_noise_table,
        },
        "signal": {
            "frequency_hz": cfg.pulse.omega / (2 * np.pi),
            "amplitude": abs(cfg.pulse.amplitude),
            "phase": float(np.angle(cfg.pulse.amplitude)),
            "duration": cfg.pulse.duration,
            "envelope": cfg.pulse.envelope,
            "ramp": cfg.pulse.ramp,
            "start_time": cfg.pulse.start_time,
        },
        "sequence": {
            "hold_time": cfg.sequence.hold_time,
            "read_duration": cfg.sequence.read_duration,
            "pump_duration": cfg.sequence.pump_duration,
            "dark_period": cfg.sequence.dark_period,
            "n_realizations": cfg.sequence.n_realizations,
            "master_seed": cfg.sequence.master_seed,
            "backend": cfg.backend,
        },
        "storage": {
            "eta0": cfg.eta0,
            "write_fraction": cfg.write_fraction,
        },
        "propagation": {"nz": cfg.nz, "dt": cfg.dt},
        "acquisition": {
            "sample_rate": cfg.acquisition.sample_rate,
            "bits": cfg.acquisition.bits,
            "full_scale": cfg.acquisition.full_scale,
            "lo_phase": cfg.acquisition.lo_phase,
            "phase_jitter": cfg.acquisition.phase_jitter,
            "demod_cycles": cfg.acquisition.demod_cycles,
            "shot_noise": cfg.acquisition.shot_noise,
            "quantizer": cfg.acquisition.quantizer,
        },
    }
    if cfg.medium.temperature is not None:
        d["medium"]["temperature_c"] = cfg.medium.temperature
    if cfg.sweep is not None:
        d["sweep"] = {
            "kind": cfg.sweep.kind,
            "grid": cfg.sweep.grid,
            "larmor_tracking": cfg.sweep.larmor_tracking,
            "dual_frequency_hz": cfg.sweep.dual_frequency_hz,
        }
    return d


def load_config(path) -> RunConfig:
    with open(path) as f:
        data = yaml.safe_load(f)
    return from_dict(data)


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(to_dict(cfg), f, sort_keys=True)


def default_config() -> RunConfig:
    return from_dict({})

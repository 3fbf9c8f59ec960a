"""
Flat-top error-function frequency pulses and per-mode pulse schedules.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Union

import numpy as np
from scipy.special import erf

from core.errors import InvalidPulseError, ParameterDomainError

logger = logging.getLogger(__name__)

RAMP_SIGMAS = 4.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class FlattopPulse:
    omega_off: float
    omega_on: float
    sigma: float
    t_gate: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidPulseError(f"sigma must be positive, got {self.sigma}")
        if self.t_gate < self.t_ramp - 1e-12:
            raise InvalidPulseError(
                f"t_gate={self.t_gate} ns is shorter than the ramp time {self.t_ramp:.4f} ns")

    @classmethod
    def from_hold(cls, omega_off: float, omega_on: float, sigma: float, t_hold: float) -> 'FlattopPulse':
        if t_hold < 0:
            raise InvalidPulseError(f"hold time must be nonnegative, got {t_hold}")
        return cls(omega_off, omega_on, sigma, t_hold + RAMP_SIGMAS * sigma)

    @property
    def t_ramp(self) -> float:
        return RAMP_SIGMAS * self.sigma

    @property
    def amplitude(self) -> float:
        return self.omega_on - self.omega_off

    def evaluate(self, t):
        """Frequency (GHz) at time(s) t in ns; samples outside [0, t_gate] are clamped."""
        t_arr = np.asarray(t, dtype=float)
        clipped = np.clip(t_arr, 0.0, self.t_gate)
        if np.any(clipped != t_arr):
            logger.warning(f"pulse sampled outside [0, {self.t_gate}] ns; clamped to the endpoints")
        width = math.sqrt(2.0) * self.sigma
        half_ramp = 0.5 * self.t_ramp
        value = self.omega_off + 0.5 * self.amplitude * (
            erf((clipped - half_ramp) / width) - erf((clipped - self.t_gate + half_ramp) / width))
        return float(value) if np.ndim(value) == 0 else value


def evaluate(p: FlattopPulse, t):
    return p.evaluate(t)


def hold_time(p: FlattopPulse) -> float:
    """Time between the ramp midpoints."""
    t_hold = p.t_gate - p.t_ramp
    if t_hold < -1e-12:
        raise InvalidPulseError(f"negative hold time {t_hold} ns")
    return max(t_hold, 0.0)


Level = Union[FlattopPulse, float]


@dataclass(frozen=True)
class PulseSchedule:
    """Per-mode frequency trajectories sharing one gate time.

    Modes absent from ``pulses`` stay at their model frequency; a float entry
    pins a mode to a constant frequency.
    """
    pulses: Mapping[str, Level]
    t_gate: float
    dt: float = 0.01
    _pulsed: Dict[str, FlattopPulse] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.t_gate > 0:
            raise ParameterDomainError(f"t_gate must be positive, got {self.t_gate}")
        if not self.dt > 0:
            raise ParameterDomainError(f"dt must be positive, got {self.dt}")
        pulsed = {}
        for name, level in self.pulses.items():
            if isinstance(level, FlattopPulse):
                if not math.isclose(level.t_gate, self.t_gate, rel_tol=0, abs_tol=1e-9):
                    raise InvalidPulseError(
                        f"pulse on {name!r} has t_gate={level.t_gate}, schedule has {self.t_gate}")
                pulsed[name] = level
        object.__setattr__(self, '_pulsed', pulsed)

    @classmethod
    def flattop(cls, pulses: Mapping[str, Level], dt: float = 0.01) -> 'PulseSchedule':
        """Schedule whose gate time is taken from its (common) pulses."""
        gate_times = {p.t_gate for p in pulses.values() if isinstance(p, FlattopPulse)}
        if len(gate_times) != 1:
            raise InvalidPulseError(f"pulses must share exactly one t_gate, got {sorted(gate_times)}")
        return cls(pulses=dict(pulses), t_gate=gate_times.pop(), dt=dt)

    def frequencies(self, t: float) -> Dict[str, float]:
        return {name: (level.evaluate(t) if isinstance(level, FlattopPulse) else float(level))
                for name, level in self.pulses.items()}

    def idle_frequencies(self) -> Dict[str, float]:
        return {name: (level.omega_off if isinstance(level, FlattopPulse) else float(level))
                for name, level in self.pulses.items()}

    def on_frequencies(self) -> Dict[str, float]:
        return {name: (level.omega_on if isinstance(level, FlattopPulse) else float(level))
                for name, level in self.pulses.items()}

    def is_static(self) -> bool:
        return all(p.omega_on == p.omega_off for p in self._pulsed.values())

    def samples(self, times) -> Dict[str, np.ndarray]:
        """Vectorized pulse values for CSV dumps."""
        times = np.asarray(times, dtype=float)
        return {name: (level.evaluate(times) if isinstance(level, FlattopPulse)
                       else np.full_like(times, float(level)))
                for name, level in self.pulses.items()}

    def to_dict(self) -> dict:
        out = {'t_gate': self.t_gate, 'dt': self.dt, 'pulses': {}}
        for name, level in self.pulses.items():
            if isinstance(level, FlattopPulse):
                out['pulses'][name] = {
                    'omega_off': level.omega_off, 'omega_on': level.omega_on,
                    'sigma': level.sigma, 't_gate': level.t_gate,
                    't_ramp': level.t_ramp, 't_hold': hold_time(level),
                }
            else:
                out['pulses'][name] = float(level)
        return out

"""
Time evolution under pulsed mode frequencies.

Propagation is piecewise constant at the step midpoints; every step is an
exact exponential, so unitarity is lost only to round-off. Gate metrics are
always read out at the idle point, in the frame that rotates with the idle
dressed energies.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg, optimize, sparse
from scipy.sparse.linalg import expm_multiply

from core.errors import IntegrationError, ParameterDomainError
from simulation.control import PulseSchedule
from simulation.model import (
    TWO_PI, DressedSpectrum, HamiltonianModel, Occupation, dressed_spectrum,
)

logger = logging.getLogger(__name__)

MIN_STEPS = 100
UNITARITY_TOLERANCE = 1e-9

MatrixHook = Callable[[float], Union[np.ndarray, sparse.spmatrix]]


class EvolutionMethod(str, Enum):
    EIGH = "eigh"
    KRYLOV = "krylov"


@dataclass(frozen=True, eq=False)
class Propagator:
    unitary: np.ndarray = field(repr=False)
    t_gate: float
    dt: float
    unitarity_defect: float
    t_start: float = 0.0

    def then(self, later: 'Propagator') -> 'Propagator':
        """Compose with a propagator that starts where this one ends."""
        unitary = later.unitary @ self.unitary
        return Propagator(unitary=unitary,
                          t_gate=self.t_gate + later.t_gate,
                          dt=min(self.dt, later.dt),
                          unitarity_defect=unitarity_defect(unitary),
                          t_start=self.t_start)


class FrameKind(str, Enum):
    LAB = "lab"
    ROTATING_IDLE = "rotating-idle"


@dataclass(frozen=True, eq=False)
class FrameConvention:
    """Per-state rotation frequencies (GHz) defining the readout frame."""
    kind: FrameKind = FrameKind.LAB
    frequencies: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def lab(cls) -> 'FrameConvention':
        return cls(FrameKind.LAB, None)

    @classmethod
    def rotating_idle(cls, spectrum: DressedSpectrum) -> 'FrameConvention':
        return cls(FrameKind.ROTATING_IDLE, np.asarray(spectrum.energies, dtype=float))

    def phases(self, t: float) -> Union[np.ndarray, float]:
        if self.kind is FrameKind.LAB:
            return 1.0
        return np.exp(1j * TWO_PI * self.frequencies * t)

    def apply(self, amplitudes: np.ndarray, t: float) -> np.ndarray:
        """Move idle-dressed-basis amplitudes (rows) from the lab frame into this frame."""
        phases = self.phases(t)
        if np.ndim(phases) == 0:
            return np.asarray(amplitudes)
        if np.ndim(amplitudes) == 1:
            return phases * amplitudes
        return phases[:, None] * amplitudes


def unitarity_defect(u: np.ndarray) -> float:
    """max |U^dag U - I|"""
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def _step_grid(t_gate: float, dt: float) -> Tuple[int, float]:
    if not t_gate > 0:
        raise ParameterDomainError(f"t_gate must be positive, got {t_gate}")
    if not dt > 0:
        raise ParameterDomainError(f"dt must be positive, got {dt}")
    # Round the step down so the grid ends exactly on t_gate.
    n_steps = int(math.ceil(t_gate / dt - 1e-9))
    if n_steps < MIN_STEPS:
        raise ParameterDomainError(
            f"dt={dt} ns gives only {n_steps} steps over {t_gate} ns; at least {MIN_STEPS} are required")
    return n_steps, t_gate / n_steps


def _step_unitary(h: np.ndarray, step: float) -> np.ndarray:
    energies, vectors = linalg.eigh(h)
    return (vectors * np.exp(-1j * energies * step)) @ vectors.conj().T


def _check_hermitian(h, t: float):
    dense = h.toarray() if sparse.issparse(h) else np.asarray(h)
    skew = np.max(np.abs(dense - dense.conj().T)) if dense.size else 0.0
    if skew > 1e-9 * max(1.0, float(np.max(np.abs(dense)))):
        raise ParameterDomainError(f"H(t={t}) is not Hermitian (max skew {skew:.3e})")


def propagate(hook: MatrixHook, t_gate: float, dt: float, t_start: float = 0.0,
              tolerance: float = UNITARITY_TOLERANCE) -> Propagator:
    """U = prod_k exp(-i H(t_k + dt/2) dt), latest step on the left."""
    n_steps, step = _step_grid(t_gate, dt)
    first = hook(t_start + 0.5 * step)
    _check_hermitian(first, t_start)
    dim = first.shape[0]
    unitary = np.eye(dim, dtype=complex)
    for k in range(n_steps):
        h = first if k == 0 else hook(t_start + (k + 0.5) * step)
        if sparse.issparse(h):
            h = h.toarray()
        unitary = _step_unitary(h, step) @ unitary

    defect = unitarity_defect(unitary)
    if defect > tolerance:
        raise IntegrationError(
            f"unitarity defect {defect:.3e} exceeds {tolerance:.1e} after {n_steps} steps; try a smaller dt")
    logger.debug(f"propagated {dim}-dim system over {t_gate:.4f} ns in {n_steps} steps, defect {defect:.2e}")
    return Propagator(unitary=unitary, t_gate=t_gate, dt=step, unitarity_defect=defect, t_start=t_start)


def _vector_steps(hook: MatrixHook, psi: np.ndarray, t_gate: float, dt: float,
                  method: EvolutionMethod, t_start: float) -> Iterator[Tuple[float, np.ndarray]]:
    n_steps, step = _step_grid(t_gate, dt)
    _check_hermitian(hook(t_start + 0.5 * step), t_start)
    for k in range(n_steps):
        h = hook(t_start + (k + 0.5) * step)
        if method is EvolutionMethod.KRYLOV:
            h = sparse.csr_matrix(h) if not sparse.issparse(h) else h.tocsr()
            psi = expm_multiply(-1j * step * h, psi)
        else:
            if sparse.issparse(h):
                h = h.toarray()
            psi = _step_unitary(h, step) @ psi
        yield t_start + (k + 1) * step, psi


def _check_norms(psi: np.ndarray, tolerance: float):
    norms = np.linalg.norm(psi, axis=0)
    defect = float(np.max(np.abs(norms - 1.0)))
    if defect > tolerance:
        raise IntegrationError(f"state norm drifted by {defect:.3e} (> {tolerance:.1e}); try a smaller dt")
    return defect


def evolve_vectors(hook: MatrixHook, psi0: np.ndarray, t_gate: float, dt: float,
                   method: Union[EvolutionMethod, str] = EvolutionMethod.EIGH,
                   t_start: float = 0.0, tolerance: float = UNITARITY_TOLERANCE) -> np.ndarray:
    """Evolve one state (1-d) or a block of states (columns) without forming U.

    The Krylov method works on sparse H and never renormalizes; a norm drift
    beyond ``tolerance`` fails the run.
    """
    method = EvolutionMethod(method)
    psi = np.array(psi0, dtype=complex)
    single = psi.ndim == 1
    if single:
        psi = psi[:, None]
    _check_norms(psi, tolerance)
    for _, psi in _vector_steps(hook, psi, t_gate, dt, method, t_start):
        pass
    _check_norms(psi, tolerance)
    return psi[:, 0] if single else psi


@dataclass(frozen=True, eq=False)
class GateSystem:
    """A built model driven by a pulse schedule.

    The schedule's idle frequencies define the readout point: the idle
    Hamiltonian is the model retuned to them, and its labeled dressed states
    are the basis for every population and phase this system reports.
    """
    model: HamiltonianModel
    schedule: PulseSchedule
    idle_model: HamiltonianModel = field(init=False, repr=False)
    idle: DressedSpectrum = field(init=False, repr=False)
    frame: FrameConvention = field(init=False, repr=False)
    _numbers: Dict[str, np.ndarray] = field(init=False, repr=False)
    _base_sparse: sparse.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        numbers = {name: TWO_PI * self.model.number_diagonal(name) for name in self.schedule.pulses}
        idle_model = self.model.with_frequencies(self.schedule.idle_frequencies())
        idle = dressed_spectrum(idle_model)
        object.__setattr__(self, '_numbers', numbers)
        object.__setattr__(self, 'idle_model', idle_model)
        object.__setattr__(self, 'idle', idle)
        object.__setattr__(self, 'frame', FrameConvention.rotating_idle(idle))
        object.__setattr__(self, '_base_sparse', self.model.sparse())

    @property
    def t_gate(self) -> float:
        return self.schedule.t_gate

    @property
    def dt(self) -> float:
        return self.schedule.dt

    def _shift(self, t: float) -> np.ndarray:
        shift = np.zeros(self.model.dimension)
        for name, omega in self.schedule.frequencies(t).items():
            delta = omega - self.model.modes[self.model.mode_position(name)].omega
            if delta != 0.0:
                shift += delta * self._numbers[name]
        return shift

    def hamiltonian(self, t: float) -> np.ndarray:
        h = np.array(self.model.matrix, copy=True)
        h[np.diag_indices_from(h)] += self._shift(t)
        return h

    def sparse_hamiltonian(self, t: float) -> sparse.csr_matrix:
        return (self._base_sparse + sparse.diags(self._shift(t))).tocsr()

    def propagate(self, tolerance: float = UNITARITY_TOLERANCE) -> Propagator:
        return propagate(self.hamiltonian, self.t_gate, self.dt, tolerance=tolerance)

    def initial_vectors(self, labels: Sequence[Sequence[int]]) -> np.ndarray:
        """Idle dressed states as columns; hybridized labels raise LabelingError."""
        return np.column_stack([self.idle.vector(label) for label in labels])

    def readout(self, psi: np.ndarray, t: float) -> np.ndarray:
        """Amplitudes in the idle dressed basis, rotating-idle frame."""
        return self.frame.apply(self.idle.vectors.conj().T @ psi, t)


@dataclass(frozen=True, eq=False)
class EvolvedState:
    initial: Occupation
    vector: np.ndarray = field(repr=False)       # lab frame, bare basis
    amplitudes: np.ndarray = field(repr=False)   # idle dressed basis, rotating-idle frame
    spectrum: DressedSpectrum = field(repr=False)

    def amplitude(self, label: Sequence[int]) -> complex:
        return complex(self.amplitudes[self.spectrum.eigenindex(label)])

    def population(self, label: Sequence[int]) -> float:
        return float(abs(self.amplitude(label)) ** 2)

    @property
    def populations(self) -> Dict[Occupation, float]:
        probs = np.abs(self.amplitudes) ** 2
        return {occ: float(probs[k]) for occ, k in self.spectrum.lookup.items()}

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def evolve_states(system: GateSystem, initial: Sequence[Sequence[int]],
                  propagator: Optional[Propagator] = None,
                  method: Union[EvolutionMethod, str, None] = None) -> List[EvolvedState]:
    """Evolve idle dressed states through the schedule.

    With ``propagator`` the final states are its columns applied to the
    initial vectors; otherwise the states are stepped directly (``method``
    defaults to eigh stepping).
    """
    labels = [tuple(label) for label in initial]
    psi0 = system.initial_vectors(labels)
    if propagator is not None:
        final = propagator.unitary @ psi0
    else:
        hook = system.sparse_hamiltonian if EvolutionMethod(method or "eigh") is EvolutionMethod.KRYLOV \
            else system.hamiltonian
        final = evolve_vectors(hook, psi0, system.t_gate, system.dt, method=method or EvolutionMethod.EIGH)
    amplitudes = system.readout(final, system.t_gate)
    return [EvolvedState(initial=label, vector=final[:, k], amplitudes=amplitudes[:, k], spectrum=system.idle)
            for k, label in enumerate(labels)]


def time_series(system: GateSystem, initial: Sequence[int], tracked: Sequence[Sequence[int]],
                stride: int = 10) -> pd.DataFrame:
    """Per-step populations of ``tracked`` idle dressed states plus the pulse values.

    Columns: t, P_<label> for each tracked label, omega_<mode> for each scheduled mode.
    """
    if stride < 1:
        raise ParameterDomainError(f"stride must be >= 1, got {stride}")
    tracked = [tuple(label) for label in tracked]
    indices = [system.idle.eigenindex(label) for label in tracked]
    psi = system.idle.vector(tuple(initial)).astype(complex)

    rows = []

    def record(t, state):
        probs = np.abs(system.idle.vectors.conj().T @ state) ** 2
        row = {'t': t}
        row.update({f"P_{''.join(map(str, label))}": float(probs[k]) for label, k in zip(tracked, indices)})
        rows.append(row)

    record(0.0, psi)
    n_steps, _ = _step_grid(system.t_gate, system.dt)
    steps = _vector_steps(system.hamiltonian, psi, system.t_gate, system.dt, EvolutionMethod.EIGH, 0.0)
    for count, (t, psi) in enumerate(steps, start=1):
        if count == n_steps:
            record(system.t_gate, psi)
        elif count % stride == 0:
            record(t, psi)

    frame = pd.DataFrame(rows)
    for name, values in system.schedule.samples(frame['t'].to_numpy()).items():
        frame[f"omega_{name}"] = values
    return frame


def return_probability(h: HamiltonianModel, state: Sequence[int], times) -> np.ndarray:
    """|<s|exp(-iHt)|s>|^2 for a constant Hamiltonian."""
    energies, vectors = linalg.eigh(np.asarray(h.matrix))
    weights = np.abs(vectors[h.state_index(state), :]) ** 2
    times = np.atleast_1d(np.asarray(times, dtype=float))
    amplitude = np.exp(-1j * np.outer(times, energies)) @ weights
    return np.abs(amplitude) ** 2


def oscillation_period(h: HamiltonianModel, state: Sequence[int], t_max: float, samples: int = 4000) -> float:
    """First revival time (ns) of the return probability of a bare state.

    The revival is the first local maximum after the probability has dropped
    below half of its swing; it is refined with a bounded scalar search.
    """
    if not t_max > 0:
        raise ParameterDomainError(f"t_max must be positive, got {t_max}")
    times = np.linspace(0.0, t_max, samples + 1)
    probs = return_probability(h, state, times)
    floor = float(np.min(probs))
    if 1.0 - floor < 1e-6:
        raise ParameterDomainError(f"state {tuple(state)} does not oscillate within {t_max} ns")
    threshold = 0.5 * (1.0 + floor)
    below = np.nonzero(probs < threshold)[0]
    first_dip = int(below[0])
    rising = np.nonzero(probs[first_dip:] >= threshold)[0]
    if len(rising) == 0:
        raise ParameterDomainError(f"no revival of {tuple(state)} within {t_max} ns; increase t_max")
    start = first_dip + int(rising[0])
    peak = start
    while peak + 1 < len(probs) and probs[peak + 1] >= probs[peak]:
        peak += 1
    lo = times[max(peak - 1, 0)]
    hi = times[min(peak + 1, len(times) - 1)]
    result = optimize.minimize_scalar(lambda t: -return_probability(h, state, t)[0],
                                      bounds=(lo, hi), method='bounded',
                                      options={'xatol': 1e-10})
    return float(result.x)

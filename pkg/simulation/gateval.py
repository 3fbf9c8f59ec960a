"""
Scoring of the two-qubit block: fidelity, conditional phase, leakage, swap
and the optimization cost.

The computational block is ordered (|00>, |01>, |10>, |11>) with the first
digit belonging to qubit 1.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from core.errors import (
    IntegrationError, LabelingError, ParameterDomainError, PhaseUndefinedError,
)
from simulation.control import FlattopPulse, hold_time
from simulation.dynamics import FrameConvention, GateSystem, Propagator, evolve_states
from simulation.model import Occupation

logger = logging.getLogger(__name__)

CZ = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
COMPUTATIONAL_KEYS = ("00", "01", "10", "11")
PHASE_FLOOR = 1e-6


def computational_labels(mode_names: Sequence[str], qubits: Tuple[str, str] = ("q1", "q2"),
                         background: Optional[Dict[str, int]] = None) -> Tuple[Occupation, ...]:
    """Occupation tuples of |00>, |01>, |10>, |11> on ``qubits``, other modes at ``background`` (default 0)."""
    background = dict(background or {})
    positions = {name: k for k, name in enumerate(mode_names)}
    missing = [q for q in (*qubits, *background) if q not in positions]
    if missing:
        raise LabelingError(f"modes {missing} are not part of {tuple(mode_names)}")
    labels = []
    for key in COMPUTATIONAL_KEYS:
        occupation = [0] * len(mode_names)
        for name, n in background.items():
            occupation[positions[name]] = n
        occupation[positions[qubits[0]]] = int(key[0])
        occupation[positions[qubits[1]]] = int(key[1])
        labels.append(tuple(occupation))
    return tuple(labels)


THREE_MODE_COMPUTATIONAL = computational_labels(("q1", "q2", "c"))


def extract_computational(u: Propagator, system: GateSystem, labels: Sequence[Sequence[int]] = THREE_MODE_COMPUTATIONAL,
                          frame: Optional[FrameConvention] = None) -> np.ndarray:
    """M[j, k] = <comp_j| U |comp_k> between idle dressed states, in ``frame`` (rotating-idle by default)."""
    frame = frame or system.frame
    vectors = system.initial_vectors(labels)
    block = vectors.conj().T @ u.unitary @ vectors
    phases = frame.phases(u.t_gate)
    if np.ndim(phases) == 0:
        return block
    indices = [system.idle.eigenindex(label) for label in labels]
    return phases[indices][:, None] * block


def block_from_states(states, labels: Sequence[Sequence[int]]) -> np.ndarray:
    """The same 4x4 block assembled from evolved computational inputs (one per column)."""
    block = np.zeros((len(labels), len(states)), dtype=complex)
    for k, state in enumerate(states):
        for j, label in enumerate(labels):
            block[j, k] = state.amplitude(label)
    return block


def _phase(value: complex, what: str) -> float:
    if abs(value) < PHASE_FLOOR:
        raise PhaseUndefinedError(f"|{what}| = {abs(value):.2e} is too small to define a phase")
    return float(np.angle(value))


def wrap_phase(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def remove_single_qubit_phases(m: np.ndarray) -> Tuple[np.ndarray, Tuple[float, float]]:
    """Virtual-Z correction.

    Returns Z(theta_1) x Z(theta_2) . m with the global phase set so that
    M00, M01 and M10 come out real positive, and the two angles
    (theta_1 acting on qubit 1, theta_2 on qubit 2).
    """
    m = np.asarray(m, dtype=complex)
    phi_00 = _phase(m[0, 0], "M_00,00")
    theta_2 = -(_phase(m[1, 1], "M_01,01") - phi_00)
    theta_1 = -(_phase(m[2, 2], "M_10,10") - phi_00)
    correction = np.exp(-1j * phi_00) * np.exp(1j * np.array([0.0, theta_2, theta_1, theta_1 + theta_2]))
    return correction[:, None] * m, (theta_1, theta_2)


def avg_gate_fidelity(u: np.ndarray, u_id: np.ndarray = CZ) -> float:
    u = np.asarray(u, dtype=complex)
    u_id = np.asarray(u_id, dtype=complex)
    d = u_id.shape[0]
    overlap = np.trace(u_id.conj().T @ u)
    value = (abs(overlap) ** 2 + np.trace(u.conj().T @ u).real) / (d * (d + 1))
    return float(value)


def conditional_phase(amplitudes) -> float:
    """arg M11 - arg M01 - arg M10 + arg M00, wrapped to (-pi, pi].

    Takes either the 4x4 block or the four diagonal amplitudes in
    computational order.
    """
    amplitudes = np.asarray(amplitudes, dtype=complex)
    if amplitudes.ndim == 2:
        amplitudes = np.diag(amplitudes)
    a00, a01, a10, a11 = (complex(a) for a in amplitudes)
    theta = (_phase(a11, "<11|psi_11>") - _phase(a01, "<01|psi_01>")
             - _phase(a10, "<10|psi_10>") + _phase(a00, "<00|psi_00>"))
    return wrap_phase(theta)


def leakage_and_swap(m: np.ndarray) -> Tuple[float, float]:
    """(1 - P11 from |11>, 1 - P01 from |01>)."""
    m = np.asarray(m)
    eps_leak = min(max(1.0 - abs(m[3, 3]) ** 2, 0.0), 1.0)
    eps_swap = min(max(1.0 - abs(m[1, 1]) ** 2, 0.0), 1.0)
    return float(eps_leak), float(eps_swap)


def cost_terms(m: np.ndarray) -> Tuple[float, float]:
    """(c_phase, c_leak) for a computational block."""
    m = np.asarray(m)
    theta = conditional_phase(m)
    c_phase = (abs(theta) - math.pi) ** 2
    column_weight = np.sum(np.abs(m) ** 2, axis=0)
    c_leak = float(np.mean(np.clip(1.0 - column_weight, 0.0, None)))
    return float(c_phase), c_leak


def gate_cost(m: np.ndarray) -> float:
    c_phase, c_leak = cost_terms(m)
    return c_phase + c_leak


@dataclass(frozen=True, eq=False)
class GateReport:
    u_comp: np.ndarray = field(repr=False)           # phase corrected
    theta: float
    fidelity: float
    eps_leak: float
    eps_swap: float
    cost: float
    c_phase: float
    c_leak: float
    phase_corrections: Tuple[float, float]
    t_gate: float
    dt: float
    unitarity_defect: float
    t_hold: Optional[float] = None

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity

    @property
    def gate_error(self) -> float:
        """Largest of the reported error channels."""
        return max(self.infidelity, self.eps_leak, self.eps_swap)

    def to_dict(self) -> dict:
        return {
            'u_comp': {
                'real': np.real(self.u_comp).tolist(),
                'imag': np.imag(self.u_comp).tolist(),
            },
            'theta': self.theta,
            'fidelity': self.fidelity,
            'eps_leak': self.eps_leak,
            'eps_swap': self.eps_swap,
            'cost': self.cost,
            'c_phase': self.c_phase,
            'c_leak': self.c_leak,
            'phase_corrections': list(self.phase_corrections),
            't_hold': self.t_hold,
            't_gate': self.t_gate,
            'dt': self.dt,
            'unitarity_defect': self.unitarity_defect,
        }


def report_from_block(m: np.ndarray, t_gate: float, dt: float, unitarity_defect: float,
                      t_hold: Optional[float] = None) -> GateReport:
    c_phase, c_leak = cost_terms(m)
    corrected, angles = remove_single_qubit_phases(m)
    eps_leak, eps_swap = leakage_and_swap(m)
    fidelity = min(max(avg_gate_fidelity(corrected, CZ), 0.0), 1.0)
    return GateReport(
        u_comp=corrected,
        theta=conditional_phase(m),
        fidelity=fidelity,
        eps_leak=eps_leak,
        eps_swap=eps_swap,
        cost=c_phase + c_leak,
        c_phase=c_phase,
        c_leak=c_leak,
        phase_corrections=angles,
        t_gate=t_gate,
        dt=dt,
        unitarity_defect=unitarity_defect,
        t_hold=t_hold,
    )


def schedule_hold(system: GateSystem) -> Optional[float]:
    pulses = [p for p in system.schedule.pulses.values() if isinstance(p, FlattopPulse)]
    return hold_time(pulses[0]) if pulses else None


def score(system: GateSystem, labels: Sequence[Sequence[int]] = THREE_MODE_COMPUTATIONAL,
          propagator: Optional[Propagator] = None) -> GateReport:
    """Propagate once and score the computational block read from its columns."""
    propagator = propagator or system.propagate()
    states = evolve_states(system, labels, propagator=propagator)
    m = block_from_states(states, labels)
    return report_from_block(m, propagator.t_gate, propagator.dt, propagator.unitarity_defect,
                             t_hold=schedule_hold(system))


class CostFunction:
    """p -> cost for a factory building the driven system from p.

    Failures inside a single evaluation (integration, labeling, phase or a
    parameter outside a formula's domain) return ``math.inf`` so a simplex
    search can keep moving.
    """

    def __init__(self, factory: Callable[[Sequence[float]], GateSystem],
                 labels: Sequence[Sequence[int]] = THREE_MODE_COMPUTATIONAL):
        self.factory = factory
        self.labels = tuple(tuple(label) for label in labels)
        self.evaluations = 0
        self.failures = 0

    def report(self, p: Sequence[float]) -> GateReport:
        return score(self.factory(p), self.labels)

    def __call__(self, p: Sequence[float]) -> float:
        self.evaluations += 1
        try:
            return self.report(p).cost
        except (IntegrationError, LabelingError, PhaseUndefinedError, ParameterDomainError) as e:
            self.failures += 1
            logger.warning(f"cost evaluation at p={list(np.round(p, 6))} failed: {e}")
            return math.inf

"""
Truncated multi-mode bosonic Hamiltonians.

Mode parameters are linear frequencies in GHz; matrices are built in angular
units (rad/ns), i.e. multiplied by 2*pi, so exp(-i H t) takes t in ns.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import qutip as qt
from scipy import linalg, sparse

from core.errors import ConfigError, LabelingError, ParameterDomainError
from simulation.quantize import ModeParams

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
HYBRIDIZATION_THRESHOLD = 0.5
MIN_LEVELS, MAX_LEVELS = 2, 6

Occupation = Tuple[int, ...]


class CouplingForm(str, Enum):
    RWA = "rwa"
    FULL = "full"


@dataclass(frozen=True)
class ModeSpec:
    name: str
    omega: float
    alpha: float
    levels: int = 4

    def __post_init__(self):
        if not MIN_LEVELS <= self.levels <= MAX_LEVELS:
            raise ParameterDomainError(
                f"mode {self.name}: levels must lie in [{MIN_LEVELS}, {MAX_LEVELS}], got {self.levels}")


THREE_MODE_ORDER = ("q1", "q2", "c")
LATTICE_ORDER = ("Q1", "Q2", "S1", "S2", "C1", "C2", "C3", "C4")


def three_mode_specs(params: ModeParams, levels: int = 4) -> List[ModeSpec]:
    """Modes in the fixed (qubit1, qubit2, coupler) order."""
    return [
        ModeSpec("q1", params.omega_1, params.alpha_1, levels),
        ModeSpec("q2", params.omega_2, params.alpha_2, levels),
        ModeSpec("c", params.omega_c, params.alpha_c, levels),
    ]


def three_mode_couplings(params: ModeParams) -> Dict[Tuple[str, str], float]:
    return {("q1", "q2"): params.g_12, ("q1", "c"): params.g_1c, ("q2", "c"): params.g_2c}


@dataclass(frozen=True, eq=False)
class HamiltonianModel:
    modes: Tuple[ModeSpec, ...]
    couplings: Tuple[Tuple[str, str, float], ...]
    form: CouplingForm
    basis: Tuple[Occupation, ...]
    matrix: np.ndarray = field(repr=False)
    max_excitations: Optional[int] = None
    index: Dict[Occupation, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'index', {state: i for i, state in enumerate(self.basis)})
        self.matrix.setflags(write=False)

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @property
    def mode_names(self) -> Tuple[str, ...]:
        return tuple(m.name for m in self.modes)

    def mode_position(self, name: str) -> int:
        try:
            return self.mode_names.index(name)
        except ValueError:
            raise ConfigError(f"unknown mode {name!r}; modes are {self.mode_names}") from None

    def number_diagonal(self, name: str) -> np.ndarray:
        """Diagonal of n_name in this basis."""
        k = self.mode_position(name)
        return np.array([state[k] for state in self.basis], dtype=float)

    def excitation_diagonal(self) -> np.ndarray:
        return np.array([sum(state) for state in self.basis], dtype=float)

    def state_index(self, occupation: Sequence[int]) -> int:
        occupation = tuple(occupation)
        try:
            return self.index[occupation]
        except KeyError:
            raise LabelingError(f"state {occupation} is not in the truncated basis") from None

    def basis_vector(self, occupation: Sequence[int]) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=complex)
        vec[self.state_index(occupation)] = 1.0
        return vec

    def sparse(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(self.matrix)

    def frequency_shift(self, frequencies: Mapping[str, float]) -> np.ndarray:
        """Diagonal (angular) to add when modes are moved to ``frequencies`` (GHz)."""
        shift = np.zeros(self.dimension)
        for name, omega in frequencies.items():
            k = self.mode_position(name)
            delta = omega - self.modes[k].omega
            if delta != 0.0:
                shift += TWO_PI * delta * self.number_diagonal(name)
        return shift

    def with_frequencies(self, frequencies: Mapping[str, float]) -> 'HamiltonianModel':
        """Same couplings and basis, modes retuned to ``frequencies`` (GHz)."""
        matrix = np.array(self.matrix, copy=True)
        matrix[np.diag_indices_from(matrix)] += self.frequency_shift(frequencies)
        modes = tuple(replace(m, omega=frequencies.get(m.name, m.omega)) for m in self.modes)
        return replace(self, modes=modes, matrix=matrix)


def enumerate_basis(modes: Sequence[ModeSpec], max_excitations: Optional[int] = None) -> List[Occupation]:
    """Occupation tuples in lexicographic order, first mode most significant."""
    states = itertools.product(*(range(m.levels) for m in modes))
    if max_excitations is None:
        return list(states)
    return [s for s in states if sum(s) <= max_excitations]


def mode_operators(modes: Sequence[ModeSpec],
                   max_excitations: Optional[int] = None) -> Tuple[List[qt.Qobj], List[Occupation]]:
    """Annihilation operators for every mode plus the occupation label of each basis index.

    Without a cutoff the space is the full tensor product (first mode most
    significant); with one it is qutip's excitation-number-restricted space.
    """
    dims = [m.levels for m in modes]
    if max_excitations is None:
        ops = []
        for k in range(len(modes)):
            factors = [qt.qeye(d) for d in dims]
            factors[k] = qt.destroy(dims[k])
            ops.append(qt.tensor(*factors))
        return ops, enumerate_basis(modes)
    _, _, idx2state = qt.enr_state_dictionaries(dims, max_excitations)
    basis = [tuple(int(n) for n in idx2state[i]) for i in range(len(idx2state))]
    return list(qt.enr_destroy(dims, max_excitations)), basis


def build(modes: Sequence[ModeSpec],
          couplings: Mapping[Tuple[str, str], float],
          form: Union[CouplingForm, str] = CouplingForm.FULL,
          max_excitations: Optional[int] = None) -> HamiltonianModel:
    """Assemble H = sum_i w_i n_i + a_i/2 n_i(n_i - 1) + sum_{i<j} g_ij (exchange [+ counter-rotating])."""
    form = CouplingForm(form)
    modes = tuple(modes)
    names = [m.name for m in modes]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate mode names in {names}")
    position = {name: k for k, name in enumerate(names)}

    pairs = []
    for (a, b), g in couplings.items():
        if a not in position or b not in position:
            raise ConfigError(f"coupling ({a}, {b}) references an unknown mode; modes are {names}")
        if a == b:
            raise ConfigError(f"self-coupling on mode {a!r}")
        pairs.append((position[a], position[b], float(g)))

    ops, basis = mode_operators(modes, max_excitations)
    h = 0 * ops[0].dag() * ops[0]
    for mode, a in zip(modes, ops):
        n = a.dag() * a
        h += mode.omega * n + 0.5 * mode.alpha * (n * n - n)
    for i, j, g in pairs:
        if g == 0.0:
            continue
        # charge coupling n_i n_j in ladder form: exchange minus the two-photon terms
        h += g * (ops[i].dag() * ops[j] + ops[j].dag() * ops[i])
        if form is CouplingForm.FULL:
            h -= g * (ops[i].dag() * ops[j].dag() + ops[i] * ops[j])

    matrix = TWO_PI * np.asarray(h.full(), dtype=complex)

    logger.debug(f"built {form.value} Hamiltonian over {names} with dimension {len(basis)}")
    return HamiltonianModel(
        modes=modes,
        couplings=tuple((names[i], names[j], g) for i, j, g in pairs),
        form=form,
        basis=tuple(basis),
        matrix=matrix,
        max_excitations=max_excitations,
    )


def project(h: HamiltonianModel, states: Sequence[Sequence[int]]) -> np.ndarray:
    """Sub-matrix of ``h`` (angular units) on the listed occupation tuples."""
    idx = [h.state_index(s) for s in states]
    return np.asarray(h.matrix)[np.ix_(idx, idx)]


@dataclass(frozen=True)
class DressedLabel:
    eigenindex: int
    occupation: Optional[Occupation]
    overlap: float

    @property
    def hybridized(self) -> bool:
        return self.occupation is None


@dataclass(frozen=True, eq=False)
class DressedSpectrum:
    energies: np.ndarray      # GHz, ascending
    vectors: np.ndarray       # columns are eigenvectors in the bare basis
    labels: Tuple[DressedLabel, ...]
    lookup: Dict[Occupation, int] = field(repr=False)

    def __iter__(self) -> Iterator[Tuple[float, DressedLabel]]:
        return iter(zip(self.energies.tolist(), self.labels))

    def __len__(self) -> int:
        return len(self.labels)

    def eigenindex(self, occupation: Sequence[int]) -> int:
        occupation = tuple(occupation)
        try:
            return self.lookup[occupation]
        except KeyError:
            raise LabelingError(f"no dressed state is unambiguously labeled {occupation}") from None

    def energy(self, occupation: Sequence[int]) -> float:
        return float(self.energies[self.eigenindex(occupation)])

    def vector(self, occupation: Sequence[int]) -> np.ndarray:
        return self.vectors[:, self.eigenindex(occupation)]


def dressed_spectrum(h: HamiltonianModel) -> DressedSpectrum:
    """Eigenpairs labeled by their largest bare component.

    States whose best squared overlap does not exceed 0.5 are reported as
    hybridized (occupation None) instead of being guessed.
    """
    values, vectors = linalg.eigh(np.asarray(h.matrix))
    weights = np.abs(vectors)
    labels = []
    lookup = {}
    for k in range(h.dimension):
        best = int(np.argmax(weights[:, k]))
        overlap = float(weights[best, k])
        if overlap ** 2 > HYBRIDIZATION_THRESHOLD:
            occupation = h.basis[best]
            lookup[occupation] = k
        else:
            occupation = None
        labels.append(DressedLabel(eigenindex=k, occupation=occupation, overlap=overlap))

    # Fix the eigenvector phase so the labeling component is real positive.
    for k, label in enumerate(labels):
        if label.occupation is not None:
            component = vectors[h.index[label.occupation], k]
            vectors[:, k] *= np.conj(component) / abs(component)

    return DressedSpectrum(energies=values / TWO_PI, vectors=vectors, labels=tuple(labels), lookup=lookup)


@dataclass(frozen=True)
class BSuperposition:
    """Equal-weight symmetric superposition of two bare states."""
    first: Occupation = (2, 0, 0)
    second: Occupation = (0, 2, 0)

    def vector(self, h: HamiltonianModel) -> np.ndarray:
        missing = [s for s in (self.first, self.second) if tuple(s) not in h.index]
        if missing:
            raise ParameterDomainError(f"B superposition needs both {self.first} and {self.second}; missing {missing}")
        return (h.basis_vector(self.first) + h.basis_vector(self.second)) / math.sqrt(2.0)


B_STATE = BSuperposition()


def effective_coupling(h: HamiltonianModel,
                       state_a: Sequence[int],
                       state_b: Union[Sequence[int], BSuperposition]) -> float:
    """|<a|H|b>| / 2pi in GHz."""
    a = h.basis_vector(state_a)
    if isinstance(state_b, BSuperposition):
        b = state_b.vector(h)
    else:
        b = h.basis_vector(state_b)
    return float(abs(np.vdot(a, np.asarray(h.matrix) @ b)) / TWO_PI)


def effective_hamiltonian(h: HamiltonianModel, states: Sequence[Sequence[int]]) -> np.ndarray:
    """Effective Hamiltonian (GHz) on the bare subspace spanned by ``states``.

    The eigenvectors with the largest weight inside the subspace are projected
    onto it and orthonormalized by a polar decomposition, so the result has
    exactly their energies and folds in every virtual excitation outside the
    subspace (the coupler, in practice).
    """
    idx = [h.state_index(s) for s in states]
    values, vectors = linalg.eigh(np.asarray(h.matrix))
    weights = np.sum(np.abs(vectors[idx, :]) ** 2, axis=0)
    columns = np.sort(np.argsort(weights, kind='stable')[-len(idx):])
    if np.min(weights[columns]) <= HYBRIDIZATION_THRESHOLD:
        raise LabelingError(f"subspace {list(states)} is hybridized with the rest of the spectrum "
                            f"(weights {np.round(weights[columns], 3).tolist()})")
    unitary, _ = linalg.polar(vectors[np.ix_(idx, columns)])
    return (unitary * (values[columns] / TWO_PI)) @ unitary.conj().T


def dressed_coupling(h: HamiltonianModel,
                     state_a: Sequence[int],
                     state_b: Union[Sequence[int], BSuperposition]) -> float:
    """Signed <a|H_eff|b> in GHz, with H_eff taken over the bare states involved."""
    if isinstance(state_b, BSuperposition):
        states = [tuple(state_a), tuple(state_b.first), tuple(state_b.second)]
        b = np.array([0.0, 1.0, 1.0]) / math.sqrt(2.0)
    else:
        states = [tuple(state_a), tuple(state_b)]
        b = np.array([0.0, 1.0])
    h_eff = effective_hamiltonian(h, states)
    return float(np.real(h_eff[0] @ b))


def mediated_exchange(omega_1: float, omega_2: float, omega_c: float,
                      g_12: float, g_1c: float, g_2c: float) -> float:
    """Coupler-mediated qubit-qubit exchange to second order (GHz).

    Includes the counter-rotating (sum-frequency) virtual paths.
    """
    delta_1, delta_2 = omega_1 - omega_c, omega_2 - omega_c
    sigma_1, sigma_2 = omega_1 + omega_c, omega_2 + omega_c
    if delta_1 == 0 or delta_2 == 0:
        raise ParameterDomainError("coupler resonant with a qubit; dispersive exchange undefined")
    return g_12 + 0.5 * g_1c * g_2c * (1 / delta_1 + 1 / delta_2 - 1 / sigma_1 - 1 / sigma_2)

"""
Device builders: the three-mode gate device and the four-qubit lattice.

Both map a parameter vector p = (t_hold, coupler_on, qubit_on) to a driven
GateSystem. Qubit 1 and its coupler are pulsed; every other mode sits at its
idle frequency.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from core.errors import ConfigError, LabelingError, ParameterDomainError
from experiments.settings import ExperimentConfig
from simulation.control import FlattopPulse, PulseSchedule
from simulation.dynamics import GateSystem
from simulation.gateval import THREE_MODE_COMPUTATIONAL, CostFunction, computational_labels
from simulation.model import (
    B_STATE, LATTICE_ORDER, CouplingForm, HamiltonianModel, ModeSpec, build, dressed_coupling,
    effective_hamiltonian, mediated_exchange, three_mode_couplings, three_mode_specs,
)
from simulation.optimizer import NelderMeadConfig
from simulation.quantize import ModeParams, calibrate_capacitances, derive_mode_params

logger = logging.getLogger(__name__)

PARAMETER_NAMES = ("t_hold", "omega_c_on", "omega_q_on")
DECOUPLING_GRID_STEP = 0.01
COUPLER_SEED_OFFSETS = (-0.05, 0.0, 0.05)
COUPLER_QUBIT_GAP = 0.15
SEED_PASSES = 3
SEED_QUBIT_SPAN = 0.05
WORK_STATES = ((1, 1, 0), (2, 0, 0), (0, 2, 0))


def mode_params(cfg: ExperimentConfig) -> ModeParams:
    """ModeParams from the device section (direct, or derived from the circuit)."""
    device = cfg.device
    if device.modes is not None:
        return device.modes.to_params()
    circuit = device.circuit.to_params()
    if device.circuit.calibrate:
        circuit = calibrate_capacitances(circuit, device.circuit.targets)
    return derive_mode_params(circuit, device.circuit.alpha_coupler)


def pair_model(params: ModeParams, omega_1: float, omega_2: float,
               alpha_1: Optional[float] = None, alpha_2: Optional[float] = None,
               levels: int = 3, form: CouplingForm = CouplingForm.FULL) -> HamiltonianModel:
    """Three-mode model of one qubit pair and its coupler (at least three levels, so |B> exists)."""
    pair = params.with_(
        omega_1=omega_1, omega_2=omega_2,
        alpha_1=params.alpha_1 if alpha_1 is None else alpha_1,
        alpha_2=params.alpha_2 if alpha_2 is None else alpha_2,
    )
    return build(three_mode_specs(pair, max(levels, 3)), three_mode_couplings(pair), form)


def b_coupling(model: HamiltonianModel, omega_c: float) -> float:
    """Dressed |110> <-> |B> coupling (GHz, signed) with the coupler at ``omega_c``."""
    return dressed_coupling(model.with_frequencies({"c": omega_c}), (1, 1, 0), B_STATE)


def decoupling_frequency(params: ModeParams, omega_1: float, omega_2: float,
                         window: Tuple[float, float] = (5.0, 7.0),
                         alpha_1: Optional[float] = None, alpha_2: Optional[float] = None,
                         levels: int = 3, form: CouplingForm = CouplingForm.FULL) -> float:
    """Coupler frequency in ``window`` where the dressed |110> <-> |B> coupling vanishes.

    The window is scanned on a 10 MHz grid. Among the sign changes the one
    nearest the root of the perturbative exchange is refined with brentq;
    without a sign change the smallest magnitude is refined instead.
    """
    lo, hi = window
    if min(omega_1, omega_2) < hi and max(omega_1, omega_2) > lo:
        raise ParameterDomainError(f"qubit frequencies ({omega_1}, {omega_2}) lie inside the coupler window {window}")
    model = pair_model(params, omega_1, omega_2, alpha_1, alpha_2, levels, form)

    def coupling(omega_c):
        return b_coupling(model, omega_c)

    grid = np.arange(lo, hi + 0.5 * DECOUPLING_GRID_STEP, DECOUPLING_GRID_STEP)
    values = np.array([coupling(w) for w in grid])
    crossings = np.nonzero(values[:-1] * values[1:] <= 0)[0]
    if len(crossings):
        exchange = np.array([mediated_exchange(omega_1, omega_2, w, params.g_12, params.g_1c, params.g_2c)
                             for w in grid])
        roots = np.nonzero(exchange[:-1] * exchange[1:] <= 0)[0]
        anchor = grid[roots[0]] if len(roots) else grid[int(np.argmin(np.abs(values)))]
        k = int(crossings[np.argmin(np.abs(grid[crossings] - anchor))])
        if values[k] == 0.0:
            omega = float(grid[k])
        else:
            omega = float(optimize.brentq(coupling, grid[k], grid[k + 1], xtol=1e-10))
    else:
        k = int(np.argmin(np.abs(values)))
        a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        result = optimize.minimize_scalar(lambda w: abs(coupling(w)), bounds=(a, b), method='bounded',
                                          options={'xatol': 1e-10})
        omega = float(result.x)
        logger.warning(f"dressed |110>-|B> coupling has no zero in {window}; "
                       f"using its minimum {abs(coupling(omega)) * 1e3:.4f} MHz at {omega:.5f} GHz")
    logger.debug(f"decoupling point for qubits ({omega_1}, {omega_2}): {omega:.5f} GHz, "
                 f"residual coupling {coupling(omega) * 1e3:.2e} MHz")
    return omega


def work_block(model: HamiltonianModel, qubit_on: float, coupler_on: float) -> np.ndarray:
    """Effective Hamiltonian on (|110>, |200>, |020>) at a work point."""
    return effective_hamiltonian(model.with_frequencies({"q1": qubit_on, "c": coupler_on}), WORK_STATES)


def bright_coupling(block: np.ndarray) -> float:
    """Coupling of |110> to the combination of |200>, |020> it actually drives."""
    return math.hypot(block[0, 1], block[0, 2])


def coupler_for_bright_coupling(model: HamiltonianModel, qubit_on: float, target: float,
                                coupler_idle: float, floor: float) -> float:
    """Highest coupler frequency below idle whose bright coupling reaches ``target``."""
    def residual(omega_c):
        return bright_coupling(work_block(model, qubit_on, omega_c)) - target

    upper, upper_value = coupler_idle, residual(coupler_idle)
    if upper_value >= 0:
        return coupler_idle
    for omega_c in np.arange(coupler_idle - DECOUPLING_GRID_STEP, floor - 1e-12, -DECOUPLING_GRID_STEP):
        try:
            value = residual(omega_c)
        except LabelingError:
            break
        if value >= 0:
            return float(optimize.brentq(residual, omega_c, upper, xtol=1e-10))
        upper = omega_c
    logger.warning(f"no coupler frequency down to {upper:.3f} GHz reaches a {target * 1e3:.2f} MHz "
                   f"bright coupling at qubit {qubit_on:.4f} GHz")
    return float(upper)


def qubit_for_degeneracy(model: HamiltonianModel, coupler_on: float, center: float) -> float:
    """Qubit frequency near ``center`` where dressed |200> and |020> are degenerate."""
    def splitting(qubit_on):
        block = work_block(model, qubit_on, coupler_on)
        return float(block[1, 1] - block[2, 2])

    lo, hi = center - SEED_QUBIT_SPAN, center + SEED_QUBIT_SPAN
    try:
        if splitting(lo) * splitting(hi) > 0:
            logger.warning(f"|200> and |020> do not cross within {SEED_QUBIT_SPAN * 1e3:.0f} MHz of {center:.4f} GHz")
            return center
        return float(optimize.brentq(splitting, lo, hi, xtol=1e-10))
    except LabelingError as e:
        logger.warning(f"qubit seed left at {center:.4f} GHz: {e}")
        return center


def work_point_seed(params: ModeParams, t_hold: float, coupler_idle: float, floor_gap: float = COUPLER_QUBIT_GAP,
                    levels: int = 3, form: CouplingForm = CouplingForm.FULL) -> Tuple[float, float]:
    """(coupler_on, qubit_on) closing one |110> <-> bright-state cycle in ``t_hold``.

    Alternates between the coupler (bright coupling 1 / (2 t_hold)) and the
    qubit (dressed |200>, |020> degenerate), starting from the bare
    degeneracy 2 w_1 + a_1 = 2 w_2 + a_2.
    """
    model = pair_model(params, params.omega_1, params.omega_2, levels=levels, form=form)
    target = 1.0 / (2.0 * t_hold)
    qubit_on = params.omega_2 + 0.5 * (params.alpha_2 - params.alpha_1)
    coupler_on = coupler_idle
    for _ in range(SEED_PASSES):
        floor = max(qubit_on, params.omega_2) + floor_gap
        coupler_on = coupler_for_bright_coupling(model, qubit_on, target, coupler_idle, floor)
        qubit_on = qubit_for_degeneracy(model, coupler_on, qubit_on)
    logger.info(f"work-point seed: coupler {coupler_on:.5f} GHz, qubit {qubit_on:.5f} GHz for a "
                f"{t_hold:.2f} ns hold")
    return coupler_on, qubit_on


@dataclass(frozen=True, eq=False)
class PulsedDevice:
    """A built model plus the pulse geometry shared by every p."""
    model: HamiltonianModel
    params: ModeParams
    qubit_mode: str
    coupler_mode: str
    qubit_idle: float
    coupler_idle: float
    sigma: float
    dt: float
    labels: Tuple[Tuple[int, ...], ...] = THREE_MODE_COMPUTATIONAL

    def schedule(self, p: Sequence[float], dt: Optional[float] = None) -> PulseSchedule:
        t_hold, coupler_on, qubit_on = (float(x) for x in p)
        pulses = {
            self.qubit_mode: FlattopPulse.from_hold(self.qubit_idle, qubit_on, self.sigma, t_hold),
            self.coupler_mode: FlattopPulse.from_hold(self.coupler_idle, coupler_on, self.sigma, t_hold),
        }
        return PulseSchedule.flattop(pulses, dt=dt or self.dt)

    def system(self, p: Sequence[float], dt: Optional[float] = None) -> GateSystem:
        return GateSystem(self.model, self.schedule(p, dt))

    def cost_function(self) -> CostFunction:
        return CostFunction(self.system, self.labels)


def three_mode_device(cfg: ExperimentConfig, params: Optional[ModeParams] = None,
                      dt: Optional[float] = None) -> PulsedDevice:
    params = params or mode_params(cfg)
    pulse = cfg.pulse
    coupler_idle = pulse.coupler_idle or decoupling_frequency(
        params, pulse.qubit_idle, params.omega_2, pulse.decoupling_window,
        levels=cfg.device.levels, form=cfg.device.form)
    params = params.with_(omega_c=coupler_idle)
    model = build(three_mode_specs(params, cfg.device.levels), three_mode_couplings(params), cfg.device.form)
    logger.info(f"three-mode device: dimension {model.dimension}, qubit idle {pulse.qubit_idle:.4f} GHz, "
                f"coupler idle {coupler_idle:.4f} GHz")
    return PulsedDevice(
        model=model, params=params, qubit_mode="q1", coupler_mode="c",
        qubit_idle=pulse.qubit_idle, coupler_idle=coupler_idle,
        sigma=pulse.sigma, dt=dt or cfg.run.dt,
    )


def optimizer_config(cfg: ExperimentConfig, device: PulsedDevice) -> NelderMeadConfig:
    """Seed and bounds for p = (t_hold, omega_c_on, omega_q_on)."""
    pulse = cfg.pulse
    params = device.params
    qubit_on, coupler_on = pulse.qubit_on, pulse.coupler_on
    if qubit_on is None or coupler_on is None:
        seed_coupler, seed_qubit = work_point_seed(params, pulse.t_hold, device.coupler_idle,
                                                   levels=cfg.device.levels, form=cfg.device.form)
        qubit_on = qubit_on or seed_qubit
        coupler_on = coupler_on or seed_coupler

    qubit_bounds = pulse.qubit_bounds or (qubit_on - 0.1, qubit_on + 0.1)
    coupler_bounds = pulse.coupler_bounds or (
        max(qubit_on, params.omega_2) + COUPLER_QUBIT_GAP, device.coupler_idle)
    lower = (pulse.hold_bounds[0], coupler_bounds[0], qubit_bounds[0])
    upper = (pulse.hold_bounds[1], coupler_bounds[1], qubit_bounds[1])
    p0 = tuple(min(max(x, lo), hi) for x, lo, hi in zip((pulse.t_hold, coupler_on, qubit_on), lower, upper))

    if pulse.coupler_seeds is not None:
        seeds = tuple(pulse.coupler_seeds)
    elif pulse.coupler_on is None:
        seeds = tuple(min(max(coupler_on + off, lower[1]), upper[1]) for off in COUPLER_SEED_OFFSETS)
    else:
        seeds = ()

    return NelderMeadConfig(
        p0=p0, lower=lower, upper=upper,
        tol_f=pulse.tol_f, tol_x=tuple(pulse.tol_x),
        max_iterations=pulse.max_iterations,
        names=PARAMETER_NAMES,
        seed_axis=1 if seeds else None,
        seed_values=seeds,
        target_cost=pulse.target_cost,
        restarts=pulse.restarts,
    )


def lattice_modes(cfg: ExperimentConfig, params: ModeParams) -> List[ModeSpec]:
    lattice = cfg.lattice
    q, c = lattice.qubit_levels, lattice.coupler_levels
    return [
        ModeSpec("Q1", params.omega_1, params.alpha_1, q),
        ModeSpec("Q2", params.omega_2, params.alpha_2, q),
        ModeSpec("S1", lattice.spectator_1[0], lattice.spectator_1[1], q),
        ModeSpec("S2", lattice.spectator_2[0], lattice.spectator_2[1], q),
        ModeSpec("C1", params.omega_c, params.alpha_c, c),
        ModeSpec("C2", params.omega_c, params.alpha_c, c),
        ModeSpec("C3", params.omega_c, params.alpha_c, c),
        ModeSpec("C4", params.omega_c, params.alpha_c, c),
    ]


# coupler -> (qubit a, qubit b)
LATTICE_EDGES = {"C1": ("Q1", "Q2"), "C2": ("Q2", "S2"), "C3": ("S1", "S2"), "C4": ("Q1", "S1")}


def lattice_couplings(params: ModeParams, spectator_scale: float = 1.0) -> Dict[Tuple[str, str], float]:
    """Every edge gets the main pair's couplings; spectator edges are scaled."""
    couplings = {}
    for coupler, (a, b) in LATTICE_EDGES.items():
        scale = 1.0 if coupler == "C1" else spectator_scale
        couplings[(a, b)] = scale * params.g_12
        couplings[(a, coupler)] = scale * params.g_1c
        couplings[(b, coupler)] = scale * params.g_2c
    return couplings


def lattice_device(cfg: ExperimentConfig, params: Optional[ModeParams] = None,
                   max_excitations: Optional[int] = None, spectator_scale: Optional[float] = None,
                   coupler_idle: Optional[float] = None, dt: Optional[float] = None) -> PulsedDevice:
    """Q1-Q2 gate pair with spectators S1 (next to Q1) and S2 (next to Q2).

    Spectator couplers idle at their own decoupling points.
    """
    params = params or mode_params(cfg)
    lattice = cfg.lattice
    pulse = cfg.pulse
    max_excitations = max_excitations or lattice.max_excitations
    scale = lattice.spectator_coupling_scale if spectator_scale is None else spectator_scale

    idle = {"Q1": pulse.qubit_idle, "Q2": params.omega_2,
            "S1": lattice.spectator_1[0], "S2": lattice.spectator_2[0]}
    alpha = {"Q1": params.alpha_1, "Q2": params.alpha_2,
             "S1": lattice.spectator_1[1], "S2": lattice.spectator_2[1]}
    coupler_idles = {}
    for coupler, (a, b) in LATTICE_EDGES.items():
        if coupler == "C1" and (coupler_idle or pulse.coupler_idle):
            coupler_idles[coupler] = coupler_idle or pulse.coupler_idle
        else:
            coupler_idles[coupler] = decoupling_frequency(
                params, idle[a], idle[b], pulse.decoupling_window, alpha_1=alpha[a], alpha_2=alpha[b],
                levels=lattice.qubit_levels, form=cfg.device.form)

    modes = lattice_modes(cfg, params)
    modes = [ModeSpec(m.name, coupler_idles.get(m.name, idle.get(m.name, m.omega)), m.alpha, m.levels)
             for m in modes]
    model = build(modes, lattice_couplings(params, scale), cfg.device.form, max_excitations=max_excitations)
    logger.info(f"lattice device: dimension {model.dimension} (cutoff {max_excitations}), "
                f"coupler idles " + ", ".join(f"{k}={v:.4f}" for k, v in coupler_idles.items()))

    return PulsedDevice(
        model=model, params=params.with_(omega_c=coupler_idles["C1"]),
        qubit_mode="Q1", coupler_mode="C1",
        qubit_idle=pulse.qubit_idle, coupler_idle=coupler_idles["C1"],
        sigma=pulse.sigma, dt=dt or cfg.run.dt,
        labels=computational_labels(LATTICE_ORDER, ("Q1", "Q2")),
    )


def spectator_labels(state: str) -> Tuple[Tuple[int, ...], ...]:
    """Q1-Q2 computational labels with spectators S1 S2 in ``state`` ("00".."11")."""
    if len(state) != 2 or set(state) - {"0", "1"}:
        raise ConfigError(f"spectator state must be one of 00, 01, 10, 11; got {state!r}")
    return computational_labels(LATTICE_ORDER, ("Q1", "Q2"), background={"S1": int(state[0]), "S2": int(state[1])})


def rabi_model(omega_1: float, omega_2: float, alpha_1: float, alpha_2: float, g_12: float,
               levels: int = 3) -> HamiltonianModel:
    """Two directly coupled modes under the RWA."""
    modes = [ModeSpec("q1", omega_1, alpha_1, levels), ModeSpec("q2", omega_2, alpha_2, levels)]
    return build(modes, {("q1", "q2"): g_12}, "rwa")

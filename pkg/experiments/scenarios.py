"""
Scenario runners behind the czforge CLI.

Each runner takes a validated ExperimentConfig and returns a ScenarioOutcome:
JSON-ready reports and pandas tables keyed by output file name. Runners
never touch the filesystem; ``persist`` does.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core import __version__
from core.config import Config
from core.errors import ConfigError, ParameterDomainError
from experiments.devices import (
    PulsedDevice, lattice_device, mode_params, optimizer_config, rabi_model, spectator_labels,
    three_mode_device,
)
from experiments.persistence import ResultWriter
from experiments.settings import ExperimentConfig, config_hash
from simulation.dynamics import evolve_states, oscillation_period, return_probability, time_series
from simulation.gateval import GateReport, block_from_states, report_from_block, schedule_hold, score
from simulation.model import BSuperposition, dressed_spectrum, effective_coupling
from simulation.optimizer import OptimizationRun, minimize
from simulation.quantize import (
    REFERENCE_MODES, calibrate_capacitances, derive_mode_params, flux_for_ej, reference_circuit,
    transmon_ej_for_frequency,
)

logger = logging.getLogger(__name__)

HALF_DT_TOLERANCE = 0.10
CUTOFF_TOLERANCE = 0.20
REPORT_COLUMNS = ("eps_leak", "eps_swap", "theta", "fidelity", "cost", "gate_error", "t_hold", "t_gate")
TRACKED_STATES = ((1, 1, 0), (2, 0, 0), (0, 2, 0), (0, 1, 0), (1, 0, 0), (1, 0, 1), (0, 1, 1))


@dataclass
class SweepResult:
    axis: str
    rows: List[dict]
    provenance: dict

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.rows)
        leading = [self.axis, *[c for c in REPORT_COLUMNS if c in frame.columns]]
        return frame[leading + [c for c in frame.columns if c not in leading]]

    @property
    def values(self) -> List[float]:
        return [row[self.axis] for row in self.rows]


@dataclass
class ScenarioOutcome:
    name: str
    converged: bool = True
    reports: Dict[str, dict] = field(default_factory=dict)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    report: Optional[GateReport] = None
    sweep: Optional[SweepResult] = None

    def output_names(self) -> List[str]:
        return [*self.reports, *self.tables]


@dataclass
class OptimizeResult:
    device: PulsedDevice
    p: Tuple[float, float, float]
    report: GateReport
    run: Optional[OptimizationRun] = None
    half_dt_report: Optional[GateReport] = None

    @property
    def converged(self) -> bool:
        return self.run is None or self.run.converged

    @property
    def half_dt_deviation(self) -> Optional[float]:
        if self.half_dt_report is None:
            return None
        return relative_deviation(self.report.gate_error, self.half_dt_report.gate_error)

    def to_dict(self) -> dict:
        return {
            'p': dict(zip(('t_hold', 'omega_c_on', 'omega_q_on'), self.p)),
            'report': self.report.to_dict(),
            'optimization': self.run.to_dict() if self.run else None,
            'half_dt_report': self.half_dt_report.to_dict() if self.half_dt_report else None,
            'half_dt_deviation': self.half_dt_deviation,
            'coupler_idle': self.device.coupler_idle,
            'qubit_idle': self.device.qubit_idle,
        }


def provenance(cfg: ExperimentConfig) -> dict:
    return {'config_hash': config_hash(cfg), 'code_version': __version__, 'dt': cfg.run.dt}


def relative_deviation(value: float, reference: float) -> float:
    scale = max(abs(reference), abs(value), 1e-15)
    return abs(value - reference) / scale


def parallel_map(fn: Callable, items: Sequence, cfg: ExperimentConfig) -> list:
    """Map in a thread pool; results keep the order of ``items``."""
    width = Config.thread_width(min(cfg.run.threads, max(len(items), 1)))
    if width == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=width) as pool:
        return list(pool.map(fn, items))


def report_row(axis: str, value: float, report: GateReport, **extra) -> dict:
    row = {axis: value}
    row.update({
        'eps_leak': report.eps_leak,
        'eps_swap': report.eps_swap,
        'theta': report.theta,
        'fidelity': report.fidelity,
        'cost': report.cost,
        'gate_error': report.gate_error,
        't_hold': report.t_hold,
        't_gate': report.t_gate,
    })
    row.update(extra)
    return row


def run_optimize(cfg: ExperimentConfig, device: Optional[PulsedDevice] = None) -> OptimizeResult:
    """Optimize p (or take ``pulse.fixed``) and score the gate there, with a half-dt spot check."""
    device = device or three_mode_device(cfg)
    run = None
    if cfg.pulse.fixed is not None:
        p = tuple(float(x) for x in cfg.pulse.fixed)
        logger.info(f"using fixed pulse parameters {p}")
    else:
        run = minimize(device.cost_function(), optimizer_config(cfg, device))
        p = run.best_p
    report = score(device.system(p), device.labels)

    half = None
    if cfg.run.half_dt_check:
        half = score(device.system(p, dt=0.5 * device.dt), device.labels)
        deviation = relative_deviation(report.gate_error, half.gate_error)
        if deviation > HALF_DT_TOLERANCE:
            logger.warning(f"half-dt spot check deviates by {deviation:.1%}: gate error "
                           f"{report.gate_error:.3e} at dt={device.dt} vs {half.gate_error:.3e} at dt={device.dt / 2}")
    logger.info(f"gate at t_hold={p[0]:.4f} ns: infidelity {report.infidelity:.3e}, leak {report.eps_leak:.3e}, "
                f"swap {report.eps_swap:.3e}, theta {report.theta:.6f}")
    return OptimizeResult(device=device, p=p, report=report, run=run, half_dt_report=half)


def hold_values(cfg: ExperimentConfig, center: float) -> np.ndarray:
    scenario = cfg.scenario
    if scenario.hold_range is not None:
        lo, hi = scenario.hold_range
    else:
        lo, hi = max(center - 0.5 * scenario.hold_span, 0.0), center + 0.5 * scenario.hold_span
    return np.linspace(lo, hi, scenario.hold_points)


def sweep_hold(cfg: ExperimentConfig, device: PulsedDevice, p: Sequence[float]) -> SweepResult:
    _, coupler_on, qubit_on = p

    def point(hold):
        return report_row('t_hold', float(hold), score(device.system((hold, coupler_on, qubit_on)), device.labels))

    rows = parallel_map(point, list(hold_values(cfg, p[0])), cfg)
    return SweepResult(axis='t_hold', rows=rows, provenance=provenance(cfg))


def run_cz_demo(cfg: ExperimentConfig) -> ScenarioOutcome:
    result = run_optimize(cfg)
    sweep = sweep_hold(cfg, result.device, result.p)
    outcome = ScenarioOutcome(name="cz-demo", converged=result.converged, report=result.report, sweep=sweep)
    outcome.reports['cz_demo_report.json'] = result.to_dict()
    outcome.tables['cz_demo_sweep.csv'] = sweep.to_frame()
    if result.run is not None:
        outcome.tables['cz_demo_trace.csv'] = result.run.trace_frame()
    if cfg.scenario.timeseries:
        outcome.tables['cz_demo_timeseries.csv'] = time_series(
            result.device.system(result.p), (1, 1, 0), TRACKED_STATES, cfg.scenario.timeseries_stride)
    return outcome


def run_sweep_hold(cfg: ExperimentConfig) -> ScenarioOutcome:
    result = run_optimize(cfg)
    sweep = sweep_hold(cfg, result.device, result.p)
    outcome = ScenarioOutcome(name="sweep-hold", converged=result.converged, report=result.report, sweep=sweep)
    outcome.reports['sweep_hold_report.json'] = result.to_dict()
    outcome.tables['sweep_hold.csv'] = sweep.to_frame()
    return outcome


def offset_alpha(alpha_1: float, alpha_2: float, delta: float) -> float:
    """alpha_2 with |alpha_2| = |alpha_1| - delta, keeping its sign."""
    magnitude = abs(alpha_1) - delta
    if magnitude < 0:
        raise ParameterDomainError(f"offset {delta} exceeds |alpha_1| = {abs(alpha_1)}")
    return math.copysign(magnitude, alpha_2)


def run_sweep_delta(cfg: ExperimentConfig) -> ScenarioOutcome:
    """Re-optimize the gate for each anharmonicity offset applied to qubit 2."""
    base = mode_params(cfg)
    deltas = sorted(cfg.scenario.deltas)

    def point(delta):
        params = base.with_(alpha_2=offset_alpha(base.alpha_1, base.alpha_2, delta))
        result = run_optimize(cfg, three_mode_device(cfg, params))
        row = report_row('delta', delta, result.report, converged=result.converged,
                         omega_c_on=result.p[1], omega_q_on=result.p[2])
        return row, result

    results = parallel_map(point, deltas, cfg)
    rows = [row for row, _ in results]
    durations = [row['t_gate'] for row in rows]
    increasing = all(b > a for a, b in zip(durations, durations[1:]))
    if not increasing:
        logger.warning(f"optimized gate duration is not increasing with delta: "
                       + ", ".join(f"{d * 1e3:.0f} MHz -> {t:.3f} ns" for d, t in zip(deltas, durations)))

    sweep = SweepResult(axis='delta', rows=rows, provenance=provenance(cfg))
    outcome = ScenarioOutcome(name="sweep-delta", converged=all(r.converged for _, r in results), sweep=sweep)
    outcome.reports['sweep_delta_report.json'] = {
        'duration_increasing': increasing,
        'points': {f"{d:.6f}": r.to_dict() for d, (_, r) in zip(deltas, results)},
    }
    outcome.tables['sweep_delta.csv'] = sweep.to_frame()
    return outcome


def lattice_reports(device: PulsedDevice, p: Sequence[float], states: Sequence[str],
                    cfg: ExperimentConfig) -> Dict[str, GateReport]:
    """One propagation of all spectator cases, scored per case."""
    system = device.system(p)
    labels = {state: spectator_labels(state) for state in states}
    flat = [label for state in states for label in labels[state]]
    evolved = evolve_states(system, flat, method="krylov")
    defect = max(abs(s.norm - 1.0) for s in evolved)
    hold = schedule_hold(system)

    def case(k):
        state = states[k]
        m = block_from_states(evolved[4 * k:4 * k + 4], labels[state])
        return report_from_block(m, system.t_gate, system.dt, defect, t_hold=hold)

    reports = parallel_map(case, list(range(len(states))), cfg)
    return dict(zip(states, reports))


def run_spectator(cfg: ExperimentConfig) -> ScenarioOutcome:
    isolated = run_optimize(cfg)
    p = isolated.p
    states = list(cfg.scenario.spectator_states)
    params = isolated.device.params

    device = lattice_device(cfg, params, coupler_idle=isolated.device.coupler_idle)
    reports = lattice_reports(device, p, states, cfg)
    rows = [report_row('spectator', state, reports[state]) for state in states]

    if cfg.lattice.check_cutoff:
        wider = lattice_device(cfg, params, max_excitations=cfg.lattice.max_excitations + 1,
                               coupler_idle=isolated.device.coupler_idle)
        wider_reports = lattice_reports(wider, p, states, cfg)
        for row, state in zip(rows, states):
            value, check = reports[state].gate_error, wider_reports[state].gate_error
            row['gate_error_cutoff_plus_one'] = check
            if relative_deviation(value, check) > CUTOFF_TOLERANCE:
                logger.warning(f"spectators {state}: gate error {value:.3e} at cutoff {cfg.lattice.max_excitations} "
                               f"vs {check:.3e} at cutoff {cfg.lattice.max_excitations + 1}")

    control = None
    if cfg.lattice.control_run:
        decoupled = lattice_device(cfg, params, spectator_scale=0.0, coupler_idle=isolated.device.coupler_idle)
        control = lattice_reports(decoupled, p, states, cfg)
        for row, state in zip(rows, states):
            row['gate_error_decoupled'] = control[state].gate_error
        spread = max(r.gate_error for r in control.values()) - min(r.gate_error for r in control.values())
        logger.info(f"decoupled-spectator control: error spread {spread:.2e}")

    worst = max(r.gate_error for r in reports.values())
    logger.info(f"spectator study: worst gate error {worst:.3e}, isolated {isolated.report.gate_error:.3e}")
    outcome = ScenarioOutcome(name="spectator", converged=isolated.converged, report=isolated.report)
    outcome.reports['spectator_report.json'] = {
        'isolated': isolated.to_dict(),
        'lattice_dimension': device.model.dimension,
        'cases': {state: reports[state].to_dict() for state in states},
        'decoupled': {state: control[state].to_dict() for state in states} if control else None,
        'worst_gate_error': worst,
    }
    outcome.tables['spectator.csv'] = pd.DataFrame(rows)
    return outcome


def bare_energy(model, occupation) -> float:
    return float(np.real(model.matrix[model.state_index(occupation), model.state_index(occupation)]) / (2 * math.pi))


def run_spectrum(cfg: ExperimentConfig) -> ScenarioOutcome:
    device = three_mode_device(cfg)
    params = device.params
    if cfg.pulse.fixed is not None:
        _, coupler_on, qubit_on = cfg.pulse.fixed
    else:
        qubit_on = cfg.pulse.qubit_on or params.omega_2 - params.alpha_1
        coupler_on = cfg.pulse.coupler_on or device.coupler_idle
    points = {
        'idle': {'q1': device.qubit_idle, 'c': device.coupler_idle},
        'work': {'q1': qubit_on, 'c': coupler_on},
    }

    rows = []
    detunings = {}
    for point, frequencies in points.items():
        model = device.model.with_frequencies(frequencies)
        for energy, label in dressed_spectrum(model):
            rows.append({
                'point': point,
                'eigenindex': label.eigenindex,
                'energy': energy,
                'label': "".join(map(str, label.occupation)) if label.occupation else "",
                'overlap': label.overlap,
                'hybridized': label.hybridized,
            })
        e110 = bare_energy(model, (1, 1, 0))
        detunings[point] = {
            'E110_minus_E200': e110 - bare_energy(model, (2, 0, 0)),
            'E110_minus_E020': e110 - bare_energy(model, (0, 2, 0)),
        }
    logger.info(f"work-point bare detunings (GHz): {detunings['work']}")

    outcome = ScenarioOutcome(name="spectrum")
    outcome.reports['spectrum_report.json'] = {
        'points': points,
        'bare_detunings': detunings,
        'modes': params.to_dict(),
    }
    outcome.tables['spectrum.csv'] = pd.DataFrame(rows)
    return outcome


def run_rabi(cfg: ExperimentConfig) -> ScenarioOutcome:
    """|110> return period with both two-photon paths resonant against the single-path case."""
    params = mode_params(cfg)
    omega_1 = params.omega_2 - params.alpha_1
    t_max = cfg.scenario.rabi_t_max
    engineered = rabi_model(omega_1, params.omega_2, params.alpha_1, params.alpha_2, params.g_12)
    single = rabi_model(omega_1, params.omega_2, params.alpha_1, -abs(params.alpha_1), params.g_12)
    b_state = BSuperposition((2, 0), (0, 2))

    engineered_period = oscillation_period(engineered, (1, 1), t_max)
    single_period = oscillation_period(single, (1, 1), t_max)
    ratio = engineered_period / single_period
    logger.info(f"return period {engineered_period:.4f} ns (engineered) vs {single_period:.4f} ns "
                f"(single path), ratio {ratio:.5f}")

    times = np.linspace(0.0, t_max, 1001)
    outcome = ScenarioOutcome(name="rabi")
    outcome.reports['rabi_report.json'] = {
        'engineered_period': engineered_period,
        'single_path_period': single_period,
        'ratio': ratio,
        'expected_ratio': 1.0 / math.sqrt(2.0),
        'coupling_to_b': effective_coupling(engineered, (1, 1), b_state),
        'coupling_to_200': effective_coupling(single, (1, 1), (2, 0)),
    }
    outcome.tables['rabi.csv'] = pd.DataFrame({
        't': times,
        'P_110_engineered': return_probability(engineered, (1, 1), times),
        'P_110_single_path': return_probability(single, (1, 1), times),
    })
    return outcome


def run_quantize(cfg: ExperimentConfig) -> ScenarioOutcome:
    """Circuit-derived mode parameters next to the reference mode values."""
    circuit_section = cfg.device.circuit
    if circuit_section is not None:
        circuit = circuit_section.to_params()
        if circuit_section.calibrate:
            circuit = calibrate_capacitances(circuit, circuit_section.targets)
        alpha_coupler = circuit_section.alpha_coupler
    else:
        circuit = reference_circuit()
        alpha_coupler = REFERENCE_MODES.alpha_c
    derived = derive_mode_params(circuit, alpha_coupler)

    compared = ('omega_1', 'omega_2', 'alpha_1', 'alpha_2', 'g_12', 'g_1c', 'g_2c')
    rows = [{
        'parameter': name,
        'derived': getattr(derived, name),
        'reference': getattr(REFERENCE_MODES, name),
        'difference': getattr(derived, name) - getattr(REFERENCE_MODES, name),
    } for name in compared]

    ej_work = transmon_ej_for_frequency(circuit.ec_1, REFERENCE_MODES.omega_1)
    work_point = {'ej_1': ej_work}
    try:
        work_point['flux_1'] = flux_for_ej(circuit.ej_sum_1, circuit.d_1, ej_work)
    except ValueError as e:
        logger.warning(f"qubit 1 cannot be flux-tuned to {REFERENCE_MODES.omega_1} GHz: {e}")
        work_point['flux_1'] = None

    outcome = ScenarioOutcome(name="quantize")
    outcome.reports['quantize_report.json'] = {
        'circuit': circuit.to_dict(),
        'derived': derived.to_dict(),
        'reference': REFERENCE_MODES.to_dict(),
        'work_point': work_point,
    }
    outcome.tables['quantize.csv'] = pd.DataFrame(rows)
    return outcome


def run_optimize_scenario(cfg: ExperimentConfig) -> ScenarioOutcome:
    result = run_optimize(cfg)
    outcome = ScenarioOutcome(name="optimize", converged=result.converged, report=result.report)
    outcome.reports['optimize_report.json'] = result.to_dict()
    if result.run is not None:
        outcome.tables['optimize_trace.csv'] = result.run.trace_frame()
    return outcome


SCENARIO_RUNNERS: Dict[str, Callable[[ExperimentConfig], ScenarioOutcome]] = {
    'cz-demo': run_cz_demo,
    'sweep-hold': run_sweep_hold,
    'sweep-delta': run_sweep_delta,
    'spectator': run_spectator,
    'optimize': run_optimize_scenario,
    'spectrum': run_spectrum,
    'rabi': run_rabi,
    'quantize': run_quantize,
}


SCENARIO_OUTPUTS: Dict[str, Tuple[str, ...]] = {
    'cz-demo': ('cz_demo_report.json', 'cz_demo_sweep.csv', 'cz_demo_trace.csv', 'cz_demo_timeseries.csv'),
    'sweep-hold': ('sweep_hold_report.json', 'sweep_hold.csv'),
    'sweep-delta': ('sweep_delta_report.json', 'sweep_delta.csv'),
    'spectator': ('spectator_report.json', 'spectator.csv'),
    'optimize': ('optimize_report.json', 'optimize_trace.csv'),
    'spectrum': ('spectrum_report.json', 'spectrum.csv'),
    'rabi': ('rabi_report.json', 'rabi.csv'),
    'quantize': ('quantize_report.json', 'quantize.csv'),
}


def expected_outputs(name: str) -> Tuple[str, ...]:
    """Every file a scenario may write, for checking conflicts before a long run."""
    return SCENARIO_OUTPUTS.get(name, ())


def run_scenario(name: str, cfg: ExperimentConfig) -> ScenarioOutcome:
    try:
        runner = SCENARIO_RUNNERS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIO_RUNNERS)}") from None
    logger.info(f"Running scenario {name}")
    return runner(cfg)


def persist(outcome: ScenarioOutcome, writer: ResultWriter) -> List:
    """Write every report and table; refuses before writing anything on a hash conflict."""
    writer.check(outcome.output_names())
    paths = []
    for name, payload in outcome.reports.items():
        paths.append(writer.write_json(name, {'scenario': outcome.name, 'converged': outcome.converged, **payload}))
    for name, frame in outcome.tables.items():
        paths.append(writer.write_csv(name, frame))
    return paths

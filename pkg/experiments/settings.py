"""
Experiment configuration: one JSON document validated with pydantic.
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.errors import ConfigError
from simulation.model import CouplingForm
from simulation.quantize import REFERENCE_MODES, CircuitParams, ModeParams

logger = logging.getLogger(__name__)

SCENARIOS = ("cz-demo", "sweep-hold", "sweep-delta", "spectator", "optimize", "spectrum", "rabi", "quantize")
ScenarioName = Literal["cz-demo", "sweep-hold", "sweep-delta", "spectator", "optimize", "spectrum", "rabi", "quantize"]
SpectatorState = Literal["00", "01", "10", "11"]
Interval = Tuple[float, float]


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModeSection(Section):
    """Mode-level parameters; defaults are the reference three-mode device."""
    omega_1: float = Field(REFERENCE_MODES.omega_1, gt=0)
    omega_2: float = Field(REFERENCE_MODES.omega_2, gt=0)
    omega_c: float = Field(REFERENCE_MODES.omega_c, gt=0)
    alpha_1: float = REFERENCE_MODES.alpha_1
    alpha_2: float = REFERENCE_MODES.alpha_2
    alpha_c: float = REFERENCE_MODES.alpha_c
    g_12: float = Field(REFERENCE_MODES.g_12, ge=0)
    g_1c: float = Field(REFERENCE_MODES.g_1c, ge=0)
    g_2c: float = Field(REFERENCE_MODES.g_2c, ge=0)

    def to_params(self) -> ModeParams:
        return ModeParams(**self.model_dump())


class CircuitSection(Section):
    ec_1: float = Field(gt=0)
    ec_2: float = Field(gt=0)
    ec_c: float = Field(gt=0)
    ej_sum_1: float = Field(gt=0)
    ej_sum_c: float = Field(gt=0)
    d_1: float = Field(ge=-1, le=1)
    d_c: float = Field(ge=-1, le=1)
    ej_2: float = Field(gt=0)
    el_2: float = Field(gt=0)
    flux_1: float = 0.0
    flux_2: float = 0.5
    flux_c: float = 0.0
    c_1: float = Field(gt=0)
    c_2: float = Field(gt=0)
    c_c: float = Field(gt=0)
    c_1c: float = Field(0.0, ge=0)
    c_2c: float = Field(0.0, ge=0)
    c_12: float = Field(0.0, ge=0)
    calibrate: bool = False
    targets: Tuple[float, float, float] = (0.010, 0.100, 0.100)
    alpha_coupler: Optional[float] = None

    @model_validator(mode="after")
    def check_single_well(self):
        if self.el_2 <= self.ej_2:
            raise ValueError(f"el_2 must exceed ej_2 (single-well IST), got el_2={self.el_2}, ej_2={self.ej_2}")
        return self

    def to_params(self) -> CircuitParams:
        data = self.model_dump(exclude={'calibrate', 'targets', 'alpha_coupler'})
        return CircuitParams(**data)


class DeviceSection(Section):
    modes: Optional[ModeSection] = None
    circuit: Optional[CircuitSection] = None
    levels: int = Field(4, ge=2, le=6)
    form: CouplingForm = CouplingForm.FULL

    @model_validator(mode="after")
    def exactly_one_source(self):
        if (self.modes is None) == (self.circuit is None):
            raise ValueError("device needs exactly one of 'modes' or 'circuit'")
        return self


class PulseSection(Section):
    sigma: float = Field(2.0, gt=0)
    qubit_idle: float = Field(4.60, gt=0)
    coupler_idle: Optional[float] = Field(None, gt=0)
    decoupling_window: Interval = (5.0, 7.0)
    t_hold: float = Field(20.0, ge=0)
    qubit_on: Optional[float] = Field(None, gt=0)
    coupler_on: Optional[float] = Field(None, gt=0)
    coupler_seeds: Optional[List[float]] = None
    hold_bounds: Interval = (5.0, 40.0)
    qubit_bounds: Optional[Interval] = None
    coupler_bounds: Optional[Interval] = None
    fixed: Optional[Tuple[float, float, float]] = None
    tol_f: float = Field(1e-9, gt=0)
    tol_x: Tuple[float, float, float] = (1e-4, 1e-6, 1e-6)
    max_iterations: int = Field(1000, ge=1)
    target_cost: Optional[float] = Field(1e-7, gt=0)
    restarts: int = Field(3, ge=0)

    @model_validator(mode="after")
    def check_intervals(self):
        for name in ('decoupling_window', 'hold_bounds', 'qubit_bounds', 'coupler_bounds'):
            interval = getattr(self, name)
            if interval is not None and not interval[0] < interval[1]:
                raise ValueError(f"{name} must be an increasing pair, got {interval}")
        if self.hold_bounds[0] < 0:
            raise ValueError("hold_bounds must be nonnegative")
        return self


class ScenarioSection(Section):
    name: ScenarioName = "cz-demo"
    deltas: List[float] = [0.0, 0.010, 0.020]
    hold_span: float = Field(6.0, gt=0)
    hold_range: Optional[Tuple[float, float]] = None
    hold_points: int = Field(25, ge=2)
    spectator_states: List[SpectatorState] = ["00", "01", "10", "11"]
    timeseries: bool = False
    timeseries_stride: int = Field(10, ge=1)
    rabi_t_max: float = Field(100.0, gt=0)


class RunSection(Section):
    dt: float = Field(0.01, gt=0)
    threads: int = Field(4, ge=1)
    output_dir: Optional[str] = None
    half_dt_check: bool = True


class LatticeSection(Section):
    spectator_1: Tuple[float, float] = (4.70, -0.25)
    spectator_2: Tuple[float, float] = (4.05, -0.25)
    qubit_levels: int = Field(3, ge=2, le=6)
    coupler_levels: int = Field(2, ge=2, le=6)
    max_excitations: int = Field(4, ge=2)
    spectator_coupling_scale: float = Field(1.0, ge=0)
    check_cutoff: bool = True
    control_run: bool = True


class ExperimentConfig(Section):
    device: DeviceSection = DeviceSection(modes=ModeSection())
    pulse: PulseSection = PulseSection()
    scenario: ScenarioSection = ScenarioSection()
    run: RunSection = RunSection()
    lattice: LatticeSection = LatticeSection()

    def with_overrides(self, **changes) -> 'ExperimentConfig':
        """Copy with dotted-path overrides, e.g. ``run__dt=0.005``; the result is revalidated."""
        data = self.model_dump(mode="json")
        for key, value in changes.items():
            node = data
            *path, leaf = key.split("__")
            for part in path:
                node = node.get(part) if isinstance(node, dict) else None
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} does not name a config section")
            node[leaf] = value
        return validate_config(data)


def validate_config(data: Union[dict, str]) -> ExperimentConfig:
    try:
        if isinstance(data, str):
            return ExperimentConfig.model_validate_json(data)
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment config: {e}") from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    cfg = validate_config(text)
    logger.info(f"Loaded config {path} (hash {config_hash(cfg)[:12]})")
    return cfg


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()

"""
Deterministic bounded Nelder-Mead simplex search.

Points that step outside the box are folded back in by reflection at the
walls, so every evaluated point lies inside the bounds.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.errors import ConfigError

logger = logging.getLogger(__name__)

REFLECTION = 1.0
EXPANSION = 2.0
CONTRACTION = 0.5
SHRINK = 0.5


@dataclass(frozen=True)
class NelderMeadConfig:
    """Search settings.

    ``tol_x`` is per coordinate (a scalar applies to all). ``seed_axis`` and
    ``seed_values`` optionally scan one coordinate before the simplex starts;
    the best seed replaces that coordinate of ``p0``.
    ``target_cost`` (optional) is the cost a converged run must reach;
    ``restarts`` bounds the fresh simplices started from the best point
    while it is missed. ``max_iterations`` counts across restarts.
    """
    p0: Tuple[float, ...]
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    tol_f: float = 1e-9
    tol_x: Tuple[float, ...] = (1e-9,)
    max_iterations: int = 400
    simplex_scale: float = 0.05
    names: Optional[Tuple[str, ...]] = None
    seed_axis: Optional[int] = None
    seed_values: Tuple[float, ...] = ()
    target_cost: Optional[float] = None
    restarts: int = 0

    def __post_init__(self):
        n = len(self.p0)
        if n == 0:
            raise ConfigError("p0 must have at least one coordinate")
        if len(self.lower) != n or len(self.upper) != n:
            raise ConfigError(f"bounds must have {n} entries each")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ConfigError(f"lower bounds {self.lower} exceed upper bounds {self.upper}")
        if any(not lo <= x <= hi for x, lo, hi in zip(self.p0, self.lower, self.upper)):
            raise ConfigError(f"p0={self.p0} lies outside the bounds")
        if len(self.tol_x) not in (1, n):
            raise ConfigError(f"tol_x must have 1 or {n} entries, got {len(self.tol_x)}")
        if self.names is not None and len(self.names) != n:
            raise ConfigError(f"names must have {n} entries")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be positive")
        if self.seed_axis is not None and not 0 <= self.seed_axis < n:
            raise ConfigError(f"seed_axis {self.seed_axis} out of range")
        if not 0 < self.simplex_scale <= 1:
            raise ConfigError(f"simplex_scale must lie in (0, 1], got {self.simplex_scale}")
        if self.restarts < 0:
            raise ConfigError(f"restarts must be nonnegative, got {self.restarts}")
        if self.target_cost is not None and not self.target_cost > 0:
            raise ConfigError(f"target_cost must be positive, got {self.target_cost}")

    @property
    def dimension(self) -> int:
        return len(self.p0)

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return self.names or tuple(f"p{i}" for i in range(self.dimension))

    def tolerance_x(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.tol_x, dtype=float), (self.dimension,)).copy()

    def reaches_target(self, cost: float) -> bool:
        return self.target_cost is None or cost <= self.target_cost


@dataclass
class OptimizationRun:
    config: NelderMeadConfig
    trace: List[Tuple[int, Tuple[float, ...], float]] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    stop_reason: str = ""
    best_p: Tuple[float, ...] = ()
    best_cost: float = math.inf

    @property
    def evaluations(self) -> int:
        return len(self.trace)

    def record(self, iteration: int, p: np.ndarray, cost: float):
        point = tuple(float(x) for x in p)
        self.trace.append((iteration, point, float(cost)))
        if cost < self.best_cost or not self.best_p:
            self.best_cost = float(cost)
            self.best_p = point

    def running_best(self) -> np.ndarray:
        return np.minimum.accumulate([cost for _, _, cost in self.trace])

    def trace_frame(self) -> pd.DataFrame:
        names = self.config.parameter_names
        rows = []
        for iteration, p, cost in self.trace:
            row = {'iteration': iteration}
            row.update(dict(zip(names, p)))
            row['cost'] = cost
            rows.append(row)
        return pd.DataFrame(rows, columns=['iteration', *names, 'cost'])

    def to_dict(self) -> dict:
        return {
            'p0': list(self.config.p0),
            'lower': list(self.config.lower),
            'upper': list(self.config.upper),
            'names': list(self.config.parameter_names),
            'tol_f': self.config.tol_f,
            'tol_x': list(self.config.tol_x),
            'max_iterations': self.config.max_iterations,
            'target_cost': self.config.target_cost,
            'restarts': self.config.restarts,
            'converged': self.converged,
            'stop_reason': self.stop_reason,
            'iterations': self.iterations,
            'evaluations': self.evaluations,
            'best_p': list(self.best_p),
            'best_cost': self.best_cost,
        }


def fold_into_bounds(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Reflect coordinates at the walls until they land inside [lower, upper]."""
    width = upper - lower
    safe = np.where(width > 0, width, 1.0)
    y = np.mod(x - lower, 2.0 * safe)
    y = np.where(y > safe, 2.0 * safe - y, y)
    return np.where(width > 0, lower + y, lower)


def initial_simplex(p0: np.ndarray, lower: np.ndarray, upper: np.ndarray, scale: float) -> np.ndarray:
    n = len(p0)
    simplex = np.tile(p0, (n + 1, 1))
    for i in range(n):
        step = scale * (upper[i] - lower[i])
        if step == 0:
            step = scale * max(abs(p0[i]), 1.0)
        simplex[i + 1, i] = p0[i] + step if p0[i] + step <= upper[i] else p0[i] - step
    return fold_into_bounds(simplex, lower, upper)


def best_seed(f: Callable[[Sequence[float]], float], p0: Sequence[float], axis: int,
              values: Sequence[float], run: Optional[OptimizationRun] = None) -> Tuple[np.ndarray, float]:
    """Evaluate p0 with coordinate ``axis`` set to each value; first best wins ties."""
    best_p, best_cost = np.asarray(p0, dtype=float), math.inf
    for value in values:
        p = np.array(p0, dtype=float)
        p[axis] = value
        cost = f(p)
        if run is not None:
            run.record(0, p, cost)
        logger.info(f"seed {axis}={value:.6f}: cost {cost:.3e}")
        if cost < best_cost:
            best_p, best_cost = p, cost
    return best_p, best_cost


def minimize(f: Callable[[Sequence[float]], float], config: NelderMeadConfig) -> OptimizationRun:
    """Nelder-Mead with reflection 1, expansion 2, contraction 0.5 and shrink 0.5.

    A pass stops when the cost spread over the simplex drops below ``tol_f``
    or every coordinate extent of the simplex is within ``tol_x``. When a
    ``target_cost`` is set and the best cost is still above it, the search
    restarts from the best point with a fresh simplex, up to ``restarts``
    times. ``converged`` is False at the iteration cap and whenever the
    target is missed.
    """
    lower = np.asarray(config.lower, dtype=float)
    upper = np.asarray(config.upper, dtype=float)
    tol_x = config.tolerance_x()
    run = OptimizationRun(config=config)

    def evaluate(x, iteration):
        x = fold_into_bounds(np.asarray(x, dtype=float), lower, upper)
        cost = float(f(x))
        if math.isnan(cost):
            cost = math.inf
        run.record(iteration, x, cost)
        return x, cost

    p0 = np.asarray(config.p0, dtype=float)
    if config.seed_axis is not None and config.seed_values:
        seeds = fold_into_bounds(np.asarray(config.seed_values, dtype=float),
                                 lower[config.seed_axis], upper[config.seed_axis])
        p0, _ = best_seed(lambda p: evaluate(p, 0)[1], p0, config.seed_axis, seeds)

    iteration = 0
    passes = 0
    while True:
        iteration, reason = simplex_pass(evaluate, p0, lower, upper, tol_x, config, iteration)
        passes += 1
        if reason == "iteration cap" or config.reaches_target(run.best_cost) or passes > config.restarts:
            break
        logger.info(f"simplex collapsed ({reason}) at cost {run.best_cost:.3e}, above the target "
                    f"{config.target_cost:.1e}; restart {passes} of {config.restarts}")
        p0 = np.asarray(run.best_p, dtype=float)

    run.iterations = iteration
    if reason == "iteration cap":
        run.stop_reason = reason
        logger.warning(f"Nelder-Mead hit the iteration cap ({config.max_iterations}) without converging; "
                       f"best cost {run.best_cost:.3e}")
    elif not config.reaches_target(run.best_cost):
        run.stop_reason = f"{reason}, above target"
        logger.warning(f"Nelder-Mead stopped ({reason}) after {passes} passes with best cost "
                       f"{run.best_cost:.3e}, above the target {config.target_cost:.1e}")
    else:
        run.converged, run.stop_reason = True, reason
        logger.info(f"Nelder-Mead converged after {iteration} iterations ({reason}); "
                    f"best cost {run.best_cost:.3e}")
    return run


def simplex_pass(evaluate, p0: np.ndarray, lower: np.ndarray, upper: np.ndarray, tol_x: np.ndarray,
                 config: NelderMeadConfig, iteration: int) -> Tuple[int, str]:
    """One simplex search from ``p0``; returns the iteration counter and the stop reason."""
    simplex = initial_simplex(p0, lower, upper, config.simplex_scale)
    costs = np.empty(len(simplex))
    for k in range(len(simplex)):
        simplex[k], costs[k] = evaluate(simplex[k], iteration)

    while True:
        order = np.argsort(costs, kind='stable')
        simplex, costs = simplex[order], costs[order]

        spread = float(np.max(np.abs(costs - costs[0]))) if np.all(np.isfinite(costs)) else math.inf
        extent = np.max(np.abs(simplex - simplex[0]), axis=0)
        if spread < config.tol_f:
            return iteration, "cost spread"
        if np.all(extent <= tol_x):
            return iteration, "simplex size"
        if iteration >= config.max_iterations:
            return iteration, "iteration cap"
        iteration += 1

        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        xr, fr = evaluate(centroid + REFLECTION * (centroid - worst), iteration)

        if costs[0] <= fr < costs[-2]:
            simplex[-1], costs[-1] = xr, fr
            continue

        if fr < costs[0]:
            xe, fe = evaluate(centroid + EXPANSION * (xr - centroid), iteration)
            if fe < fr:
                simplex[-1], costs[-1] = xe, fe
            else:
                simplex[-1], costs[-1] = xr, fr
            continue

        if fr < costs[-1]:
            xc, fc = evaluate(centroid + CONTRACTION * (xr - centroid), iteration)
            accepted = fc <= fr
        else:
            xc, fc = evaluate(centroid - CONTRACTION * (centroid - worst), iteration)
            accepted = fc < costs[-1]
        if accepted:
            simplex[-1], costs[-1] = xc, fc
            continue

        for k in range(1, len(simplex)):
            simplex[k], costs[k] = evaluate(simplex[0] + SHRINK * (simplex[k] - simplex[0]), iteration)

"""
Circuit quantization: raw circuit energies -> mode-level parameters.

Energies and frequencies are linear frequencies in GHz (h = 1), capacitances
in fF, flux biases in units of the flux quantum.
"""
import logging
import math
from dataclasses import dataclass, replace, fields
from typing import Optional, Tuple

from scipy import constants
from scipy.optimize import bisect

from core.errors import ParameterDomainError, SingleWellViolationError

logger = logging.getLogger(__name__)

# e^2 / h expressed in GHz * fF
E2_OVER_H_GHZ_FF = constants.e ** 2 / constants.h / 1e-15 / 1e9

TRANSMON_REGIME_RATIO = 20.0


@dataclass(frozen=True)
class CircuitParams:
    ec_1: float
    ec_2: float
    ec_c: float
    ej_sum_1: float
    ej_sum_c: float
    d_1: float
    d_c: float
    ej_2: float
    el_2: float
    flux_1: float
    flux_2: float
    flux_c: float
    c_1: float
    c_2: float
    c_c: float
    c_1c: float
    c_2c: float
    c_12: float

    def __post_init__(self):
        for name in ('ec_1', 'ec_2', 'ec_c', 'ej_sum_1', 'ej_sum_c', 'ej_2', 'el_2'):
            if not getattr(self, name) > 0:
                raise ParameterDomainError(f"{name} must be strictly positive, got {getattr(self, name)}")
        for name in ('d_1', 'd_c'):
            if abs(getattr(self, name)) > 1:
                raise ParameterDomainError(f"|{name}| must be <= 1, got {getattr(self, name)}")
        for name in ('c_1', 'c_2', 'c_c'):
            if not getattr(self, name) > 0:
                raise ParameterDomainError(f"{name} must be strictly positive, got {getattr(self, name)}")
        for name in ('c_1c', 'c_2c', 'c_12'):
            if getattr(self, name) < 0:
                raise ParameterDomainError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.el_2 <= self.ej_2:
            raise SingleWellViolationError(
                f"IST needs el_2 > ej_2 for a single-well potential (el_2={self.el_2}, ej_2={self.ej_2})")

    def with_(self, **changes) -> 'CircuitParams':
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class ModeParams:
    """Mode frequencies, anharmonicities and coupling magnitudes (GHz).

    The couplings are stored as magnitudes; ``coupling_sign`` records the
    common sign produced by the circuit formulas and is not applied. Only
    flipping both coupler legs together is a gauge change: a common sign
    of -1 on all three equals flipping g_12 alone.
    """
    omega_1: float
    omega_2: float
    omega_c: float
    alpha_1: float
    alpha_2: float
    alpha_c: float
    g_12: float
    g_1c: float
    g_2c: float
    coupling_sign: int = -1

    def __post_init__(self):
        for name in ('omega_1', 'omega_2', 'omega_c'):
            if not getattr(self, name) > 0:
                raise ParameterDomainError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ('g_12', 'g_1c', 'g_2c'):
            if getattr(self, name) < 0:
                raise ParameterDomainError(f"{name} is stored as a magnitude, got {getattr(self, name)}")
        if self.coupling_sign not in (-1, 1):
            raise ParameterDomainError(f"coupling_sign must be +1 or -1, got {self.coupling_sign}")

    def with_(self, **changes) -> 'ModeParams':
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# Reference work-point device (transmon at 4.50 GHz, IST at 4.25 GHz). The coupler
# frequency is a placeholder; runs replace it with the decoupling point.
REFERENCE_MODES = ModeParams(
    omega_1=4.50, omega_2=4.25, omega_c=6.0,
    alpha_1=-0.250, alpha_2=0.250, alpha_c=-0.200,
    g_12=0.010, g_1c=0.100, g_2c=0.100,
)


def tunable_ej(ej_sum: float, d: float, flux: float) -> float:
    """Effective Josephson energy of an asymmetric SQUID at ``flux`` (units of flux quantum)."""
    if not ej_sum > 0:
        raise ParameterDomainError(f"ej_sum must be positive, got {ej_sum}")
    if abs(d) > 1:
        raise ParameterDomainError(f"junction asymmetry |d| must be <= 1, got {d}")
    phase = math.pi * flux
    return ej_sum * math.sqrt(math.cos(phase) ** 2 + d ** 2 * math.sin(phase) ** 2)


def flux_for_ej(ej_sum: float, d: float, ej: float) -> float:
    """Flux in [0, 0.5] at which ``tunable_ej`` equals ``ej``."""
    if not ej_sum > 0:
        raise ParameterDomainError(f"ej_sum must be positive, got {ej_sum}")
    if abs(d) >= 1:
        raise ParameterDomainError(f"flux is undefined for a fully asymmetric SQUID (d={d})")
    ratio = ej / ej_sum
    if not abs(d) <= ratio <= 1:
        raise ParameterDomainError(
            f"ej={ej} is outside the tunable range [{abs(d) * ej_sum}, {ej_sum}]")
    cos_sq = (ratio ** 2 - d ** 2) / (1 - d ** 2)
    return math.acos(math.sqrt(min(1.0, max(0.0, cos_sq)))) / math.pi


def transmon_modes(ec: float, ej: float) -> Tuple[float, float]:
    """(omega, alpha) of a transmon from the quartic expansion of the cosine."""
    if not ec > 0 or not ej > 0:
        raise ParameterDomainError(f"transmon energies must be positive (ec={ec}, ej={ej})")
    if ej / ec < TRANSMON_REGIME_RATIO:
        logger.warning(f"E_J/E_C = {ej / ec:.1f} is below the transmon regime ({TRANSMON_REGIME_RATIO:.0f})")
    return math.sqrt(8.0 * ec * ej) - ec, -ec


def transmon_ej_for_frequency(ec: float, omega: float) -> float:
    """Josephson energy that puts a transmon at ``omega``."""
    if not ec > 0 or not omega > 0:
        raise ParameterDomainError(f"ec and omega must be positive (ec={ec}, omega={omega})")
    return (omega + ec) ** 2 / (8.0 * ec)


def ist_modes(ec: float, ej: float, el: float) -> Tuple[float, float]:
    """(omega, alpha) of an inductively shunted transmon biased at half flux."""
    if not ec > 0:
        raise ParameterDomainError(f"ec must be positive, got {ec}")
    if ej < 0:
        raise ParameterDomainError(f"ej must be nonnegative, got {ej}")
    if el <= ej:
        raise SingleWellViolationError(f"single-well condition el > ej violated (el={el}, ej={ej})")
    confinement = el - ej
    omega = math.sqrt(8.0 * ec * confinement) + ec * ej / confinement
    alpha = 0.5 * ec * ej / confinement
    return omega, alpha


def capacitance_for_ec(ec: float) -> float:
    """Capacitance (fF) whose charging energy e^2/2C equals ``ec`` (GHz)."""
    if not ec > 0:
        raise ParameterDomainError(f"ec must be positive, got {ec}")
    return E2_OVER_H_GHZ_FF / (2.0 * ec)


def _zpf_ratios(p: CircuitParams) -> Tuple[float, float, float]:
    ej_1 = tunable_ej(p.ej_sum_1, p.d_1, p.flux_1)
    ej_c = tunable_ej(p.ej_sum_c, p.d_c, p.flux_c)
    if ej_1 <= 0 or ej_c <= 0:
        raise ParameterDomainError("tunable junction fully suppressed; zero-point fluctuations diverge")
    return 8.0 * p.ec_1 / ej_1, 8.0 * p.ec_2 / (p.el_2 - p.ej_2), 8.0 * p.ec_c / ej_c


def coupling_strengths(p: CircuitParams, zpf_exponent: float = -0.25) -> Tuple[float, float, float]:
    """Signed (g_12, g_1c, g_2c) in GHz from capacitive charge coupling.

    The charge-coupling prefactors (2e)^2 C_x / (2 C_a C_b) are scaled by the
    product of the two modes' 8 E_C / E_J ratios raised to ``zpf_exponent``.
    """
    if p.c_c <= 0:
        raise ParameterDomainError("coupler capacitance c_c must be positive")
    r_1, r_2, r_c = _zpf_ratios(p)
    prefactor = 2.0 * E2_OVER_H_GHZ_FF

    j_12 = prefactor * (p.c_12 + p.c_1c * p.c_2c / p.c_c) / (p.c_1 * p.c_2)
    j_1c = prefactor * p.c_1c / (p.c_1 * p.c_c)
    j_2c = prefactor * p.c_2c / (p.c_2 * p.c_c)

    g_12 = -j_12 * (r_1 * r_2) ** zpf_exponent
    g_1c = -j_1c * (r_1 * r_c) ** zpf_exponent
    g_2c = -j_2c * (r_2 * r_c) ** zpf_exponent
    return g_12, g_1c, g_2c


def derive_mode_params(p: CircuitParams, alpha_coupler: Optional[float] = None) -> ModeParams:
    """Closed-form ModeParams for the transmon / IST / coupler circuit."""
    if abs(p.flux_2 - 0.5) > 1e-9:
        logger.warning(f"IST closed forms assume half-flux bias; flux_2={p.flux_2} is used as 0.5")
    omega_1, alpha_1 = transmon_modes(p.ec_1, tunable_ej(p.ej_sum_1, p.d_1, p.flux_1))
    omega_2, alpha_2 = ist_modes(p.ec_2, p.ej_2, p.el_2)
    omega_c, alpha_c = transmon_modes(p.ec_c, tunable_ej(p.ej_sum_c, p.d_c, p.flux_c))
    g_12, g_1c, g_2c = coupling_strengths(p)
    signs = {math.copysign(1, g) for g in (g_12, g_1c, g_2c) if g != 0}
    if len(signs) > 1:
        logger.warning("coupling signs differ; recording the sign of g_1c")
    sign = int(math.copysign(1, g_1c)) if g_1c != 0 else -1
    return ModeParams(
        omega_1=omega_1, omega_2=omega_2, omega_c=omega_c,
        alpha_1=alpha_1, alpha_2=alpha_2,
        alpha_c=alpha_c if alpha_coupler is None else alpha_coupler,
        g_12=abs(g_12), g_1c=abs(g_1c), g_2c=abs(g_2c),
        coupling_sign=sign,
    )


def _solve_capacitance(magnitude, target: float, name: str) -> float:
    """Root of magnitude(c) = target on [0, hi], expanding hi until bracketed."""
    if target < 0:
        raise ParameterDomainError(f"{name} target must be nonnegative, got {target}")
    if target == 0:
        return 0.0
    if magnitude(0.0) > target:
        raise ParameterDomainError(f"{name} exceeds its target even with zero capacitance")
    hi = 1.0
    for _ in range(60):
        if magnitude(hi) >= target:
            break
        hi *= 2.0
    else:
        raise ParameterDomainError(f"could not bracket a capacitance for {name}")
    return bisect(lambda c: magnitude(c) - target, 0.0, hi, xtol=1e-12, maxiter=200)


def calibrate_capacitances(p: CircuitParams,
                           targets: Tuple[float, float, float] = (0.010, 0.100, 0.100)) -> CircuitParams:
    """Return ``p`` with c_1c, c_2c, c_12 chosen so |g| hits (g_12, g_1c, g_2c)."""
    g_12_target, g_1c_target, g_2c_target = targets

    c_1c = _solve_capacitance(
        lambda c: abs(coupling_strengths(p.with_(c_1c=c))[1]), g_1c_target, 'g_1c')
    p = p.with_(c_1c=c_1c)
    c_2c = _solve_capacitance(
        lambda c: abs(coupling_strengths(p.with_(c_2c=c))[2]), g_2c_target, 'g_2c')
    p = p.with_(c_2c=c_2c)
    c_12 = _solve_capacitance(
        lambda c: abs(coupling_strengths(p.with_(c_12=c))[0]), g_12_target, 'g_12')
    p = p.with_(c_12=c_12)

    logger.debug(f"calibrated capacitances c_1c={c_1c:.4f} c_2c={c_2c:.4f} c_12={c_12:.4f} fF")
    return p


def reference_circuit() -> CircuitParams:
    """Reference junction energies with capacitances calibrated to g_12 = 10 MHz, g_ic = 100 MHz."""
    base = CircuitParams(
        ec_1=0.221, ec_2=0.228, ec_c=0.200,
        ej_sum_1=14.0, ej_sum_c=24.0, d_1=0.1, d_c=0.1,
        ej_2=14.9, el_2=24.5,
        flux_1=0.0, flux_2=0.5, flux_c=0.0,
        c_1=capacitance_for_ec(0.221), c_2=capacitance_for_ec(0.228), c_c=capacitance_for_ec(0.200),
        c_1c=0.0, c_2c=0.0, c_12=0.0,
    )
    return calibrate_capacitances(base)

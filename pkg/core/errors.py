"""
Exception types raised across czforge.

Each class also derives from the closest builtin so callers that only know
about ValueError / RuntimeError keep working.
"""


class CZForgeError(Exception):
    """Base class for all czforge errors"""


class ParameterDomainError(CZForgeError, ValueError):
    """A physical parameter lies outside the domain of a formula"""


class SingleWellViolationError(ParameterDomainError):
    """Inductively shunted transmon evaluated with E_L <= E_J"""


class InvalidPulseError(ParameterDomainError):
    """Pulse geometry is inconsistent (sigma <= 0 or negative hold time)"""


class ConfigError(CZForgeError, ValueError):
    """Experiment configuration or coupling map is invalid"""


class OutputConflictError(ConfigError):
    """Result file exists and was produced from a different config"""


class LabelingError(CZForgeError, LookupError):
    """A requested dressed state is missing or hybridized"""


class PhaseUndefinedError(CZForgeError, ArithmeticError):
    """Phase requested from an amplitude too small to carry one"""


class IntegrationError(CZForgeError, RuntimeError):
    """Time integration lost unitarity beyond tolerance"""

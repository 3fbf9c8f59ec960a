# Core module for czforge: configuration, errors, version
__version__ = "0.1.0"

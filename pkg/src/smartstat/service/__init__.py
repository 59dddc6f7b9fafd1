"""HTTP service wrapping the core package for one or more units."""

from .app import create_app
from .registry import ServiceConfig, Unit, UnitConfig, UnitRegistry, load_config

__all__ = [
    "create_app",
    "load_config",
    "ServiceConfig",
    "Unit",
    "UnitConfig",
    "UnitRegistry",
]

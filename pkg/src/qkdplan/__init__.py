"""Planning and simulation toolkit for hybrid global QKD networks."""

from . import (  # noqa: F401
    cli,
    config,
    keysim,
    link_models,
    planner,
    relay_protocol,
    satellite_geometry,
)

__version__ = "0.1.0"

"""Exception types shared across the simulator."""


class SimError(Exception):
    """Base class for simulator errors."""


class SceneLoadError(SimError):
    """Mesh file unreadable or malformed (message names the offending element)."""


class ConfigError(SimError):
    """Invalid or incomplete configuration (message names the offending field)."""

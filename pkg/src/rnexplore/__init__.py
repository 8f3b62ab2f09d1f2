"""Graph-based next-best-view exploration for ground robots in voxel worlds."""

from rnexplore.errors import ConfigError, ParseError, ProtocolError

__version__ = "0.1.0"

__all__ = ["ConfigError", "ParseError", "ProtocolError", "__version__"]

"""Grid-forming converter simulator with conventional and virtual-flux current limiting."""

__version__ = "0.1.0"

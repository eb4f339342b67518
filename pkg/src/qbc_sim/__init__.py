"""qbc-sim - Monte Carlo simulator of a practical quantum bit commitment protocol."""

__version__ = "0.1.0"

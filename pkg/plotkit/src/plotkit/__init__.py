"""Figure rendering for samhall experiment artifacts."""

__version__ = "0.1.0"

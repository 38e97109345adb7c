"""Trust and reputation engine for a simulated decentralized 5G marketplace."""

__version__ = "0.1.0"

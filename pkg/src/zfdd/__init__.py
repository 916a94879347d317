"""Zero-field spin-1 dynamics, low-field decoupling sequences and robust pulse design."""

__version__ = "0.1.0"

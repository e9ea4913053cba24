"""Relational observables, reference frames and coherence on truncated Hilbert spaces."""

__version__ = "0.1.0"

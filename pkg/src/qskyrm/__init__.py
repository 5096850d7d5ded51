"""qskyrm: spin-orbit photon-pair simulation and topology analysis."""

__version__ = "0.1.0"

"""
Spin-qubit decoherence anisotropy simulator
"""

__version__ = "1.0.0"

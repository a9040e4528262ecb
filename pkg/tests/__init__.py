"""
Test suite for the spin-qubit anisotropy simulator
"""

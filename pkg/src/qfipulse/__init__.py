"""Quantum Fisher information of a decay rate probed by shaped coherent pulses."""

"""Exact symbolic engine and numerical verifier for the dual Hamiltonian
structures of the NLS hierarchy."""

from . import ringcore, laxalg, hierarchy, brackets, numlab

__all__ = ["ringcore", "laxalg", "hierarchy", "brackets", "numlab"]
__version__ = "0.1.0"

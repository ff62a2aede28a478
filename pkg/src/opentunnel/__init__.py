"""Interacting bosons tunnelling from a harmonic trap into open space over
a tunable threshold: exact few-body and mean-field dynamics, reduced
densities and correlations, and the energetics model of the emission."""

__version__ = "0.1.0"

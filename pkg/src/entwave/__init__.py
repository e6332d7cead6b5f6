"""Entanglement contagion in a dilute gas, its continuum front, environment
predecoherence and stochastic channel collapse."""

__version__ = "0.1.0"

"""Poisson multinomial distributions: exact laws, moments, Gaussian approximation,
covers, Fourier-based learning, and anonymous-game equilibria."""

__version__ = "0.1.0"

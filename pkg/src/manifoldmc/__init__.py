"""Riemannian-manifold MCMC: samplers, benchmark posteriors, diagnostics."""

__version__ = "0.1.0"

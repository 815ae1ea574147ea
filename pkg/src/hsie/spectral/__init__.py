"""Dispersion analysis, transverse modal problems and resonance computation."""

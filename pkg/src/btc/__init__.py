"""Simulation and analysis of spin ensembles pumped by power-law Lindblad operators."""

"""Deterministic simulator for differentially private, fault-tolerant federated learning."""

__version__ = "0.1.0"

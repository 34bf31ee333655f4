"""Deterministic federated-learning simulator with a two-phase
malicious-client defense (anomaly detection + trust-zone weighted
aggregation) and a FedAvg baseline."""

__version__ = "0.1.0"

from .kernels import backend_name

__all__ = ["backend_name", "__version__"]

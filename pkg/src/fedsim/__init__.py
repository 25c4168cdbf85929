"""Simulator and resource optimizer for sign-quantized federated learning
over Rayleigh-fading wireless uplinks."""

__version__ = "0.1.0"

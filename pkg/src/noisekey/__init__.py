"""Noise-keyed key distribution: protocol simulator and quantum-optics analysis."""

from .params import Encoding, ProtocolParams, default_q, sigma_phi

__version__ = "0.1.0"

__all__ = ["Encoding", "ProtocolParams", "default_q", "sigma_phi", "__version__"]

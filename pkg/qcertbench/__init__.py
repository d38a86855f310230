"""Certification and benchmarking of quantum states and processes on simulated devices."""

from .devicesim import DeviceConfig, SimulatedDevice
from .errors import QCertError
from .stats import ConfidenceSpec, Estimate

__version__ = "0.1.0"

__all__ = ["ConfidenceSpec", "DeviceConfig", "Estimate", "QCertError", "SimulatedDevice", "__version__"]

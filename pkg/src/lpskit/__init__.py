"""lpskit: RSSI-fingerprinting ranging and trilateration for LoRa-style networks."""

from ._core import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]

"""puschrx: software model of a PUSCH uplink lower-PHY receive chain.

Kernels (OFDM FFT, beamforming, channel estimation, MMSE detection) run in
three 16-bit arithmetic modes plus a float64 reference, with SPMD partition
planners, a TTI pipeline scheduler/metrics calculator and a BER link
simulator on top.
"""

from .numerics import Mode

__version__ = "0.1.0"

__all__ = ["Mode", "__version__"]

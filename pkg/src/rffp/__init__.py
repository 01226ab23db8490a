"""RF device fingerprinting testbed.

Simulates IEEE 802.11a preambles through per-device transmitter impairments
(IQ imbalance, PA compression), emulates day-to-day nuisances (CFO,
multipath), and trains complex-valued CNNs to identify the transmitter,
with augmentation/compensation strategies for making the fingerprints
survive a change of day.
"""

from . import confounders, dsp, harness, impairments, preamble, rng, signal
from .cxnn import *  # noqa: F401,F403 -- the network API is the package's core surface
from .harness import *  # noqa: F401,F403
from .preamble import PreambleSpec, generate_preamble
from .signal import ComplexSignal, normalize_power, normalize_power_array

__version__ = "0.1.0"

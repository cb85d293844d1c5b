"""Latent-projection audio watermarking (Python bindings)."""

from ._latentmark import *  # noqa: F401,F403
from ._latentmark import Waveform

__version__ = "0.1.0"


def waveform(samples, rate):
    """Build a Waveform from any float sequence or numpy array."""
    import numpy as np

    return Waveform(np.asarray(samples, dtype=np.float64), int(rate))

"""Hypersphere constellation MIMO link simulator.

Modules
-------
core            shared types, seeds, Eb/N0 bookkeeping
constellations  constellation generators and distance structure
modulation      pulse shapes, spherical interpolation, waveform synthesis
channel         flat MIMO channel draws and application
receivers       detection and sequence estimation
metrics         peak power, spectrum, error rate, and capacity measurements
cli             experiment runner
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    ChannelRealization,
    ConstellationSet,
    DomainError,
    Waveform,
    ebn0_awgn,
    ebn0_fading,
    make_rng,
    sigma2_for_ebn0,
)

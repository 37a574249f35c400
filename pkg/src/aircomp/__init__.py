"""Non-coherent over-the-air computation (NC-OAC) simulation toolkit.

Encoders/decoders mapping source data to non-negative codewords, a Rayleigh
block-fading multiple access channel, power control for unbiased codeword-sum
estimation, closed-form variance calculators and a reproducible Monte Carlo
harness that cross-validates the two.
"""

__version__ = "0.1.0"

from . import channel, estimation, fl, mappings, montecarlo, theory

__all__ = ["channel", "estimation", "fl", "mappings", "montecarlo", "theory", "__version__"]

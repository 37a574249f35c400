"""Rayleigh block-fading multiple access channel and one-frame transmission.

Shapes follow the convention ``(..., M, K)`` for channel matrices and
``(..., M, L)`` for received frames, where leading axes are arbitrary batch
dimensions (e.g. Monte Carlo trials). Noise is complex Gaussian with unit
variance; SNR is swept through the large-scale gains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CSI_STATISTICAL = "sc"
CSI_INSTANTANEOUS = "ic"
_CSI_MODES = (CSI_STATISTICAL, CSI_INSTANTANEOUS)

POWER_TOL = 1e-9


@dataclass(frozen=True)
class SystemConfig:
    """Static system parameters for one aggregation setup.

    beta is the per-device large-scale power gain (path loss + shadowing);
    P caps the average transmit power per symbol.
    """

    K: int
    M: int
    L: int
    P: float
    beta: np.ndarray
    csi: str = CSI_STATISTICAL
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "beta", np.broadcast_to(np.asarray(self.beta, dtype=float), (self.K,)).copy())
        if self.K < 1 or self.M < 1 or self.L < 1:
            raise ValueError("K, M and L must all be >= 1")
        if self.P <= 0:
            raise ValueError("transmit power cap must be positive")
        if np.any(self.beta <= 0):
            raise ValueError("large-scale gains must be positive")
        if self.csi not in _CSI_MODES:
            raise ValueError(f"csi must be one of {_CSI_MODES}")


def complex_normal(rng, shape, variance=1.0):
    """Circularly symmetric complex Gaussian with the given total variance."""
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_channel(config, rng, trials=None):
    """Draw small-scale gains g[..., m, k] ~ CN(0, beta_k), i.i.d. over m, k.

    Returns an (M, K) matrix, or (trials, M, K) when ``trials`` is given.
    """
    shape = (config.M, config.K) if trials is None else (int(trials), config.M, config.K)
    g = complex_normal(rng, shape)
    return g * np.sqrt(config.beta)


def transmit_frame(w, pc, g, n_symbols, rng, phase_mode="random"):
    """Simulate one non-coherent frame for a single codeword dimension.

    Each device modulates symbol power by its codeword: t_{k,l} =
    sqrt(w_k rho_k) e^{j phi_{k,l}} with phi fresh per device and symbol but
    common to all receive antennas. Returns the scaled received frame
    r~ = sqrt(eta) (g t + n) of shape (..., M, L).

    ``pc`` supplies rho (..., K), eta (...) and the power cap P.
    ``phase_mode='zero'`` is a diagnostic coherent mode (phi = 0).
    """
    w = np.asarray(w, dtype=float)
    if n_symbols < 1:
        raise ValueError("need at least one symbol per codeword")
    if np.any(w < 0):
        raise ValueError("codewords must be non-negative")
    rho = np.asarray(pc.rho, dtype=float)
    sym_power = rho * w
    if np.any(sym_power > pc.P * (1.0 + POWER_TOL)):
        raise ValueError(
            f"power constraint violated: max rho_k w_k = {sym_power.max():g} > P = {pc.P:g}"
        )
    if phase_mode == "random":
        phi = rng.uniform(0.0, 2.0 * np.pi, w.shape + (n_symbols,))
    elif phase_mode == "zero":
        phi = np.zeros(w.shape + (n_symbols,))
    else:
        raise ValueError(f"unknown phase mode {phase_mode!r}")
    t = np.sqrt(sym_power)[..., None] * np.exp(1j * phi)
    r = np.einsum("...mk,...kl->...ml", g, t)
    r = r + complex_normal(rng, r.shape)
    eta = np.asarray(pc.eta, dtype=float)
    return np.sqrt(eta)[..., None, None] * r

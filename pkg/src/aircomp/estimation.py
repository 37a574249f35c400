"""Power control, codeword-sum estimators, MAP detection and the end-to-end
per-dimension aggregation pipeline.

The estimator chain is: effective gain -> power control (optionally
energy-normalized) -> frame transmission -> codeword-sum estimate -> decode.
Each codeword dimension is aggregated on an independent, freshly drawn
channel realization.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from . import channel as ch
from . import theory
from .channel import CSI_INSTANTANEOUS, CSI_STATISTICAL
from .mappings import ExtendedAffineMapping

ESTIMATORS = ("raw", "projected", "phase-ml", "map-count", "map-mv")


@dataclass(frozen=True)
class PowerControl:
    """Per-device transmit coefficients and the common receive scale.

    Satisfies eta * beta_hat_k * rho_k = 1 for every device, so all codewords
    arrive equally weighted and the codeword-sum estimate is unbiased.
    """

    rho: np.ndarray
    eta: np.ndarray
    beta_hat: np.ndarray
    csi: str
    P: float


@dataclass(frozen=True)
class ResourceAllocation:
    """Symbols assigned to each transmitted codeword dimension."""

    symbols: tuple

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if any(s < 1 for s in self.symbols):
            raise ValueError("every codeword dimension needs at least one symbol")

    @property
    def total(self):
        return sum(self.symbols)


def allocate_symbols(mapping, L, L_w=None, L_b=None):
    """Split a symbol budget L across the mapping's codeword dimensions.

    Scalar mappings use all L symbols; split mappings take L/2 per codeword
    (L must be even). The extended mapping needs an explicit (L_w, L_b) with
    L = N L_w + (N - 2) L_b.
    """
    if isinstance(mapping, ExtendedAffineMapping):
        N = mapping.N
        if N == 2:
            if L % 2:
                raise ValueError("even symbol budget required for the two-segment split")
            L_w, L_b = L // 2, 0
        elif L_w is None or L_b is None:
            raise ValueError("extended mapping needs an explicit (L_w, L_b) split")
        if N * L_w + (N - 2) * (L_b or 0) != L:
            raise ValueError(f"split N={N}, L_w={L_w}, L_b={L_b} does not add up to L={L}")
        return ResourceAllocation((L_w,) * N + ((L_b,) * (N - 2) if N > 2 else ()))
    if mapping.D == 1:
        return ResourceAllocation((L,))
    if mapping.D == 2:
        if L % 2:
            raise ValueError("even symbol budget required for the two-codeword split")
        return ResourceAllocation((L // 2, L // 2))
    raise ValueError(f"no default split for mapping {mapping.id!r}")


def energy_scale(mapping, alloc):
    """Transmit-power scale equalizing expected frame energy with the scalar
    affine reference (1 for scalar maps, 2 for the sign split, N L / (L +
    L_b (N - 2)) for the extended map)."""
    L = alloc.total
    if isinstance(mapping, ExtendedAffineMapping):
        L_b = alloc.symbols[-1] if mapping.N > 2 else 0
        return theory.prop_scale(mapping.N, L, L_b)
    if mapping.D == 2:
        return 2.0
    return 1.0


def effective_gain(csi, beta, g=None):
    """Per-device gain seen by power control: beta under statistical CSI, the
    antenna-averaged instantaneous power sum |g|^2 / M otherwise."""
    if csi == CSI_STATISTICAL:
        return np.asarray(beta, dtype=float)
    if csi == CSI_INSTANTANEOUS:
        if g is None:
            raise ValueError("instantaneous CSI needs a channel realization")
        return (np.abs(np.asarray(g)) ** 2).mean(axis=-2)
    raise ValueError(f"unknown csi mode {csi!r}")


def power_control(P, w_max, beta_hat, csi=CSI_STATISTICAL):
    """Channel-inversion power control: rho_k = 1/(eta beta_hat_k) with the
    receive scale eta = w_max/(P min_k beta_hat_k), so the weakest device
    transmits at exactly P when sending w_max."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    if np.any(beta_hat <= 0):
        raise ValueError("effective gains must be positive")
    if P <= 0 or w_max <= 0:
        raise ValueError("P and w_max must be positive")
    eta = w_max / (P * beta_hat.min(axis=-1))
    rho = 1.0 / (np.asarray(eta)[..., None] * beta_hat)
    return PowerControl(rho=rho, eta=np.asarray(eta), beta_hat=beta_hat, csi=csi, P=P)


def scale_power_control(pc, scale):
    """Energy-normalized variant: rho * scale, eta / scale. The per-symbol cap
    rises by the same factor; expected frame energy stays at the reference."""
    return replace(pc, rho=pc.rho * scale, eta=pc.eta / scale, P=pc.P * scale)


def codeword_sum_estimate(frame, eta):
    """Energy detector for the codeword sum: |r~|^2 averaged over antennas and
    symbols, minus the receive scale. Unbiased; may be negative."""
    frame = np.asarray(frame)
    M, L = frame.shape[-2], frame.shape[-1]
    if M == 0 or L == 0:
        raise ValueError("empty frame")
    return (np.abs(frame) ** 2).sum(axis=(-2, -1)) / (M * L) - eta


def project_estimate(w_hat, K, w_min, w_max):
    """Clamp a codeword-sum estimate to its feasible range [K w_min, K w_max]."""
    if w_min > w_max:
        raise ValueError("inverted codeword range")
    return np.clip(w_hat, K * w_min, K * w_max)


def phase_aligned_ml_estimate(frame, eta, K, w_min, w_max):
    """Coherent-phase ML estimate: (1/(M L^2)) sum_m |sum_l r~_{m,l}|^2 - eta/L,
    projected onto [K w_min, K w_max].

    Matched to the diagnostic zero-phase transmit mode; biased (and markedly
    worse than the energy detector) under random phases.
    """
    frame = np.asarray(frame)
    M, L = frame.shape[-2], frame.shape[-1]
    if M == 0 or L == 0:
        raise ValueError("empty frame")
    coherent = np.abs(frame.sum(axis=-1)) ** 2
    w_hat = coherent.sum(axis=-1) / (M * L**2) - eta / L
    return project_estimate(w_hat, K, w_min, w_max)


def map_count_posterior(frame, eta, K, prior_p):
    """Posterior over the count c in {0..K} from a single-symbol frame.

    Valid for statistical CSI with count codewords (codeword sum = count), so
    the received symbols are i.i.d. CN(0, c + eta) given the count; the prior
    is Binomial(K, prior_p). Returns probabilities of shape (..., K+1).
    """
    frame = np.asarray(frame)
    if frame.shape[-1] != 1:
        raise ValueError("count posterior requires a single-symbol frame")
    if not 0.0 <= prior_p <= 1.0:
        raise ValueError("vote probability must lie in [0, 1]")
    energy = (np.abs(frame) ** 2).sum(axis=(-2, -1))
    M = frame.shape[-2]
    c = np.arange(K + 1, dtype=float)
    var = c + eta
    log_lik = -M * np.log(np.pi * var) - energy[..., None] / var
    log_prior = (
        special.gammaln(K + 1)
        - special.gammaln(c + 1)
        - special.gammaln(K - c + 1)
        + special.xlogy(c, prior_p)
        + special.xlogy(K - c, 1.0 - prior_p)
    )
    log_post = log_lik + log_prior
    log_post -= log_post.max(axis=-1, keepdims=True)
    post = np.exp(log_post)
    return post / post.sum(axis=-1, keepdims=True)


def map_majority_detect(posterior, K):
    """Majority decision from a count posterior: +1 iff the mass on counts
    >= ceil(K/2) strictly exceeds one half. Odd K only (even K can tie)."""
    if K % 2 == 0:
        raise ValueError("majority detection is defined for odd K only")
    posterior = np.asarray(posterior)
    if posterior.shape[-1] != K + 1:
        raise ValueError("posterior length does not match K + 1")
    mass = posterior[..., (K + 1) // 2 :].sum(axis=-1)
    out = np.where(mass > 0.5, 1.0, -1.0)
    return float(out) if out.ndim == 0 else out


def aggregate(
    config,
    mapping,
    x,
    rng,
    alloc=None,
    estimator="raw",
    power_normalized=True,
    prior_p=None,
    rho_scale=None,
):
    """Run the full per-dimension aggregation pipeline and decode the sum.

    x has shape (..., K); every codeword dimension is sent over an
    independent channel draw with its own power control. ``power_normalized``
    applies the energy-equalizing scale for multi-codeword mappings.
    ``rho_scale`` deliberately mis-weights devices (fault injection for
    bias ablations). Returns the decoded estimate of shape (...,).
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != config.K:
        raise ValueError(f"expected {config.K} device values, got {x.shape[-1]}")
    if alloc is None:
        alloc = allocate_symbols(mapping, config.L)
    if len(alloc.symbols) != mapping.D:
        raise ValueError(f"allocation covers {len(alloc.symbols)} dimensions, mapping has {mapping.D}")
    if alloc.total != config.L:
        raise ValueError(f"allocation uses {alloc.total} symbols, config grants {config.L}")
    batch = x.shape[:-1]
    trials = int(np.prod(batch)) if batch else None

    w = mapping.encode(x)
    scale = energy_scale(mapping, alloc) if power_normalized else 1.0

    if estimator in ("map-count", "map-mv"):
        return _aggregate_map(config, mapping, w, alloc, scale, prior_p, rho_scale, rng)

    w_hat = np.empty(batch + (mapping.D,))
    for d in range(mapping.D):
        g = ch.draw_channel(config, rng, trials)
        if trials is not None:
            g = g.reshape(batch + g.shape[1:])
        pc = _dimension_power_control(config, mapping, g, scale, rho_scale)
        frame = ch.transmit_frame(w[..., d], pc, g, alloc.symbols[d], rng)
        if estimator == "phase-ml":
            est = phase_aligned_ml_estimate(frame, pc.eta, config.K, mapping.w_min, mapping.w_max)
        else:
            est = codeword_sum_estimate(frame, pc.eta)
            if estimator == "projected":
                est = project_estimate(est, config.K, mapping.w_min, mapping.w_max)
        w_hat[..., d] = est
    return mapping.decode(w_hat, config.K)


def _dimension_power_control(config, mapping, g, scale, rho_scale):
    beta_hat = effective_gain(config.csi, config.beta, g)
    pc = power_control(config.P, mapping.w_max, beta_hat, config.csi)
    if scale != 1.0:
        pc = scale_power_control(pc, scale)
    if rho_scale is not None:
        pc = replace(pc, rho=pc.rho * np.asarray(rho_scale, dtype=float))
    return pc


def _aggregate_map(config, mapping, w, alloc, scale, prior_p, rho_scale, rng):
    """MAP count/majority detection path; single codeword, single symbol."""
    if mapping.D != 1:
        raise ValueError("MAP detection needs a scalar count codeword")
    if config.csi != CSI_STATISTICAL:
        raise ValueError("the count likelihood holds under statistical CSI only")
    if alloc.symbols[0] != 1:
        raise ValueError("the count likelihood holds for single-symbol frames only")
    if prior_p is None:
        raise ValueError("MAP detection needs the vote prior probability")
    batch = w.shape[:-2]
    trials = int(np.prod(batch)) if batch else None
    g = ch.draw_channel(config, rng, trials)
    if trials is not None:
        g = g.reshape(batch + g.shape[1:])
    pc = _dimension_power_control(config, mapping, g, scale, rho_scale)
    frame = ch.transmit_frame(w[..., 0], pc, g, 1, rng)
    posterior = map_count_posterior(frame, pc.eta, config.K, prior_p)
    if mapping.id == "mv-a":
        return map_majority_detect(posterior, config.K)
    counts = posterior.argmax(axis=-1)
    return counts if counts.ndim else int(counts)

"""Closed-form variance, MSE and overhead expressions for NC-OAC aggregation.

All functions are pure and take the receive scale eta explicitly, so both the
unscaled convention (eta = 1) and the SNR convention (eta = w_max / (P beta))
are expressible. Conventions:

* sum estimates are of x = sum_k x_k with unit data x_k in [-1, 1];
* the split (augmented) mapping gets L/2 symbols per codeword and, under
  energy normalization, the halved receive scale eta/2 -- pass that halved
  value where an eta_aa / eta_N argument is called for;
* the instantaneous-CSI expressions are exact for a single receive antenna
  and are averaged over antennas (divided by M) beyond that, which tracks
  the numerically approximated channel expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .channel import CSI_INSTANTANEOUS, CSI_STATISTICAL

VARIANCE_KINDS = (
    "CondVarX",
    "TotalMseX",
    "CondVarW",
    "ExtendedMse",
    "OverheadPerCodeword",
    "ProjectedBiasW0",
)


@dataclass(frozen=True)
class TheoryPoint:
    """One evaluated closed-form value plus the inputs that produced it."""

    kind: str
    value: float
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in VARIANCE_KINDS:
            raise ValueError(f"unknown theory kind {self.kind!r}")
        if self.value < 0:
            raise ValueError(f"{self.kind} must be non-negative, got {self.value!r}")


def _check_csi(csi):
    if csi not in (CSI_STATISTICAL, CSI_INSTANTANEOUS):
        raise ValueError(f"unknown csi mode {csi!r}")


def cond_var_w(csi, w, sum_w_sq, eta, M, L):
    """Variance of the codeword-sum estimate given the transmitted codewords.

    w is the codeword sum, sum_w_sq the sum of squared per-device codewords.
    """
    _check_csi(csi)
    sigma4 = (w + eta) ** 2
    if csi == CSI_STATISTICAL:
        return (sigma4 + (L - 1) * sum_w_sq) / (M * L)
    return (sigma4 - sum_w_sq) / L


def cond_var_x(csi, mapping, x_vec, eta, M, L):
    """Variance of the data-sum estimate conditioned on the data vector.

    mapping is 'affine' or 'aa' (unit maps on [-1, 1]); 'aa' uses L/2 symbols
    per codeword and must be called with even L. The instantaneous-CSI rows
    are single-antenna expressions.
    """
    _check_csi(csi)
    x_vec = np.asarray(x_vec, dtype=float)
    x = x_vec.sum(axis=-1)
    if mapping == "affine":
        s = ((x_vec + 1.0) ** 2).sum(axis=-1)
        if csi == CSI_STATISTICAL:
            return ((x + len_k(x_vec) + 2 * eta) ** 2 + (L - 1) * s) / (M * L)
        return ((x + len_k(x_vec) + 2 * eta) ** 2 - s) / L
    if mapping == "aa":
        if L % 2:
            raise ValueError("augmented affine needs an even symbol budget")
        xp = np.maximum(x_vec, 0.0).sum(axis=-1)
        xm = np.maximum(-x_vec, 0.0).sum(axis=-1)
        s = (x_vec**2).sum(axis=-1)
        if csi == CSI_STATISTICAL:
            return (2.0 / (M * L)) * ((xp + eta) ** 2 + (xm + eta) ** 2 + (L - 2) / 2.0 * s)
        return (2.0 / L) * ((xp + eta) ** 2 + (xm + eta) ** 2 - s)
    raise ValueError(f"conditional variance not available for mapping {mapping!r}")


def len_k(x_vec):
    return x_vec.shape[-1]


def total_mse_x(csi, mapping, K, M, L, eta):
    """MSE of the data-sum estimate under i.i.d. uniform data on [-1, 1].

    The total estimator variance is this value plus VAR(x) = K/3. For the
    'aa' mapping pass the normalized receive scale (eta/2 relative to the
    affine reference) as eta.
    """
    _check_csi(csi)
    if mapping == "affine":
        core = K**2 - K + 4 * K * eta + 4 * eta**2
        tail = 4.0 * K * L / 3.0
    elif mapping == "aa":
        core = K**2 / 4.0 - K / 4.0 + 2 * K * eta + 4 * eta**2
        tail = K * L / 3.0
    else:
        raise ValueError(f"total MSE not available for mapping {mapping!r}")
    if csi == CSI_STATISTICAL:
        return (core + tail) / (M * L)
    return core / (M * L)


def total_var_x(csi, mapping, K, M, L, eta):
    """Total variance of the data-sum estimate: MSE plus VAR(x) = K/3."""
    return total_mse_x(csi, mapping, K, M, L, eta) + K / 3.0


def affine_total_mse_general(a, b, K, M, L, P, beta_min):
    """MSE of a general affine map w = a x + b (b >= a > 0) under uniform data.

    The receive scale follows from the codeword peak: eta = (a + b)/(P beta_min).
    Minimized over b at b = a, where it reduces to the unit-map expression.
    """
    if not (b >= a > 0):
        raise ValueError("need b >= a > 0 for non-negative codewords")
    eta = (a + b) / (P * beta_min)
    val = K * a**2 / 3.0 + (K * b + eta) ** 2 + (L - 1) * K * (a**2 / 3.0 + b**2)
    return val / (a**2 * M * L)


def extended_mse(K, M, N, L_w, L_b, eta_N):
    """MSE of the N-segment extended mapping under uniform data (statistical CSI).

    L_w symbols per continuous codeword, L_b per transmitted indicator;
    L_b = 0 is allowed (and required) only for N = 2, where the indicator
    term vanishes identically.
    """
    if N < 2 or N % 2:
        raise ValueError("segment count must be even and >= 2")
    if L_w < 1:
        raise ValueError("need at least one symbol per continuous codeword")
    if N == 2:
        if L_b != 0:
            raise ValueError("N = 2 transmits no indicators; L_b must be 0")
    elif L_b < 1:
        raise ValueError("indicators need at least one symbol each for N > 2")
    cont = (4.0 / (N**2 * M * L_w)) * (
        K * (K - 1) / (4.0 * N) + K * eta_N + N * eta_N**2 + K * L_w / 3.0
    )
    if N == 2:
        return cont
    ind = ((N**2 - 3 * N + 2) / (3.0 * N * M * L_b)) * (
        K * (K - 1) / N**2 + K * (2 * eta_N + L_b) / N + eta_N**2
    )
    return cont + ind


def prop_scale(N, L, L_b):
    """Transmit-power scale N L / (L + L_b (N - 2)) equalizing expected energy
    with the unit affine reference; the receive scale divides by the same factor."""
    if N == 2 and L_b != 0:
        raise ValueError("N = 2 transmits no indicators; L_b must be 0")
    return N * L / (L + L_b * (N - 2))


def power_normalization(N, L, L_b, eta):
    """Receive scale eta_N after energy normalization; always < eta for N >= 2."""
    rem = L - (N - 2) * L_b
    if rem <= 0 or rem % N or rem // N < 1:
        raise ValueError(f"no positive integer L_w with L = {N} L_w + {N - 2} L_b for L = {L}")
    return eta / prop_scale(N, L, L_b)


@dataclass(frozen=True)
class ExtendedOptimum:
    N: int
    L_w: int
    L_b: int
    eta_N: float
    mse: float


def feasible_extended_splits(L, n_max=None):
    """All (N, L_w, L_b) with even N, L_w >= 1, L_b >= 1 for N > 2 (0 for N = 2)
    and N L_w + (N - 2) L_b = L."""
    out = []
    n_cap = L if n_max is None else min(n_max, L)
    for N in range(2, n_cap + 1, 2):
        if N == 2:
            if L % 2 == 0:
                out.append((2, L // 2, 0))
            continue
        for L_b in range(1, L):
            rem = L - (N - 2) * L_b
            if rem < N:
                break
            if rem % N == 0:
                out.append((N, rem // N, L_b))
    return out


def optimal_extended_params(K, M, L, eta):
    """Exhaustive search for the minimum-MSE segment count and symbol split.

    Ties break toward smaller N, then smaller L_b. Raises when L admits no
    feasible split (every feasible L is even).
    """
    if L < 2:
        raise ValueError("need L >= 2")
    best = None
    for N, L_w, L_b in feasible_extended_splits(L):
        eta_N = eta / prop_scale(N, L, L_b)
        mse = extended_mse(K, M, N, L_w, L_b, eta_N)
        if best is None or mse < best.mse - 1e-15:
            best = ExtendedOptimum(N, L_w, L_b, eta_N, mse)
    if best is None:
        raise ValueError(f"no feasible (N, L_w, L_b) decomposition for L = {L}")
    return best


OVERHEAD_SCHEMES = ("coherent", "nc-ic", "nc-sc")


def overhead_per_codeword(scheme, K, tau, T=1):
    """Channel-estimation overhead per aggregated codeword.

    tau is the coherence time of the instantaneous channel (must exceed the
    2K pilot/feedback slots) and T the number of coherence periods over which
    the large-scale gains stay constant.
    """
    if tau <= 2 * K:
        raise ValueError("coherence time must exceed 2K pilot slots")
    if T < 1:
        raise ValueError("need at least one coherence period")
    if scheme == "coherent":
        return 2 * K / (2.0 * (tau - 2 * K))
    if scheme == "nc-ic":
        return 2 * K / (tau - 2.0 * K)
    if scheme == "nc-sc":
        return 2 * K / (tau * T - 2.0 * K)
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {OVERHEAD_SCHEMES}")


def projected_bias_w0(K, eta):
    """Published closed form K e^{-(K/eta + 1)} for the projected-estimator
    bias at an all-zero codeword sum with M = L = 1.

    UNVERIFIED: this expression disagrees with direct integration of the
    clamped estimator's expectation (see projected_bias_w0_quadrature, which
    Monte Carlo confirms); it is exposed for reporting, not asserted against.
    """
    if K < 1 or eta <= 0:
        raise ValueError("need K >= 1 and eta > 0")
    return K * math.exp(-(K / eta + 1.0))


def projected_bias_w0_quadrature(K, eta):
    """Bias of the projected estimate at w = 0, M = L = 1, by quadrature.

    With all codewords zero the raw estimate is eta(u - 1) with u = |n|^2
    standard exponential; the bias is E[clip(eta(u - 1), 0, K)].
    """
    if K < 1 or eta <= 0:
        raise ValueError("need K >= 1 and eta > 0")
    val, _ = integrate.quad(
        lambda u: min(max(eta * (u - 1.0), 0.0), K) * math.exp(-u), 0.0, np.inf
    )
    return val


def conditional_variance_curve(K, M, L, eta, x_grid):
    """Conditional variance of the sum estimate along equal data x_k = x/K."""
    points = []
    for x in x_grid:
        x_vec = np.full(K, x / K)
        for csi in (CSI_STATISTICAL, CSI_INSTANTANEOUS):
            for mapping in ("affine", "aa"):
                points.append(
                    TheoryPoint(
                        "CondVarX",
                        float(cond_var_x(csi, mapping, x_vec, eta, M, L)),
                        {"csi": csi, "mapping": mapping, "x": float(x), "K": K, "M": M, "L": L, "eta": eta},
                    )
                )
    return points


def total_mse_curve(K, M, L, beta_grid, P=1.0, w_max=1.0):
    """Total MSE along a large-scale-gain sweep, eta = w_max / (P beta).

    The split mapping is evaluated at its energy-normalized scale eta/2.
    """
    points = []
    for beta in beta_grid:
        eta = w_max / (P * float(beta))
        for csi in (CSI_STATISTICAL, CSI_INSTANTANEOUS):
            for mapping, eta_m in (("affine", eta), ("aa", eta / 2.0)):
                points.append(
                    TheoryPoint(
                        "TotalMseX",
                        float(total_mse_x(csi, mapping, K, M, L, eta_m)),
                        {
                            "csi": csi,
                            "mapping": mapping,
                            "beta": float(beta),
                            "eta": eta_m,
                            "K": K,
                            "M": M,
                            "L": L,
                        },
                    )
                )
    return points


def extended_optimum_curve(K, M, L_grid, eta):
    """Best extended-mapping MSE per symbol budget next to the N = 2 baseline."""
    points = []
    for L in L_grid:
        L = int(L)
        opt = optimal_extended_params(K, M, L, eta)
        points.append(
            TheoryPoint(
                "ExtendedMse",
                opt.mse,
                {"mapping": "extended-opt", "L": L, "N": opt.N, "L_w": opt.L_w, "L_b": opt.L_b,
                 "eta": opt.eta_N, "K": K, "M": M},
            )
        )
        if L % 2 == 0:
            points.append(
                TheoryPoint(
                    "ExtendedMse",
                    extended_mse(K, M, 2, L // 2, 0, eta / 2.0),
                    {"mapping": "aa", "L": L, "N": 2, "L_w": L // 2, "L_b": 0,
                     "eta": eta / 2.0, "K": K, "M": M},
                )
            )
    return points

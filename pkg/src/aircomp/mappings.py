"""Source-data mappings: encode scalars to non-negative codewords and back.

Every mapping pairs an encoder ``x -> w in [w_min, w_max]^D`` with a decoder
that recovers the data sum from the codeword sum ``w = sum_k w_k``. Encoders
are vectorized: a batch of shape ``(...,)`` encodes to ``(..., D)``.

String ids accepted by :func:`mapping_from_id`:

    affine | aa | extended:N | mv-a | mv-aa | count
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_CONSTRAINT_TOL = 1e-12


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    return x, x.ndim == 0


def _check_range(x, lo, hi):
    if np.any(x < lo) or np.any(x > hi):
        bad = np.asarray(x)[(np.asarray(x) < lo) | (np.asarray(x) > hi)]
        raise ValueError(
            f"source value {bad.flat[0]:g} outside [{lo:g}, {hi:g}]; "
            "project the data first if clipping is intended"
        )


@dataclass(frozen=True)
class AffineMapping:
    """Scalar affine codeword map ``w = a x + b`` with decoder ``c w - K c b``.

    Requires ``c a = 1`` and non-negative codewords over ``[x_min, x_max]``.
    """

    a: float
    b: float
    c: float
    x_min: float
    x_max: float

    D = 1
    family = "affine"

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("degenerate source range")
        if abs(self.c * self.a - 1.0) > _CONSTRAINT_TOL:
            raise ValueError(f"decoder constraint c*a = 1 violated: c*a = {self.c * self.a!r}")
        if self.w_min < -_CONSTRAINT_TOL:
            raise ValueError("affine mapping produces negative codewords on its range")

    @property
    def id(self):
        return "affine"

    @property
    def w_min(self):
        return min(self.a * self.x_min + self.b, self.a * self.x_max + self.b)

    @property
    def w_max(self):
        return max(self.a * self.x_min + self.b, self.a * self.x_max + self.b)

    def encode(self, x):
        x, scalar = _as_batch(x)
        _check_range(x, self.x_min, self.x_max)
        w = self.a * x + self.b
        return w[..., None]

    def decode(self, w_sum, K):
        w = _check_dim(w_sum, self.D)
        out = self.c * w[..., 0] - K * self.c * self.b
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AugmentedAffineMapping:
    """Two-codeword map of the sign-split ``[x^+, (-x)^+]``.

    ``w = A [x^+, (-x)^+] + b`` with decoder ``c^T w - K c^T b``; requires
    ``c^T A = [1, -1]``.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    x_min: float
    x_max: float

    D = 2
    family = "aa"

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=float).reshape(2, 2))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(2))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).reshape(2))
        if not (self.x_min < 0.0 < self.x_max):
            raise ValueError("augmented affine needs a range straddling zero")
        cta = self.c @ self.A
        if np.max(np.abs(cta - np.array([1.0, -1.0]))) > _CONSTRAINT_TOL:
            raise ValueError(f"decoder constraint c^T A = [1, -1] violated: {cta}")

    @property
    def id(self):
        return "aa"

    @property
    def w_min(self):
        return 0.0

    @property
    def w_max(self):
        corners = [self.encode(self.x_min), self.encode(0.0), self.encode(self.x_max)]
        return float(max(np.max(w) for w in corners))

    def encode(self, x):
        x, scalar = _as_batch(x)
        _check_range(x, self.x_min, self.x_max)
        split = np.stack([np.maximum(x, 0.0), np.maximum(-x, 0.0)], axis=-1)
        w = split @ self.A.T + self.b
        if np.any(w < -_CONSTRAINT_TOL):
            raise ValueError("augmented affine produced a negative codeword")
        return np.maximum(w, 0.0)

    def decode(self, w_sum, K):
        w = _check_dim(w_sum, self.D)
        out = w @ self.c - K * (self.c @ self.b)
        return float(out) if out.ndim == 0 else out


def segment_index(N, x):
    """1-based index of the segment of [-1, 1] containing ``x``.

    The positive half is split into segments 1..N/2 from 0 upward, the
    negative half into N/2+1..N from 0 downward. Boundary points go to the
    lower index on either side, and x = 0 belongs to segment 1.
    """
    if N < 2 or N % 2:
        raise ValueError("segment count must be even and >= 2")
    x, scalar = _as_batch(x)
    _check_range(x, -1.0, 1.0)
    half = N // 2
    mag = np.ceil(np.abs(x) * half).astype(int)
    mag = np.clip(mag, 1, half)
    idx = np.where(x >= 0, mag, half + mag)
    idx = np.where(x == 0, 1, idx)
    return int(idx) if scalar else idx


@dataclass(frozen=True)
class ExtendedAffineMapping:
    """Piecewise map of [-1, 1] onto N equal segments with occupancy counts.

    Encodes to N continuous codewords (the within-segment value) plus the
    N - 2 segment indicators actually needed for decoding; the indicators of
    segments 1 and N/2 + 1 carry no decoder weight and are never transmitted.
    The N = 2 case coincides with the unit augmented affine map.
    """

    N: int

    x_min = -1.0
    x_max = 1.0
    family = "extended"

    def __post_init__(self):
        if self.N < 2 or self.N % 2:
            raise ValueError("segment count must be even and >= 2")

    @property
    def id(self):
        return f"extended:{self.N}"

    @property
    def D(self):
        return 2 * self.N - 2

    @property
    def w_min(self):
        return 0.0

    @property
    def w_max(self):
        return 1.0

    @property
    def transmitted_indicators(self):
        """Segment numbers whose occupancy counts are transmitted."""
        half = self.N // 2
        return tuple(n for n in range(1, self.N + 1) if n not in (1, half + 1))

    def encode(self, x):
        x, scalar = _as_batch(x)
        seg = segment_index(self.N, x)
        seg = np.asarray(seg)
        half = self.N // 2
        width = 2.0 / self.N
        lower = np.where(seg <= half, width * (seg - 1), width * (seg - half - 1))
        value = np.where(seg <= half, x - lower, -x - lower) / width
        onehot = seg[..., None] == np.arange(1, self.N + 1)
        cont = onehot * value[..., None]
        ind = onehot[..., [n - 1 for n in self.transmitted_indicators]].astype(float)
        return np.concatenate([cont, ind], axis=-1)

    def decode(self, w_sum, K):
        w = _check_dim(w_sum, self.D)
        half = self.N // 2
        cont = w[..., : self.N]
        counts = np.zeros(w.shape[:-1] + (self.N,))
        counts[..., [n - 1 for n in self.transmitted_indicators]] = w[..., self.N :]
        n_pos = np.arange(1, half + 1)
        n_neg = np.arange(half + 1, self.N + 1)
        pos = cont[..., : half] + counts[..., : half] * (n_pos - 1)
        neg = cont[..., half:] + counts[..., half:] * (n_neg - half - 1)
        out = (2.0 / self.N) * (pos.sum(axis=-1) - neg.sum(axis=-1))
        return float(out) if out.ndim == 0 else out


def _check_votes(x):
    if not np.all(np.isclose(np.abs(x), 1.0)):
        raise ValueError("votes must be +1 or -1")


@dataclass(frozen=True)
class MajorityVoteAffine:
    """Vote map ``w = (1 + x)/2`` decoded as the sign of ``w - K/2``."""

    x_min = -1.0
    x_max = 1.0
    w_min = 0.0
    w_max = 1.0
    D = 1
    family = "affine"
    id = "mv-a"

    def encode(self, x):
        x, _ = _as_batch(x)
        _check_votes(x)
        return ((1.0 + x) / 2.0)[..., None]

    def decode(self, w_sum, K):
        w = _check_dim(w_sum, self.D)
        out = np.sign(w[..., 0] - K / 2.0)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MajorityVoteAugmented:
    """Vote map ``w = [x^+, (-x)^+]`` decoded as the sign of ``w_1 - w_2``."""

    x_min = -1.0
    x_max = 1.0
    w_min = 0.0
    w_max = 1.0
    D = 2
    family = "aa"
    id = "mv-aa"

    def encode(self, x):
        x, _ = _as_batch(x)
        _check_votes(x)
        return np.stack([np.maximum(x, 0.0), np.maximum(-x, 0.0)], axis=-1)

    def decode(self, w_sum, K):
        w = _check_dim(w_sum, self.D)
        out = np.sign(w[..., 0] - w[..., 1])
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CountAffine:
    """Vote map whose decoded codeword sum is the +1 count, rounded half-up."""

    x_min = -1.0
    x_max = 1.0
    w_min = 0.0
    w_max = 1.0
    D = 1
    family = "affine"
    id = "count"

    def encode(self, x):
        x, _ = _as_batch(x)
        _check_votes(x)
        return ((1.0 + x) / 2.0)[..., None]

    def decode(self, w_sum, K):
        w = _check_dim(w_sum, self.D)
        out = np.clip(np.floor(w[..., 0] + 0.5), 0, K).astype(np.int64)
        return int(out) if out.ndim == 0 else out


def _check_dim(w_sum, D):
    w = np.asarray(w_sum, dtype=float)
    if w.ndim == 0:
        w = w[None]
    if w.shape[-1] != D:
        raise ValueError(f"codeword sum has dimension {w.shape[-1]}, mapping expects {D}")
    return w


def unit_affine(x_min, x_max):
    """Affine map normalized so the codeword range is exactly [0, 1]."""
    if not x_min < x_max:
        raise ValueError("degenerate source range")
    a = 1.0 / (x_max - x_min)
    return AffineMapping(a=a, b=-x_min * a, c=1.0 / a, x_min=x_min, x_max=x_max)


def unit_augmented_affine(x_min, x_max):
    """Sign-split map normalized to codeword range [0, 1]; needs x_min < 0 < x_max."""
    if not (x_min < 0.0 < x_max):
        raise ValueError("augmented affine needs a range straddling zero")
    A = np.diag([1.0 / x_max, -1.0 / x_min])
    return AugmentedAffineMapping(A=A, b=np.zeros(2), c=np.array([x_max, x_min]), x_min=x_min, x_max=x_max)


def mapping_from_id(spec, x_min=-1.0, x_max=1.0):
    """Build a mapping from its string id.

    ``affine`` and ``aa`` honor the requested source range; the remaining
    variants are defined on [-1, 1] (votes on {-1, +1}).
    """
    if spec == "affine":
        return unit_affine(x_min, x_max)
    if spec == "aa":
        return unit_augmented_affine(x_min, x_max)
    if spec.startswith("extended:"):
        return ExtendedAffineMapping(N=int(spec.split(":", 1)[1]))
    if spec == "mv-a":
        return MajorityVoteAffine()
    if spec == "mv-aa":
        return MajorityVoteAugmented()
    if spec == "count":
        return CountAffine()
    raise ValueError(f"unknown mapping id {spec!r}")

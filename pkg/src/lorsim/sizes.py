"""Study-level sample sizes: constant, truncated normal and uniform.

Both random kinds are centred at ``n`` and share the variance ``1.21 n^2 / 12``
(a uniform interval of width ``1.1 n``), so their coefficient of variation is
``sqrt(1.21 / 12) ~= 0.3175``. Normal draws are rounded to the nearest integer
and clamped at a floor of 10.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

SIZE_FLOOR = 10
VARIANCE_FACTOR = 1.21 / 12.0
HALF_WIDTH_FACTOR = 0.55


class SizeKind(str, enum.Enum):
    CONSTANT = "constant"
    NORMAL = "normal"
    UNIFORM = "uniform"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"truncatednormal": "normal", "truncated_normal": "normal", "const": "constant"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown size kind {value!r}") from None


@dataclass(frozen=True)
class SampleSizeSpec:
    """Per-study sample-size distribution (one arm; both arms share the draw)."""

    kind: SizeKind
    center: int

    def __post_init__(self):
        object.__setattr__(self, "kind", SizeKind.parse(self.kind))
        if int(self.center) != self.center:
            raise ValueError(f"center must be an integer, got {self.center!r}")
        object.__setattr__(self, "center", int(self.center))
        if self.center < SIZE_FLOOR:
            raise ValueError(f"center must be >= {SIZE_FLOOR}, got {self.center}")

    @property
    def sd(self):
        if self.kind is SizeKind.CONSTANT:
            return 0.0
        return math.sqrt(VARIANCE_FACTOR) * self.center

    @property
    def bounds(self):
        """Support of the real-valued uniform draw, ``n -/+ 0.55 n``."""
        if self.kind is not SizeKind.UNIFORM:
            raise ValueError("bounds only defined for uniform sizes")
        half = HALF_WIDTH_FACTOR * self.center
        return self.center - half, self.center + half

    def matched_constant(self):
        return SampleSizeSpec(SizeKind.CONSTANT, self.center)

    def __str__(self):
        return f"{self.kind.value}({self.center})"


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def draw_raw_sizes(spec, rng, size):
    """Real-valued draws before rounding and clamping."""
    if spec.kind is SizeKind.CONSTANT:
        return np.full(size, float(spec.center))
    if spec.kind is SizeKind.NORMAL:
        return rng.normal(spec.center, spec.sd, size)
    lo, hi = spec.bounds
    return rng.uniform(lo, hi, size)


def draw_sample_sizes(spec, rng, size):
    """Vector of integer sample sizes, all >= 10."""
    if spec.kind is SizeKind.CONSTANT:
        return np.full(size, spec.center, dtype=np.int64)
    n = round_half_away(draw_raw_sizes(spec, rng, size))
    if spec.kind is SizeKind.NORMAL:
        n = np.maximum(n, SIZE_FLOOR)
    return n.astype(np.int64)


def draw_sample_size(spec, rng):
    return int(draw_sample_sizes(spec, rng, 1)[0])


def size_moments(spec):
    """Nominal ``(mean, variance, cv)``, ignoring rounding and the floor."""
    n = float(spec.center)
    if spec.kind is SizeKind.CONSTANT:
        return n, 0.0, 0.0
    if spec.kind is SizeKind.NORMAL:
        var = VARIANCE_FACTOR * n * n
    else:
        width = 2 * HALF_WIDTH_FACTOR * n
        var = width * width / 12.0
    return n, var, math.sqrt(var) / n


def size_pmf(spec):
    """Exact distribution of the integer draws as ``(support, probabilities)``.

    Accounts for rounding and, for the normal kind, the mass piled on the
    floor by clamping. The normal tail is cut 12 sd above the centre.
    """
    n = spec.center
    if spec.kind is SizeKind.CONSTANT:
        return np.array([n], dtype=np.int64), np.array([1.0])
    if spec.kind is SizeKind.NORMAL:
        sd = spec.sd
        top = int(math.ceil(n + 12 * sd))
        k = np.arange(SIZE_FLOOR, top + 1, dtype=np.int64)
        upper = stats.norm.cdf((k + 0.5 - n) / sd)
        lower = stats.norm.cdf((k - 0.5 - n) / sd)
        lower[0] = 0.0
        p = upper - lower
        return k, p / p.sum()
    lo, hi = spec.bounds
    k = np.arange(int(math.floor(lo)), int(math.ceil(hi)) + 1, dtype=np.int64)
    left = np.clip(k - 0.5, lo, hi)
    right = np.clip(k + 0.5, lo, hi)
    p = (right - left) / (hi - lo)
    keep = p > 0
    return k[keep], p[keep]


def exact_size_moments(spec):
    """``(mean, variance, cv)`` of the integer draws actually produced."""
    k, p = size_pmf(spec)
    mean = float(np.dot(k, p))
    var = float(np.dot((k - mean) ** 2, p))
    return mean, var, math.sqrt(var) / mean


def negative_tail_probability(spec):
    """P(un-truncated normal draw < 0); zero for bounded kinds."""
    if spec.kind is not SizeKind.NORMAL:
        return 0.0
    return float(stats.norm.cdf(-spec.center / spec.sd))


def truncation_probability(spec):
    """Probability that the floor is applied (rounded draw below 10)."""
    if spec.kind is not SizeKind.NORMAL:
        return 0.0
    return float(stats.norm.cdf((SIZE_FLOOR - 0.5 - spec.center) / spec.sd))


def inverse_moment_delta(spec):
    """Second-order delta approximation ``E(1/N) ~= (1 + CV^2) / E(N)``."""
    mean, _, cv = size_moments(spec)
    return (1.0 + cv * cv) / mean


def inverse_moment_exact(spec):
    """E(1/N) summed over :func:`size_pmf`."""
    k, p = size_pmf(spec)
    return float(np.dot(p, 1.0 / k))


def compound_bernoulli_moments(p, spec, exact=False):
    """Mean and variance of ``Bin(N, p)`` with random ``N``.

    ``E(X) = p E(N)`` and ``Var(X) = p(1-p) E(N) + p^2 Var(N)``. With
    ``exact=False`` the nominal size moments are used; ``exact=True`` plugs in
    the moments of the rounded/clamped draws.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p!r}")
    mean_n, var_n, _ = exact_size_moments(spec) if exact else size_moments(spec)
    return p * mean_n, p * (1.0 - p) * mean_n + p * p * var_n

"""Simulated K-study meta-analyses of log-odds-ratios.

Mechanisms differ in how the control-arm logit is generated and in how the
study effect is split between arms:

* FIM1, RIM1, URIM1 put the whole effect on the treatment arm,
  ``logit p_T = alpha_i + theta_i``.
* FIM2, RIM2 split it, ``logit p_C = alpha_i - theta_i/2`` and
  ``logit p_T = alpha_i + theta_i/2``.

FIM fixes ``alpha_i = logit(p_C)``; RIM draws ``alpha_i ~ N(logit(p_C), sigma2)``;
URIM1 draws ``p_iC`` uniformly on ``p_C -/+ sigma sqrt(3) p_C (1 - p_C)``.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .sizes import SampleSizeSpec, draw_sample_sizes


class Mechanism(str, enum.Enum):
    FIM1 = "FIM1"
    FIM2 = "FIM2"
    RIM1 = "RIM1"
    RIM2 = "RIM2"
    URIM1 = "URIM1"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown mechanism {value!r}") from None

    @property
    def split_effect(self):
        return self in (Mechanism.FIM2, Mechanism.RIM2)

    @property
    def fixed_intercept(self):
        return self in (Mechanism.FIM1, Mechanism.FIM2)


@dataclass(frozen=True)
class Scenario:
    K: int
    size_spec: SampleSizeSpec
    theta: float
    tau2: float
    p_C: float
    sigma2: float
    mechanism: Mechanism = field(default=Mechanism.FIM1)

    def __post_init__(self):
        object.__setattr__(self, "mechanism", Mechanism.parse(self.mechanism))
        if self.mechanism.fixed_intercept:
            # sigma2 plays no role for fixed intercepts; normalise so FIM cells
            # have one identity regardless of the grid's sigma2 axis.
            object.__setattr__(self, "sigma2", 0.0)
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K!r}")
        object.__setattr__(self, "K", int(self.K))
        if not self.tau2 >= 0:
            raise ValueError(f"tau2 must be >= 0, got {self.tau2!r}")
        if not 0.0 < self.p_C < 1.0:
            raise ValueError(f"p_C must lie in (0, 1), got {self.p_C!r}")
        if not self.sigma2 >= 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2!r}")
        if self.mechanism is Mechanism.URIM1:
            lo, hi = self.urim_bounds
            if lo <= 0.0 or hi >= 1.0:
                raise ValueError(
                    f"URIM1 interval ({lo:.4g}, {hi:.4g}) leaves (0, 1) for p_C={self.p_C}, sigma2={self.sigma2}"
                )

    @property
    def alpha(self):
        return float(logit(self.p_C))

    @property
    def urim_bounds(self):
        half = math.sqrt(self.sigma2) * math.sqrt(3.0) * self.p_C * (1.0 - self.p_C)
        return self.p_C - half, self.p_C + half

    @property
    def key(self):
        """Stable identifier used for stream derivation and sorting."""
        s2 = "" if self.mechanism.fixed_intercept else repr(float(self.sigma2))
        return (
            f"{self.mechanism.value}|{self.size_spec.kind.value}|K={self.K}|n={self.size_spec.center}"
            f"|theta={float(self.theta)!r}|tau2={float(self.tau2)!r}|pC={float(self.p_C)!r}|sigma2={s2}"
        )


@dataclass(frozen=True)
class StudyData:
    x_C: int
    n_C: int
    x_T: int
    n_T: int

    def __post_init__(self):
        if not (0 <= self.x_C <= self.n_C and 0 <= self.x_T <= self.n_T):
            raise ValueError(f"counts out of range: {self}")
        if self.n_C < 1 or self.n_T < 1:
            raise ValueError(f"arm sizes must be positive: {self}")


def draw_true_effects(scenario, rng):
    """``theta_i ~ N(theta, tau2)``, one per study."""
    z = rng.standard_normal(scenario.K)
    return scenario.theta + math.sqrt(scenario.tau2) * z


def draw_control_parameter(scenario, rng):
    """Control-arm logits ``alpha_i``.

    URIM1 draws on the probability scale and converts to logits, so the
    return value is always on the logit scale.
    """
    m = scenario.mechanism
    K = scenario.K
    if m.fixed_intercept:
        return np.full(K, scenario.alpha)
    if m is Mechanism.URIM1:
        lo, hi = scenario.urim_bounds
        return logit(rng.uniform(lo, hi, K))
    return scenario.alpha + math.sqrt(scenario.sigma2) * rng.standard_normal(K)


def arm_probabilities(mechanism, alpha_i, theta_i):
    """``(p_C, p_T)`` with ``logit p_T - logit p_C = theta_i``."""
    mechanism = Mechanism.parse(mechanism)
    alpha_i = np.asarray(alpha_i, dtype=np.float64)
    theta_i = np.asarray(theta_i, dtype=np.float64)
    if mechanism.split_effect:
        return expit(alpha_i - 0.5 * theta_i), expit(alpha_i + 0.5 * theta_i)
    return expit(alpha_i), expit(alpha_i + theta_i)


def generate_arrays(scenario, rng):
    """One dataset as arrays ``(n, x_C, x_T)``; both arms have ``n`` subjects.

    Draw order within a stream: sizes, true effects, control parameters,
    control counts, treatment counts.
    """
    n = draw_sample_sizes(scenario.size_spec, rng, scenario.K)
    theta_i = draw_true_effects(scenario, rng)
    alpha_i = draw_control_parameter(scenario, rng)
    p_C, p_T = arm_probabilities(scenario.mechanism, alpha_i, theta_i)
    x_C = rng.binomial(n, p_C)
    x_T = rng.binomial(n, p_T)
    return n, x_C, x_T


def generate_meta_sample(scenario, rng):
    n, x_C, x_T = generate_arrays(scenario, rng)
    return [StudyData(int(xc), int(ni), int(xt), int(ni)) for ni, xc, xt in zip(n, x_C, x_T)]

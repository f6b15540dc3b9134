"""Study log-odds-ratios, tau^2 estimators, pooled effects and intervals.

The list-of-studies functions here are thin wrappers over the batched
kernels in :mod:`lorsim.kernels` (a one-row batch), so the code path used by
the simulation engine is the same one exercised by direct calls.
"""

import enum
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import kernels

TAU2_METHODS = ("DL", "REML", "MP")
THETA_METHODS = ("DL", "REML", "MP", "SSW")


class Correction(str, enum.Enum):
    ON_ZERO = "on-zero"
    ALWAYS = "always"
    NONE = "none"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown correction policy {value!r}") from None


@dataclass(frozen=True)
class StudySummary:
    lor: float
    var: float
    n_C: int
    n_T: int
    corrected: bool = False


@dataclass(frozen=True)
class MetaEstimate:
    method: str
    tau2: float
    theta: float
    se: float
    ci_low: float
    ci_high: float


def summarize_arrays(x_C, n_C, x_T, n_T, policy=Correction.ON_ZERO):
    """Vectorised :func:`study_lor`; returns ``(lor, var, corrected)``.

    Works elementwise on arrays of any shape. Under the ``on-zero`` policy 0.5
    is added to all four cells of a table when any cell is zero.
    """
    policy = Correction.parse(policy)
    a = np.asarray(x_T, dtype=np.float64)
    b = np.asarray(n_T, dtype=np.float64) - a
    c = np.asarray(x_C, dtype=np.float64)
    d = np.asarray(n_C, dtype=np.float64) - c
    if policy is Correction.ALWAYS:
        corrected = np.ones(np.broadcast(a, b, c, d).shape, dtype=bool)
    elif policy is Correction.ON_ZERO:
        corrected = (a == 0) | (b == 0) | (c == 0) | (d == 0)
    else:
        corrected = np.zeros(np.broadcast(a, b, c, d).shape, dtype=bool)
    half = 0.5 * corrected
    a, b, c, d = a + half, b + half, c + half, d + half
    with np.errstate(divide="ignore", invalid="ignore"):
        lor = np.log((a * d) / (b * c))
        var = 1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d
    return lor, var, corrected


def study_lor(study, policy=Correction.ON_ZERO):
    lor, var, corrected = summarize_arrays(study.x_C, study.n_C, study.x_T, study.n_T, policy)
    return StudySummary(float(lor), float(var), int(study.n_C), int(study.n_T), bool(corrected))


def effective_sizes(n_C, n_T):
    """Sample-size weights ``n_C n_T / (n_C + n_T)``."""
    n_C = np.asarray(n_C, dtype=np.float64)
    n_T = np.asarray(n_T, dtype=np.float64)
    return n_C * n_T / (n_C + n_T)


def _rows(summaries, min_k):
    if len(summaries) < min_k:
        raise ValueError(f"need at least {min_k} studies, got {len(summaries)}")
    y = np.array([[s.lor for s in summaries]], dtype=np.float64)
    v = np.array([[s.var for s in summaries]], dtype=np.float64)
    return y, v


def generalized_Q(summaries, tau2):
    y, v = _rows(summaries, 2)
    return float(kernels.q_stat(y, v, np.array([float(tau2)]))[0])


def tau2_DL(summaries):
    y, v = _rows(summaries, 2)
    return float(kernels.tau2_dl(y, v)[0])


def tau2_MP(summaries):
    """Mandel-Paule: root of ``Q(tau2) = K - 1``, or 0 when ``Q(0) <= K - 1``."""
    y, v = _rows(summaries, 2)
    return float(kernels.tau2_mp(y, v)[0])


def tau2_REML_fit(summaries):
    """REML estimate and a convergence flag.

    Fixed-point iteration started from the DL estimate, stopping when the step
    is below ``kernels.REML_TOL`` or after ``kernels.REML_MAXITER`` steps.
    """
    y, v = _rows(summaries, 2)
    start = kernels.tau2_dl(y, v)
    t, conv = kernels.tau2_reml(y, v, start)
    return float(t[0]), bool(conv[0])


def tau2_REML(summaries):
    return tau2_REML_fit(summaries)[0]


def reml_loglik(summaries, tau2):
    """Restricted log-likelihood of the normal-normal model, up to a constant."""
    y = np.array([s.lor for s in summaries], dtype=np.float64)
    v = np.array([s.var for s in summaries], dtype=np.float64)
    w = 1.0 / (v + tau2)
    mu = np.dot(w, y) / w.sum()
    return -0.5 * (np.log(v + tau2).sum() + np.log(w.sum()) + np.dot(w, (y - mu) ** 2))


def pooled_theta_iv(summaries, tau2):
    y, v = _rows(summaries, 1)
    theta, se = kernels.iv_pool(y, v, np.array([float(tau2)]))
    return float(theta[0]), float(se[0])


def theta_ssw(summaries):
    y, v = _rows(summaries, 1)
    wn = effective_sizes([[s.n_C for s in summaries]], [[s.n_T for s in summaries]])
    theta, _ = kernels.ssw(y, v, wn, np.zeros(1))
    return float(theta[0])


def _check_level(level):
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level!r}")


def normal_critical(level=0.95):
    _check_level(level)
    return float(stats.norm.ppf(0.5 * (1.0 + level)))


def t_critical(df, level=0.95):
    _check_level(level)
    return float(stats.t.ppf(0.5 * (1.0 + level), df))


def ci_normal(theta, se, level=0.95):
    if not se > 0:
        raise ValueError(f"se must be positive, got {se!r}")
    h = normal_critical(level) * se
    return theta - h, theta + h


def ci_ssw(summaries, tau2_plugin, level=0.95):
    """t-interval around the SSW estimate.

    Variance ``sum w^2 (v_i + tau2_plugin) / (sum w)^2`` with ``K - 1`` degrees
    of freedom.
    """
    y, v = _rows(summaries, 2)
    wn = effective_sizes([[s.n_C for s in summaries]], [[s.n_T for s in summaries]])
    theta, var = kernels.ssw(y, v, wn, np.array([float(tau2_plugin)]))
    h = t_critical(len(summaries) - 1, level) * np.sqrt(var[0])
    return float(theta[0] - h), float(theta[0] + h)


# ---------------------------------------------------------------------------
# batch interface used by the engine
# ---------------------------------------------------------------------------


@dataclass
class BatchEstimates:
    """Per-replication estimates, each array of length M."""

    tau2: dict
    theta: dict
    ci_low: dict
    ci_high: dict
    reml_converged: np.ndarray


def estimate_batch(y, v, wn, plugin="MP", level=0.95, backend=None):
    """All estimators and intervals for an ``(M, K)`` batch.

    ``plugin`` names the tau^2 estimate substituted into the SSW interval.
    """
    ks = kernels.kernel_set(backend)
    y = np.ascontiguousarray(y, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    wn = np.ascontiguousarray(wn, dtype=np.float64)
    K = y.shape[1]
    if K < 2:
        raise ValueError("need at least 2 studies per replication")
    plugin = str(plugin).upper()
    if plugin not in TAU2_METHODS:
        raise ValueError(f"unknown tau2 plug-in {plugin!r}")

    dl = ks["tau2_dl"](y, v)
    reml, conv = ks["tau2_reml"](y, v, dl)
    mp = ks["tau2_mp"](y, v)
    tau2 = {"DL": dl, "REML": reml, "MP": mp}

    z = normal_critical(level)
    theta, lo, hi = {}, {}, {}
    for name in TAU2_METHODS:
        th, se = ks["iv_pool"](y, v, tau2[name])
        theta[name] = th
        lo[name] = th - z * se
        hi[name] = th + z * se
    th, var = ks["ssw"](y, v, wn, tau2[plugin])
    h = t_critical(K - 1, level) * np.sqrt(var)
    theta["SSW"] = th
    lo["SSW"] = th - h
    hi["SSW"] = th + h
    return BatchEstimates(tau2, theta, lo, hi, np.asarray(conv, dtype=bool))


def meta_analyze(summaries, plugin="MP", level=0.95):
    """All methods on one list of studies, as :class:`MetaEstimate` objects."""
    y, v = _rows(summaries, 2)
    wn = effective_sizes([[s.n_C for s in summaries]], [[s.n_T for s in summaries]])
    est = estimate_batch(y, v, wn, plugin=plugin, level=level)
    out = {}
    for name in THETA_METHODS:
        t2 = est.tau2[name][0] if name in est.tau2 else est.tau2[str(plugin).upper()][0]
        lo, hi = float(est.ci_low[name][0]), float(est.ci_high[name][0])
        theta = float(est.theta[name][0])
        if name == "SSW":
            se = (hi - lo) / (2 * t_critical(len(summaries) - 1, level))
        else:
            se = (hi - lo) / (2 * normal_critical(level))
        out[name] = MetaEstimate(name, float(t2), theta, float(se), lo, hi)
    return out

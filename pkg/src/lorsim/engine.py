"""Monte Carlo driver: replications, scenarios and full grid sweeps.

Replication ``i`` of a scenario draws from its own counter-based stream (see
:mod:`lorsim.rng`), and per-scenario sums are formed with ``math.fsum`` over
per-replication values in index order. Results therefore do not depend on how
replications are split across workers.
"""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .datagen import Mechanism, Scenario, generate_arrays
from .estimators import (
    TAU2_METHODS,
    THETA_METHODS,
    Correction,
    effective_sizes,
    estimate_batch,
    summarize_arrays,
)
from .rng import replication_stream, stream_key
from .sizes import SampleSizeSpec, SizeKind

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20200220
CHUNK = 1000


@dataclass
class GridConfig:
    K_values: tuple = (5, 10, 30)
    n_values: tuple = (40, 100, 250, 1000)
    theta_values: tuple = (0.0, 0.5, 1.0, 1.5, 2.0)
    tau2_values: tuple = tuple(round(0.1 * i, 1) for i in range(11))
    pC_values: tuple = (0.1, 0.4)
    sigma2_values: tuple = (0.1, 0.4)
    mechanisms: tuple = tuple(Mechanism)
    size_kinds: tuple = (SizeKind.NORMAL, SizeKind.UNIFORM)
    M: int = 10_000
    master_seed: int = DEFAULT_SEED
    tau2_plugin: str = "MP"
    correction: Correction = Correction.ON_ZERO
    level: float = 0.95

    def __post_init__(self):
        self.mechanisms = tuple(Mechanism.parse(m) for m in self.mechanisms)
        self.size_kinds = tuple(SizeKind.parse(k) for k in self.size_kinds)
        self.correction = Correction.parse(self.correction)
        self.tau2_plugin = str(self.tau2_plugin).upper()
        for name in ("K_values", "n_values", "theta_values", "tau2_values", "pC_values",
                     "sigma2_values", "mechanisms", "size_kinds"):
            value = tuple(getattr(self, name))
            if not value:
                raise ValueError(f"{name} must not be empty")
            setattr(self, name, value)
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if self.tau2_plugin not in TAU2_METHODS:
            raise ValueError(f"tau2_plugin must be one of {TAU2_METHODS}")


@dataclass
class PerformanceRecord:
    scenario: Scenario
    M: int
    mean_tau2: dict
    bias_tau2: dict
    mean_theta: dict
    bias_theta: dict
    covered: dict
    reml_nonconv: int
    tau2_plugin: str = "MP"
    correction: str = Correction.ON_ZERO.value

    @property
    def coverage(self):
        return {m: c / self.M for m, c in self.covered.items()}


@dataclass
class ReplicationResult:
    tau2: dict
    theta: dict
    ci_low: dict
    ci_high: dict
    covered: dict
    reml_converged: bool = True
    extra: dict = field(default_factory=dict)


def expand_grid(config):
    """Scenarios in canonical order; fixed-intercept cells skip the sigma2 axis."""
    out = []
    for mech, kind, K, n, theta, tau2, pC in itertools.product(
        config.mechanisms, config.size_kinds, config.K_values, config.n_values,
        config.theta_values, config.tau2_values, config.pC_values,
    ):
        sigmas = (0.0,) if mech.fixed_intercept else config.sigma2_values
        for s2 in sigmas:
            out.append(Scenario(K, SampleSizeSpec(kind, n), float(theta), float(tau2), float(pC), float(s2), mech))
    return out


def _simulate_arrays(scenario, start, stop, master_seed):
    key = stream_key(master_seed, scenario.key)
    M, K = stop - start, scenario.K
    n = np.empty((M, K), dtype=np.int64)
    x_C = np.empty((M, K), dtype=np.int64)
    x_T = np.empty((M, K), dtype=np.int64)
    for row, index in enumerate(range(start, stop)):
        rng = replication_stream(master_seed, scenario.key, index, key=key)
        n[row], x_C[row], x_T[row] = generate_arrays(scenario, rng)
    return n, x_C, x_T


def simulate_block(scenario, start, stop, master_seed, plugin="MP",
                   correction=Correction.ON_ZERO, level=0.95, backend=None):
    """Per-replication outputs for replications ``start..stop-1``.

    Returns a dict of arrays: ``tau2_<m>``, ``theta_<m>``, ``covered_<m>``
    and ``reml_conv``.
    """
    n, x_C, x_T = _simulate_arrays(scenario, start, stop, master_seed)
    y, v, _ = summarize_arrays(x_C, n, x_T, n, correction)
    est = estimate_batch(y, v, effective_sizes(n, n), plugin=plugin, level=level, backend=backend)
    out = {"reml_conv": est.reml_converged}
    for m in TAU2_METHODS:
        out[f"tau2_{m}"] = est.tau2[m]
    for m in THETA_METHODS:
        out[f"theta_{m}"] = est.theta[m]
        out[f"covered_{m}"] = (est.ci_low[m] <= scenario.theta) & (scenario.theta <= est.ci_high[m])
    return out


def run_replication(scenario, replication_index, master_seed, plugin="MP",
                    correction=Correction.ON_ZERO, level=0.95):
    """Estimates from one replication; a pure function of its arguments."""
    n, x_C, x_T = _simulate_arrays(scenario, replication_index, replication_index + 1, master_seed)
    y, v, corrected = summarize_arrays(x_C, n, x_T, n, correction)
    est = estimate_batch(y, v, effective_sizes(n, n), plugin=plugin, level=level)
    covered = {
        m: bool(est.ci_low[m][0] <= scenario.theta <= est.ci_high[m][0]) for m in THETA_METHODS
    }
    return ReplicationResult(
        tau2={m: float(est.tau2[m][0]) for m in TAU2_METHODS},
        theta={m: float(est.theta[m][0]) for m in THETA_METHODS},
        ci_low={m: float(est.ci_low[m][0]) for m in THETA_METHODS},
        ci_high={m: float(est.ci_high[m][0]) for m in THETA_METHODS},
        covered=covered,
        reml_converged=bool(est.reml_converged[0]),
        extra={"n": n[0], "x_C": x_C[0], "x_T": x_T[0], "lor": y[0], "var": v[0], "corrected": corrected[0]},
    )


def aggregate(scenario, block, plugin="MP", correction=Correction.ON_ZERO):
    """Collapse per-replication arrays (in index order) into a record."""
    M = len(block["reml_conv"])
    mean_tau2 = {m: math.fsum(block[f"tau2_{m}"]) / M for m in TAU2_METHODS}
    mean_theta = {m: math.fsum(block[f"theta_{m}"]) / M for m in THETA_METHODS}
    return PerformanceRecord(
        scenario=scenario,
        M=M,
        mean_tau2=mean_tau2,
        bias_tau2={m: mean_tau2[m] - scenario.tau2 for m in TAU2_METHODS},
        mean_theta=mean_theta,
        bias_theta={m: mean_theta[m] - scenario.theta for m in THETA_METHODS},
        covered={m: int(np.count_nonzero(block[f"covered_{m}"])) for m in THETA_METHODS},
        reml_nonconv=int(M - np.count_nonzero(block["reml_conv"])),
        tau2_plugin=str(plugin).upper(),
        correction=Correction.parse(correction).value,
    )


def _concat(blocks):
    return {k: np.concatenate([b[k] for b in blocks]) for k in blocks[0]}


def _chunks(M, size):
    return [(s, min(s + size, M)) for s in range(0, M, size)]


def _run_task(args):
    scenario, start, stop, seed, plugin, correction, level = args
    return simulate_block(scenario, start, stop, seed, plugin, correction, level)


def _execute(tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks))


def run_scenario(scenario, M, master_seed=DEFAULT_SEED, plugin="MP",
                 correction=Correction.ON_ZERO, level=0.95, workers=1, chunk=CHUNK):
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    tasks = [(scenario, s, e, master_seed, plugin, correction, level) for s, e in _chunks(M, chunk)]
    blocks = _execute(tasks, workers)
    return aggregate(scenario, _concat(blocks), plugin, correction)


def run_grid(config, workers=1, chunk=CHUNK, scenarios=None):
    """Run every grid cell; records come back in :func:`expand_grid` order."""
    if scenarios is None:
        scenarios = expand_grid(config)
    tasks, owner = [], []
    for i, sc in enumerate(scenarios):
        for s, e in _chunks(config.M, chunk):
            tasks.append((sc, s, e, config.master_seed, config.tau2_plugin, config.correction, config.level))
            owner.append(i)
    logger.info("running %d scenarios as %d tasks on %d worker(s)", len(scenarios), len(tasks), workers)
    blocks = _execute(tasks, workers)
    per = [[] for _ in scenarios]
    for i, b in zip(owner, blocks):
        per[i].append(b)
    return [
        aggregate(sc, _concat(bs), config.tau2_plugin, config.correction)
        for sc, bs in zip(scenarios, per)
    ]


def single_study_lors(scenario, M, master_seed, label, correction=Correction.ON_ZERO):
    """Estimated LORs of ``M`` independent single studies generated under ``scenario``."""
    sc = replace(scenario, K=M)
    rng = replication_stream(master_seed, f"single|{label}|{scenario.key}", 0)
    n, x_C, x_T = generate_arrays(sc, rng)
    y, _, _ = summarize_arrays(x_C, n, x_T, n, correction)
    return y


def variance_inflation_check(scenario, M, master_seed=DEFAULT_SEED, correction=Correction.ON_ZERO):
    """``Var(lor | random n) / Var(lor | constant n)`` over ``M`` single studies each."""
    random_y = single_study_lors(scenario, M, master_seed, "random", correction)
    const = replace(scenario, size_spec=scenario.size_spec.matched_constant())
    const_y = single_study_lors(const, M, master_seed, "constant", correction)
    return float(np.var(random_y, ddof=1) / np.var(const_y, ddof=1))

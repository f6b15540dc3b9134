"""Exit criteria. Each test logs one PASS/FAIL line, shown in the terminal summary."""

import itertools
import math
import time

import numpy as np
import pytest

from lorsim import estimators as est
from lorsim.datagen import Scenario, StudyData
from lorsim.engine import DEFAULT_SEED, GridConfig, aggregate, run_grid, run_scenario, variance_inflation_check
from lorsim.estimators import StudySummary
from lorsim.report import results_csv
from lorsim.rng import default_stream
from lorsim.sizes import (
    SampleSizeSpec,
    SizeKind,
    compound_bernoulli_moments,
    draw_raw_sizes,
    draw_sample_sizes,
    negative_tail_probability,
    round_half_away,
)

CENTERS = (40, 100, 250, 1000)
DUMMY = Scenario(5, SampleSizeSpec("constant", 100), 0.0, 0.0, 0.4, 0.0, "FIM1")


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def _summ(y, v):
    return [StudySummary(float(a), float(b), 100, 100) for a, b in zip(y, v)]


def test_c01_negative_tail(acceptance_log):
    rng = default_stream(101)
    details, ok = [], True
    with Timer() as t:
        for n in CENTERS:
            spec = SampleSizeSpec(SizeKind.NORMAL, n)
            analytic = negative_tail_probability(spec)
            mc = float(np.mean(draw_raw_sizes(spec, rng, 10**6) < 0))
            ok &= abs(analytic - 0.0008) <= 0.0002 and abs(mc - 0.0008) <= 0.0002
            details.append(f"n={n}: {analytic:.5f}/{mc:.5f}")
    ok &= t.elapsed < 5
    acceptance_log("C01 P(N<0) = 0.0008 +- 0.0002", ok, "; ".join(details) + f" ({t.elapsed:.1f}s)")
    assert ok


def test_c02_truncation_frequency(acceptance_log):
    rng = default_stream(102)
    with Timer() as t:
        raw = draw_raw_sizes(SampleSizeSpec(SizeKind.NORMAL, 40), rng, 10**6)
        freq = float(np.mean(round_half_away(raw) < 10))
    ok = abs(freq - 0.009) <= 0.002 and t.elapsed < 5
    acceptance_log("C02 truncation at n=40 = 0.009 +- 0.002", ok, f"observed {freq:.5f} ({t.elapsed:.1f}s)")
    assert ok


def test_c03_uniform_cv(acceptance_log):
    rng = default_stream(103)
    details, ok = [], True
    with Timer() as t:
        for n in CENTERS:
            x = draw_sample_sizes(SampleSizeSpec(SizeKind.UNIFORM, n), rng, 10**6).astype(float)
            cv = x.std() / x.mean()
            ok &= abs(cv - 0.318) <= 0.005 and abs(cv * cv - 0.101) <= 0.003
            details.append(f"n={n}: cv={cv:.4f} cv2={cv * cv:.4f}")
    ok &= t.elapsed < 5
    acceptance_log("C03 uniform CV 0.318 +- 0.005, CV^2 0.101 +- 0.003", ok, "; ".join(details))
    assert ok


def test_c04_compound_moments(acceptance_log):
    reps = 10**6
    rng = default_stream(104)
    details, ok = [], True
    with Timer() as t:
        for kind, p in itertools.product(SizeKind, (0.1, 0.4)):
            spec = SampleSizeSpec(kind, 100)
            x = rng.binomial(draw_sample_sizes(spec, rng, reps), p).astype(float)
            s2 = x.var(ddof=1)
            se = math.sqrt((np.mean((x - x.mean()) ** 4) - x.var() ** 2) / reps)
            _, formula = compound_bernoulli_moments(p, spec, exact=True)
            _, nominal = compound_bernoulli_moments(p, spec)
            z = (s2 - formula) / se
            ok &= abs(z) <= 3
            details.append(f"{kind.value} p={p}: {s2:.3f} vs {formula:.3f} (nominal {nominal:.3f}) z={z:+.2f}")
    ok &= t.elapsed < 30
    acceptance_log("C04 compound Var(X) within 3 MC se", ok, "; ".join(details))
    assert ok


@pytest.mark.parametrize("kind", [SizeKind.UNIFORM, SizeKind.NORMAL])
def test_c05_variance_inflation(kind, acceptance_log):
    sc = Scenario(1, SampleSizeSpec(kind, 1000), 0.0, 0.0, 0.4, 0.0, "FIM2")
    with Timer() as t:
        ratio = variance_inflation_check(sc, 100_000, DEFAULT_SEED)
    ok = abs(ratio - 1.10) <= 0.03 and t.elapsed < 60
    acceptance_log(f"C05 variance inflation {kind.value} = 1.10 +- 0.03", ok, f"ratio {ratio:.4f} ({t.elapsed:.1f}s)")
    assert ok


def test_c06_random_vs_constant_coverage(acceptance_log):
    M = 5000
    methods = ("DL", "MP", "REML", "SSW")
    with Timer() as t:
        base = dict(theta=0.5, p_C=0.1)
        cells = []
        for mech, K, n, tau2 in itertools.product(("FIM2", "RIM1"), (5, 30), (100, 1000), (0.0, 0.4, 1.0)):
            s2 = 0.4 if mech == "RIM1" else 0.0
            cells.append((mech, K, n, tau2, s2))
        worst = {}
        passed = {SizeKind.UNIFORM: 0, SizeKind.NORMAL: 0}
        for mech, K, n, tau2, s2 in cells:
            const = run_scenario(Scenario(K, SampleSizeSpec("constant", n), base["theta"], tau2, base["p_C"], s2, mech), M)
            for kind in passed:
                rand = run_scenario(Scenario(K, SampleSizeSpec(kind, n), base["theta"], tau2, base["p_C"], s2, mech), M)
                diffs = [abs(rand.coverage[m] - const.coverage[m]) for m in methods]
                worst[(kind, mech, K, n, tau2)] = max(diffs)
                passed[kind] += max(diffs) <= 0.015
    share = {k: v / len(cells) for k, v in passed.items()}
    ok = all(s >= 0.90 for s in share.values()) and t.elapsed < 15 * 60
    detail = ", ".join(f"{k.value}: {s:.1%} of {len(cells)} cells" for k, s in share.items())
    detail += f"; largest gap {max(worst.values()):.4f} ({t.elapsed:.0f}s)"
    acceptance_log("C06 |cov(random n) - cov(constant n)| <= 0.015 in >= 90% of cells", ok, detail)
    assert ok


def test_c07_estimator_oracles(acceptance_log):
    two = _summ([0, 1], [0.1, 0.1])
    notes, ok = [], True
    with Timer() as t:
        dl, mp = est.tau2_DL(two), est.tau2_MP(two)
        ok &= abs(dl - 0.4) < 1e-12 and abs(mp - 0.4) <= 1e-8
        notes.append(f"DL={dl:.12f} MP={mp:.12f}")
        rng = np.random.default_rng(7)
        worst = 0.0
        grid = np.arange(0.0, 5.0 + 5e-5, 1e-4)[:, None]
        for _ in range(100):
            y = rng.normal(size=10)
            v = rng.uniform(0.05, 0.3, size=10)
            w = 1.0 / (v + grid)
            mu = (w * y).sum(1, keepdims=True) / w.sum(1, keepdims=True)
            ll = -0.5 * (np.log(v + grid).sum(1) + np.log(w.sum(1)) + (w * (y - mu) ** 2).sum(1))
            oracle = grid[np.argmax(ll), 0]
            worst = max(worst, abs(est.tau2_REML(_summ(y, v)) - oracle))
        ok &= worst <= 1e-3
        notes.append(f"REML vs grid max err {worst:.2e}")
        resid = 0.0
        for _ in range(1000):
            K = int(rng.integers(2, 31))
            s = _summ(rng.normal(0, 1.5, K), rng.uniform(0.005, 1.0, K))
            t2 = est.tau2_MP(s)
            if t2 > 0:
                resid = max(resid, abs(est.generalized_Q(s, t2) - (K - 1)))
        ok &= resid < 1e-6
        notes.append(f"MP max |Q-(K-1)| {resid:.1e}")
    ok &= t.elapsed < 10
    acceptance_log("C07 estimator oracles", ok, "; ".join(notes) + f" ({t.elapsed:.1f}s)")
    assert ok


def test_c08_nominal_coverage(acceptance_log):
    sc = Scenario(30, SampleSizeSpec("constant", 1000), 0.0, 0.4, 0.4, 0.0, "FIM2")
    with Timer() as t:
        rec = run_scenario(sc, 10_000)
    cov = rec.coverage
    ok = all(0.90 <= cov[m] <= 0.97 for m in ("MP", "REML")) and t.elapsed < 60
    acceptance_log("C08 MP/REML coverage in [0.90, 0.97]", ok,
                   f"MP {cov['MP']:.4f}, REML {cov['REML']:.4f} ({t.elapsed:.1f}s)")
    assert ok


def test_c09_determinism_across_workers(acceptance_log):
    cfg = GridConfig(mechanisms=("FIM1", "RIM2", "URIM1"), K_values=(5, 10), n_values=(40,),
                     theta_values=(0.5,), tau2_values=(0.0, 0.5), pC_values=(0.1,), sigma2_values=(0.4,),
                     size_kinds=("normal", "uniform"), M=1500, master_seed=99)
    with Timer() as t:
        outputs = {w: results_csv(run_grid(cfg, workers=w, chunk=400)).encode() for w in (1, 4, 8)}
    ok = outputs[1] == outputs[4] == outputs[8] and t.elapsed < 120
    rows = outputs[1].count(b"\n") - 1
    acceptance_log("C09 byte-identical CSV for 1/4/8 workers", ok,
                   f"{rows} rows, {len(outputs[1])} bytes ({t.elapsed:.1f}s)")
    assert ok


def test_c10_invariance_suite(acceptance_log):
    rng = np.random.default_rng(10)
    failures = []
    with Timer() as t:
        for case in range(1000):
            K = int(rng.integers(2, 31))
            y = rng.normal(0, 1, K)
            v = rng.uniform(0.01, 0.8, K)
            n = rng.integers(10, 1500, K)
            s = [StudySummary(a, b, int(k), int(k)) for a, b, k in zip(y, v, n)]
            base = est.meta_analyze(s)
            c = rng.uniform(-3, 3)
            sc = rng.uniform(0.3, 3)
            shifted = est.meta_analyze([StudySummary(a + c, b, x.n_C, x.n_T) for a, b, x in zip(y, v, s)])
            scaled = est.meta_analyze([StudySummary(a * sc, b * sc * sc, x.n_C, x.n_T) for a, b, x in zip(y, v, s)])
            for m, r in base.items():
                if not (abs(shifted[m].theta - r.theta - c) < 1e-7
                        and abs(shifted[m].tau2 - r.tau2) < 1e-7
                        and abs((shifted[m].ci_high - shifted[m].ci_low) - (r.ci_high - r.ci_low)) < 1e-7):
                    failures.append(("translation", case, m))
                if not (abs(scaled[m].theta - r.theta * sc) < 1e-7
                        and abs(scaled[m].tau2 - r.tau2 * sc * sc) <= 1e-6 * max(1.0, r.tau2 * sc * sc)):
                    failures.append(("scale", case, m))
            q = [est.generalized_Q(s, tt) for tt in (0.0, 0.1, 0.5, 2.0)]
            if not all(a > b for a, b in zip(q, q[1:])):
                failures.append(("Q monotone", case, ""))
            nc = int(rng.integers(20, 2000))
            xc, xt = int(rng.integers(1, nc)), int(rng.integers(1, nc))
            st = est.study_lor(StudyData(xc, nc, xt, nc))
            pc, pt = xc / nc, xt / nc
            if abs(st.var - (1 / (nc * pt * (1 - pt)) + 1 / (nc * pc * (1 - pc)))) > 1e-12 * st.var:
                failures.append(("Eq1", case, ""))
            M = int(rng.integers(1, 300))
            block = {"reml_conv": rng.random(M) < 0.99}
            for m in est.TAU2_METHODS:
                block[f"tau2_{m}"] = rng.random(M)
            for m in est.THETA_METHODS:
                block[f"theta_{m}"] = rng.normal(size=M)
                block[f"covered_{m}"] = rng.random(M) < rng.random()
            rec = aggregate(DUMMY, block)
            for m, cov in rec.coverage.items():
                if not (0 <= cov <= 1 and abs(cov * M - round(cov * M)) < 1e-9 and round(cov * M) == rec.covered[m]):
                    failures.append(("coverage*M", case, m))
    ok = not failures and t.elapsed < 30
    acceptance_log("C10 invariance suite on 1000 fuzzed inputs", ok,
                   f"{len(failures)} failures {failures[:3]} ({t.elapsed:.1f}s)")
    assert ok

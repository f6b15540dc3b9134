"""CSV results, run manifests, SVG summary panels and the moment battery."""

import csv
import io
import json
import logging
import math
import os
import re
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import __version__
from ._accel import backend_name
from .estimators import TAU2_METHODS, THETA_METHODS
from .rng import default_stream
from .sizes import (
    SampleSizeSpec,
    SizeKind,
    compound_bernoulli_moments,
    draw_raw_sizes,
    draw_sample_sizes,
    exact_size_moments,
    inverse_moment_delta,
    inverse_moment_exact,
    negative_tail_probability,
    size_moments,
    truncation_probability,
)
from .svg import LineChart

logger = logging.getLogger(__name__)

ID_COLUMNS = ("mechanism", "size_kind", "K", "n", "theta", "tau2", "pC", "sigma2", "M")
CSV_COLUMNS = (
    ID_COLUMNS
    + tuple(f"bias_tau2_{m}" for m in TAU2_METHODS)
    + tuple(f"bias_theta_{m}" for m in THETA_METHODS)
    + tuple(f"coverage_{m}" for m in THETA_METHODS)
    + ("reml_nonconv", "tau2_plugin", "correction")
)
_INT_COLUMNS = {"K", "n", "M", "reml_nonconv"}
_TEXT_COLUMNS = {"mechanism", "size_kind", "tau2_plugin", "correction"}


def fmt6(x):
    """Six significant digits, trailing zeros kept; locale independent."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        x = 0.0  # drop the sign of -0.0
    return format(x, "#.6g")


def record_row(record):
    """Flat dict (numbers, not strings) keyed by :data:`CSV_COLUMNS`."""
    sc = record.scenario
    row = {
        "mechanism": sc.mechanism.value,
        "size_kind": sc.size_spec.kind.value,
        "K": sc.K,
        "n": sc.size_spec.center,
        "theta": sc.theta,
        "tau2": sc.tau2,
        "pC": sc.p_C,
        "sigma2": None if sc.mechanism.fixed_intercept else sc.sigma2,
        "M": record.M,
    }
    for m in TAU2_METHODS:
        row[f"bias_tau2_{m}"] = record.bias_tau2[m]
    cov = record.coverage
    for m in THETA_METHODS:
        row[f"bias_theta_{m}"] = record.bias_theta[m]
    for m in THETA_METHODS:
        row[f"coverage_{m}"] = cov[m]
    row["reml_nonconv"] = record.reml_nonconv
    row["tau2_plugin"] = record.tau2_plugin
    row["correction"] = record.correction
    return row


def _cell(col, value):
    if value is None:
        return ""
    if col in _TEXT_COLUMNS:
        return str(value)
    if col in _INT_COLUMNS:
        return str(int(value))
    return fmt6(value)


def results_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        row = record_row(rec)
        writer.writerow([_cell(c, row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_results(records, path):
    if not records:
        raise ValueError("no records to write")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(results_csv(records))
    return path


def read_results(path):
    """Rows of a results CSV with numeric columns parsed."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for col, text in raw.items():
                if col in _TEXT_COLUMNS:
                    row[col] = text
                elif text == "":
                    row[col] = None
                elif col in _INT_COLUMNS:
                    row[col] = int(text)
                else:
                    row[col] = float(text)
            rows.append(row)
    return rows


def manifest_path(csv_path):
    return f"{csv_path}.manifest.json"


def write_manifest(path, config_text, config, started, finished, workers):
    manifest = {
        "tool": "lorsim",
        "version": __version__,
        "backend": backend_name(),
        "master_seed": config.master_seed,
        "M": config.M,
        "tau2_plugin": config.tau2_plugin,
        "ssw_interval_note": f"SSW interval variance uses the {config.tau2_plugin} tau2 estimate",
        "correction": config.correction.value,
        "workers": workers,
        "started": started,
        "finished": finished,
        "config": config_text,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------------

MEASURES = {
    "coverage": ("coverage_{}", THETA_METHODS, 0.95, "coverage of theta"),
    "bias_theta": ("bias_theta_{}", THETA_METHODS, 0.0, "bias of theta estimate"),
    "bias_tau2": ("bias_tau2_{}", TAU2_METHODS, 0.0, "bias of tau2 estimate"),
}
_PANEL_KEY = ("mechanism", "size_kind", "K", "n", "theta", "pC", "sigma2")


def _slug(text):
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", text).strip("_")


def plot_summary(rows, outdir, measure="coverage"):
    """One SVG per panel (all fields but tau2 fixed); returns the written paths.

    ``rows`` may be :class:`PerformanceRecord` objects or dicts as returned by
    :func:`read_results`.
    """
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    template, methods, ref, ylabel = MEASURES[measure]
    rows = [r if isinstance(r, dict) else record_row(r) for r in rows]
    panels = defaultdict(list)
    for r in rows:
        panels[tuple(r[k] for k in _PANEL_KEY)].append(r)
    os.makedirs(outdir, exist_ok=True)
    written = []
    for key, group in panels.items():
        fields = dict(zip(_PANEL_KEY, key))
        taus = sorted({r["tau2"] for r in group})
        if len(taus) < 2:
            logger.warning("skipping panel %s: need >= 2 tau2 values, have %d", fields, len(taus))
            continue
        group = sorted(group, key=lambda r: r["tau2"])
        s2 = "" if fields["sigma2"] is None else f" sigma2={fields['sigma2']:g}"
        title = (f"{fields['mechanism']} {fields['size_kind']} n={fields['n']} K={fields['K']} "
                 f"theta={fields['theta']:g} pC={fields['pC']:g}{s2}")
        chart = LineChart(title=title, xlabel="tau2", ylabel=ylabel)
        chart.add_hline(ref)
        for m in methods:
            chart.add_series(m, [r["tau2"] for r in group], [r[template.format(m)] for r in group])
        name = _slug(f"{measure}_{title.replace(' ', '_')}") + ".svg"
        path = os.path.join(outdir, name)
        chart.save(path)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# moment battery
# ---------------------------------------------------------------------------


@dataclass
class CheckRow:
    name: str
    observed: float
    expected: float
    tolerance: float
    passed: bool

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<44s} observed {self.observed:.6g}  expected {self.expected:.6g}  tol {self.tolerance:.3g}"


def _row(name, observed, expected, tol):
    return CheckRow(name, float(observed), float(expected), float(tol), bool(abs(observed - expected) <= tol))


def check_moments(seed=2020, draws=10**6, centers=(40, 100, 250, 1000)):
    """Size-sampler verification battery; returns :class:`CheckRow` objects."""
    rng = default_stream(seed)
    rows = []
    for n in centers:
        spec = SampleSizeSpec(SizeKind.NORMAL, n)
        rows.append(_row(f"P(N<0) analytic n={n}", negative_tail_probability(spec), 0.00082, 0.0002))
        raw = draw_raw_sizes(spec, rng, draws)
        rows.append(_row(f"P(N<0) Monte Carlo n={n}", np.mean(raw < 0), 0.00082, 0.0002))
    spec40 = SampleSizeSpec(SizeKind.NORMAL, 40)
    rows.append(_row("truncation probability analytic n=40", truncation_probability(spec40), 0.009, 0.002))
    raw = draw_raw_sizes(spec40, rng, draws)
    rows.append(_row("truncation frequency Monte Carlo n=40", np.mean(raw < 9.5), 0.009, 0.002))

    for kind in (SizeKind.UNIFORM, SizeKind.NORMAL):
        spec = SampleSizeSpec(kind, 100)
        n = draw_sample_sizes(spec, rng, draws).astype(np.float64)
        cv = n.std() / n.mean()
        if kind is SizeKind.UNIFORM:
            rows.append(_row(f"CV {kind.value} n=100", cv, 0.318, 0.005))
            rows.append(_row(f"squared CV {kind.value} n=100", cv * cv, 0.101, 0.003))
        else:
            rows.append(_row(f"CV {kind.value} n=100", cv, 0.31, 0.01))
        rows.append(_row(f"nominal squared CV {kind.value}", size_moments(spec)[2] ** 2, 0.101, 0.001))

    for kind in (SizeKind.CONSTANT, SizeKind.NORMAL, SizeKind.UNIFORM):
        spec = SampleSizeSpec(kind, 100)
        for p in (0.1, 0.4):
            n = draw_sample_sizes(spec, rng, draws)
            x = rng.binomial(n, p).astype(np.float64)
            _, var = compound_bernoulli_moments(p, spec, exact=True)
            m4 = np.mean((x - x.mean()) ** 4)
            s2 = x.var(ddof=1)
            se = math.sqrt(max(m4 - s2 * s2, 0.0) / draws)
            rows.append(_row(f"Var(X) {kind.value} n=100 p={p}", s2, var, 3 * se))

    for kind in (SizeKind.CONSTANT, SizeKind.NORMAL, SizeKind.UNIFORM):
        spec = SampleSizeSpec(kind, 100)
        delta = inverse_moment_delta(spec)
        exact = inverse_moment_exact(spec)
        # the clamped normal keeps extra mass at small N, so its delta gap is wider
        rel = {SizeKind.CONSTANT: 1e-12, SizeKind.UNIFORM: 0.025, SizeKind.NORMAL: 0.10}[kind]
        tol = rel * exact
        row = _row(f"E(1/N) delta vs exact {kind.value} n=100", delta, exact, tol)
        row.passed = row.passed and delta <= exact * (1 + 1e-12)
        rows.append(row)
    mean, var, cv = exact_size_moments(SampleSizeSpec(SizeKind.CONSTANT, 100))
    rows.append(_row("constant n=100 variance", var, 0.0, 0.0))
    return rows


def format_check_table(rows):
    lines = [r.line() for r in rows]
    passed = sum(r.passed for r in rows)
    lines.append(f"{passed}/{len(rows)} checks passed")
    return "\n".join(lines)

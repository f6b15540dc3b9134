"""Monte Carlo study of random-effects meta-analysis of log-odds-ratios with
randomly generated study sample sizes."""

__version__ = "0.1.0"

from .datagen import Mechanism, Scenario, StudyData, generate_meta_sample
from .engine import GridConfig, PerformanceRecord, run_grid, run_replication, run_scenario
from .estimators import Correction, MetaEstimate, StudySummary, meta_analyze, study_lor
from .sizes import SampleSizeSpec, SizeKind

__all__ = [
    "Correction",
    "GridConfig",
    "Mechanism",
    "MetaEstimate",
    "PerformanceRecord",
    "SampleSizeSpec",
    "Scenario",
    "SizeKind",
    "StudyData",
    "StudySummary",
    "generate_meta_sample",
    "meta_analyze",
    "run_grid",
    "run_replication",
    "run_scenario",
    "study_lor",
]

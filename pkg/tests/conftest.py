import functools

import numpy as np
import pytest

from artifact.cli import parse_config, run_pipeline
from artifact.potential import PotentialSpec
from artifact.resolvent import RadialGrid
from artifact.suites import suite_config
from artifact.threshold import analyze, tune_coupling

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def suite_run(name, action="full"):
    """Cached in-memory pipeline run of a bundled suite (no files written)."""
    cfg = parse_config(suite_config(name, action))
    report, checks, _ = run_pipeline(cfg, out_dir=None)
    return cfg, report, checks


@functools.lru_cache(maxsize=None)
def tuned_well(ell, n=800, r_max=40.0, ell_max=2):
    grid = RadialGrid(n, r_max)
    base = PotentialSpec("square_well", [1.0])
    spec = base.with_coupling(tune_coupling(base, ell, grid))
    rep, fact = analyze(spec, grid, ell_max)
    return spec, grid, rep, fact


@pytest.fixture(scope="session")
def grid800():
    return RadialGrid(800, 40.0)


@pytest.fixture(scope="session")
def kind1():
    return tuned_well(0)


@pytest.fixture(scope="session")
def kind2():
    return tuned_well(1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

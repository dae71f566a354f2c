import time

import pytest

from spgan.cli import resolve_config
from spgan.config import load_config
from spgan.experiment import run_seed

_VERDICTS = {}
_RUNS = {}


def bundled_runs(name):
    """(SeedRun, seconds) for every variant and seed of a bundled config, computed once."""
    if name not in _RUNS:
        cfg = load_config(resolve_config(name))
        out = []
        for label, params in cfg.variants():
            for seed in cfg.seeds:
                t0 = time.perf_counter()
                run = run_seed(cfg, seed, label, params)
                out.append((run, time.perf_counter() - t0))
        _RUNS[name] = out
    return _RUNS[name]


@pytest.fixture(scope="session")
def runs_for():
    return bundled_runs


@pytest.fixture
def verdict():
    """Record a pass/fail line for the acceptance summary."""
    def record(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        _VERDICTS[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])

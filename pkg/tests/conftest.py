from __future__ import annotations

import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import helpers  # noqa: E402
from gammachain import chain, orbit  # noqa: E402


@pytest.fixture(scope="session")
def example_problem():
    return helpers.example_problem()


@pytest.fixture(scope="session")
def example_field(example_problem):
    return chain.expand(example_problem)


@pytest.fixture(scope="session")
def example_traces(example_field):
    """Full branch traces from both zeros of the worked example, with the
    wall time spent tracing (consumed by the acceptance budget checks)."""
    params = orbit.ContinuationParams()
    start = time.perf_counter()
    traces = {0.0: orbit.trace_from_zero(example_field, 0.0, params),
              1.0: orbit.trace_from_zero(example_field, 1.0, params)}
    elapsed = time.perf_counter() - start
    return {"traces": traces, "elapsed": elapsed, "params": params}

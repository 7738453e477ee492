"""Shared fixtures: bundled-config evaluations and the brute-force battery.

Everything expensive is session-scoped and cached so the acceptance tests
and the per-module tests share one evaluation per bundled config and one
run of the discrete-event equivalence battery.
"""

import functools
import time
from pathlib import Path

import numpy as np
import pytest

import daqflow
from daqflow.config import load_config
from daqflow.scenario import evaluate, sweep

CONFIG_DIR = Path(daqflow.__file__).parent / "configs"

TABLE_FIXTURES = (
    "cms_run3",
    "cms_run5_pu200_r400",
    "cms_run5_phase1",
    "cms_run5_gpu",
    "cms_run5_l1tracks",
    "cms_run5_smart",
    "cms_run5_phase2",
    "cms_run5_smart_gpu",
    "cms_run5_smart_l1",
    "cms_run5_smart_phase2",
)


@functools.lru_cache(maxsize=None)
def _load(name):
    return load_config(CONFIG_DIR / f"{name}.cfg")


@functools.lru_cache(maxsize=None)
def _evaluate(name):
    return evaluate(_load(name))


@pytest.fixture(scope="session")
def load_fixture():
    """Callable: bundled config name -> parsed ModelConfig (cached)."""
    return _load


@pytest.fixture(scope="session")
def eval_fixture():
    """Callable: bundled config name -> EvaluationResult (cached)."""
    return _evaluate


@pytest.fixture(scope="session")
def sweep_rows_pair():
    """The bundled sweep grid evaluated serially and with two workers."""
    cfg = _load("cms_sweep")
    return sweep(cfg, jobs=1), sweep(cfg, jobs=2)


@pytest.fixture(scope="session")
def equivalence_battery():
    """Randomized pipelines checked against the per-message simulator.

    Returns the failure messages (empty on success), the graph count, and
    the wall-clock time of the whole battery.
    """
    import discrete_sim

    n_graphs = 20
    rng = np.random.default_rng(977001)
    failures = []
    t0 = time.perf_counter()
    for i in range(n_graphs):
        graph = discrete_sim.random_pipeline(rng)
        seed = int(rng.integers(2**31))
        for msg in discrete_sim.compare(graph, n_events=1_000_000, seed=seed):
            failures.append(f"graph {i} (seed {seed}): {msg}")
    elapsed = time.perf_counter() - t0
    return {"failures": failures, "n_graphs": n_graphs, "elapsed_s": elapsed}

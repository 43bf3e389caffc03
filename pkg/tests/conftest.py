import os
import time

import hypothesis
import numpy as np
import pytest

from longdist import cli

hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

# (criterion id, description, passed, detail) appended by test_acceptance
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, desc, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {cid:>4} {desc} :: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """Full default-configuration pipeline, seed 0."""
    out = tmp_path_factory.mktemp("desk_seed0")
    start = time.perf_counter()
    result = cli.pipeline(cli.RunConfig.from_dict({"seed": 0}), out)
    result["elapsed"] = time.perf_counter() - start
    return out, result


@pytest.fixture(scope="session")
def small_run(tmp_path_factory):
    """Reduced pipeline for CLI tests: 3,000 train / 500 test, 5 epochs."""
    out = tmp_path_factory.mktemp("small")
    cfg = cli.RunConfig.from_dict({
        "seed": 7,
        "data": {"n_train": 3000, "n_test": 500},
        "train": {"epochs": 5},
        "evaluate": {"sample_n": 200},
    })
    result = cli.pipeline(cfg, out)
    return out, result

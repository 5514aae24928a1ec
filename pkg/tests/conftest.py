"""Shared fixtures: a generated mini-benchmark with the pipeline already run."""

from __future__ import annotations

import pytest

from drselect import synthbench
from drselect.pipeline import run_pipeline


@pytest.fixture(scope="session")
def bench(tmp_path_factory):
    """Generated mini-benchmark, pipeline already run once."""
    root = tmp_path_factory.mktemp("bench")
    config_path = synthbench.generate(root, seed=7)
    cfg = run_pipeline(config_path)
    return {"root": root, "config": config_path, "out": cfg.out_dir, "cfg": cfg}

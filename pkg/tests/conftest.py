"""Shared fixtures: one full pipeline run reused by the expensive tests."""

import time

import pytest

from jostfit import cli


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    """Full default run (generate -> fit -> poles -> report), timed.

    Everything the acceptance gate needs from the fitted model comes out of
    this single run, so the wall-clock budget is measured once.
    """
    out = tmp_path_factory.mktemp("pipeline")
    cfg = cli.load_config(None)
    t0 = time.monotonic()
    rc = cli.cmd_all(cfg, out, None, None)
    elapsed = time.monotonic() - t0
    assert rc == 0, f"pipeline exited with {rc}"
    return {"out": out, "cfg": cfg, "elapsed": elapsed}


@pytest.fixture(scope="session")
def fitted_resonances(pipeline):
    import json

    path = pipeline["out"] / "resonances_jost.json"
    return json.loads(path.read_text())


@pytest.fixture(scope="session")
def fitted_params(pipeline):
    from jostfit import fitting

    _, result = fitting.fit_result_from_json(
        (pipeline["out"] / "fit_jost.json").read_text()
    )
    return result

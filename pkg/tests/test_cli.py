"""Command-line pipeline: config handling, stages, artifacts, exit codes."""

import json

import pytest

from jostfit import cli
from jostfit.errors import ConfigError

TINY_TOML = """
[dataset]
n_points = 26
window = []
file = "data.csv"

[fit]
n_starts = 3
maxiter = 4000
cycles = 2

[fit.scan]
enable = false

[poles]
re_range = [1.5, 5.0]
im_range = [-2.0, -0.01]

[report]
n_curve = 12
insert_points = 6
reference = [[0, 1.78, 0.01, 0.5, 5.0]]
"""


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    config = root / "run.toml"
    config.write_text(TINY_TOML)
    out = root / "out"
    rc = cli.main(["all", "--config", str(config), "--out", str(out)])
    assert rc == 0
    return {"config": config, "out": out, "root": root}


def test_load_config_defaults():
    cfg = cli.load_config(None)
    assert cfg["dataset"]["n_points"] == 40
    assert cfg["fit"]["model"] == "jost"
    assert cfg["poles"]["k_branch"] == -1


def test_load_config_merge(tiny_run):
    cfg = cli.load_config(str(tiny_run["config"]))
    assert cfg["dataset"]["n_points"] == 6
    # untouched keys keep their defaults
    assert cfg["dataset"]["l_max"] == 2
    assert cfg["fit"]["seed"] == 1


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        cli.load_config(str(tmp_path / "absent.toml"))
    bad = tmp_path / "bad.toml"
    bad.write_text("dataset = [unclosed")
    with pytest.raises(ConfigError):
        cli.load_config(str(bad))
    unknown = tmp_path / "unknown.toml"
    unknown.write_text("[dataset]\nno_such_key = 1\n")
    with pytest.raises(ConfigError):
        cli.load_config(str(unknown))


def test_unknown_config_key_exit_code(tmp_path):
    cfg = tmp_path / "u.toml"
    cfg.write_text("[fit]\nbogus = 3\n")
    assert cli.main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_pipeline_artifacts(tiny_run):
    out = tiny_run["out"]
    assert (out / "data.csv").is_file()
    rows = (out / "data.csv").read_text().splitlines()
    assert rows[0] == "E,sigma_total,delta"
    assert len(rows) == 27  # header + n_points
    assert (out / "fit_jost.json").is_file()
    table = (out / "params_jost.csv").read_text().splitlines()
    assert len(table) == 13  # header + 12 parameter rows
    assert (out / "resonances_jost.csv").read_text().startswith("l,E_r,Gamma,")
    for tag in ("curve", "insert"):
        for name in ("l0", "l1", "l2", "total"):
            path = out / f"{tag}_sigma_{name}_jost.csv"
            assert path.is_file()
            assert path.read_text().splitlines()[0] == "E,sigma_exact,sigma_fit"
    summary = (out / "summary_jost.csv").read_text().splitlines()
    assert summary[0].startswith("l,E_ref,Gamma_ref")
    assert len(summary) == 2
    assert summary[1].rstrip().endswith(("PASS", "FAIL", "MISSING"))


def test_fit_rerun_is_deterministic(tiny_run):
    out = tiny_run["out"]
    first = (out / "fit_jost.json").read_bytes()
    rc = cli.main(["fit", "--config", str(tiny_run["config"]), "--out", str(out)])
    assert rc == 0
    assert (out / "fit_jost.json").read_bytes() == first


def test_zero_budget_fit_not_converged(tiny_run, tmp_path):
    cfg = tmp_path / "zero.toml"
    cfg.write_text(TINY_TOML.replace("maxiter = 4000", "maxiter = 0"))
    out = tmp_path / "o"
    assert cli.main(["generate", "--config", str(cfg), "--out", str(out)]) == 0
    assert cli.main(["fit", "--config", str(cfg), "--out", str(out)]) == 4
    stored = json.loads((out / "fit_jost.json").read_text())
    assert stored["converged"] is False


def test_missing_artifact_exit_code(tiny_run, tmp_path):
    out = tmp_path / "empty_out"
    assert cli.main(["poles", "--config", str(tiny_run["config"]), "--out", str(out)]) == 2
    assert cli.main(["report", "--config", str(tiny_run["config"]), "--out", str(out)]) == 2
    # fit without a dataset is also a staged-order error
    assert cli.main(["fit", "--config", str(tiny_run["config"]), "--out", str(out)]) == 2


def test_rmatrix_fit_and_poles(tiny_run):
    out = tiny_run["out"]
    rc = cli.main(["rfit", "--config", str(tiny_run["config"]), "--out", str(out)])
    assert rc in (0, 4)
    table = (out / "params_rmatrix.csv").read_text().splitlines()
    assert len(table) == 12  # header + 11 parameter rows
    rc = cli.main(["poles", "--config", str(tiny_run["config"]), "--out", str(out), "--model", "rmatrix"])
    assert rc == 0
    assert (out / "resonances_rmatrix.csv").is_file()
    # report curves are defined for the jost-type models only
    rc = cli.main(["report", "--config", str(tiny_run["config"]), "--out", str(out), "--model", "rmatrix"])
    assert rc == 2


def test_empty_pole_region(tiny_run, tmp_path):
    cfg = tmp_path / "far.toml"
    cfg.write_text(
        TINY_TOML.replace("re_range = [1.5, 5.0]", "re_range = [30.0, 30.5]").replace(
            "im_range = [-2.0, -0.01]", "im_range = [-0.2, -0.01]"
        )
    )
    out = tiny_run["out"]
    rc = cli.main(["poles", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    assert (out / "resonances_jost.csv").read_text() == "l,E_r,Gamma,Re_E,Im_E,sheet\n"


def test_unknown_model_rejected(tiny_run):
    with pytest.raises(SystemExit):
        cli.main(["fit", "--model", "nope"])

"""Command line contract: exit codes, artifact layout, determinism.

Everything runs in process through main(argv). Oracles: reruns and worker
fan-out must produce byte-identical artifacts, usage failures must leave no
output behind, and the exit code map (0 pass, 1 check failed, 2 usage,
3 resource) is pinned with stubbed runners so no expensive work is needed.
"""

import json

import pytest

from branchwalk import cli
from branchwalk.config import RunConfig
from branchwalk.csvio import read_csv
from branchwalk.tree import ArenaCapacityError


@pytest.fixture(autouse=True)
def _no_jobs_env(monkeypatch):
    monkeypatch.delenv("BRANCHWALK_JOBS", raising=False)


@pytest.fixture(scope="module")
def small_cfg_path(tmp_path_factory):
    cfg = RunConfig(family="f2", master_seed=12, replicas=10,
                    n_grid=(200, 600), m_grid=(200,), eps_grid=(0.3, 1.0))
    path = tmp_path_factory.mktemp("cfg") / "small.json"
    cfg.dump(path)
    return path


def read_all(out):
    """(summary text, {csv name: raw bytes}) for one output directory."""
    summary = (out / "summary.txt").read_text(encoding="utf-8")
    tables = {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}
    return summary, tables


# ---------------------------------------------------------------------------
# usage and exit codes
# ---------------------------------------------------------------------------


def test_version_flag_exits_clean(capsys):
    assert cli.main(["--version"]) == cli.EXIT_OK
    assert "branchwalk" in capsys.readouterr().out


def test_unknown_subcommand_is_usage_error():
    assert cli.main(["frobnicate"]) == cli.EXIT_USAGE


def test_missing_required_flag_is_usage_error():
    assert cli.main(["simulate"]) == cli.EXIT_USAGE


def test_zero_steps_is_refused_before_any_write(tmp_path):
    out = tmp_path / "never"
    code = cli.main(["simulate", "--n", "0", "--out", str(out)])
    assert code == cli.EXIT_USAGE
    assert not out.exists()


def test_missing_config_file_is_usage_error(tmp_path):
    code = cli.main(["calibrate", "--config", str(tmp_path / "no.json")])
    assert code == cli.EXIT_USAGE


def test_unknown_config_key_is_usage_error(tmp_path):
    path = tmp_path / "bad.json"
    doc = RunConfig().to_doc()
    doc["tpyo"] = 1
    path.write_text(json.dumps(doc), encoding="utf-8")
    assert cli.main(["calibrate", "--config", str(path)]) == cli.EXIT_USAGE


def test_bad_jobs_env_is_usage_error(monkeypatch, tmp_path):
    monkeypatch.setenv("BRANCHWALK_JOBS", "many")
    code = cli.main(["calibrate", "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_USAGE


def test_failed_check_exits_one(monkeypatch, tmp_path):
    bad = cli.RunResult()
    bad.add("stub:check", False, "forced")
    monkeypatch.setattr(cli, "_dispatch", lambda *a: bad)
    out = tmp_path / "o"
    assert cli.main(["calibrate", "--out", str(out)]) == cli.EXIT_CHECK_FAILED
    summary = (out / "summary.txt").read_text(encoding="utf-8")
    assert "stub:check: FAIL  (forced)" in summary
    assert summary.rstrip().endswith("overall: FAIL")


def test_partial_result_exits_resource(monkeypatch, tmp_path):
    part = cli.RunResult()
    part.add("stub:check", True)
    part.partial = True
    monkeypatch.setattr(cli, "_dispatch", lambda *a: part)
    out = tmp_path / "o"
    assert cli.main(["calibrate", "--out", str(out)]) == cli.EXIT_RESOURCE
    summary = (out / "summary.txt").read_text(encoding="utf-8")
    assert summary.rstrip().endswith("overall: PARTIAL")


def test_resource_exception_exits_resource(monkeypatch, tmp_path, capsys):
    def boom(*a):
        raise ArenaCapacityError("arena full")
    monkeypatch.setattr(cli, "_dispatch", boom)
    code = cli.main(["calibrate", "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_RESOURCE
    assert "resource error" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def test_calibrate_writes_the_full_artifact_set(tmp_path, capsys):
    out = tmp_path / "cal"
    code = cli.main(["calibrate", "--family", "f1", "--out", str(out)])
    assert code == cli.EXIT_OK
    assert (out / "law_f1.json").exists()
    assert (out / "config.json").exists()
    summary = (out / "summary.txt").read_text(encoding="utf-8")
    assert summary.rstrip().endswith("overall: PASS")
    assert summary == capsys.readouterr().out
    # the summary never mentions scheduling knobs
    assert "jobs" not in summary

    cfg = RunConfig.load(out / "config.json")
    assert cfg.family == "f1"
    table = read_csv(out / "calibrate.csv")
    assert table.schema == "calibrate"
    assert table.meta["config_hash"] == cfg.config_hash
    assert f"config_hash: {cfg.config_hash}" in summary
    assert float(table.meta["sigma2"]) > 0


def test_simulate_emits_per_replica_and_site_tables(tmp_path):
    out = tmp_path / "sim"
    code = cli.main(["simulate", "--family", "f2", "--seed", "3",
                     "--replicas", "4", "--n", "500", "--top", "5",
                     "--out", str(out)])
    assert code == cli.EXIT_OK
    walks = read_csv(out / "simulate.csv")
    assert len(walks.rows) == 4
    assert all(r[walks.columns.index("steps")] == 500 for r in walks.rows)
    assert all(r[-1] == 1 for r in walks.rows)  # favorites audit bit
    sites = read_csv(out / "simulate_sites.csv")
    assert sites.meta["top"] == "5"
    assert set(sites.column("replica")) == {0, 1, 2, 3}


# ---------------------------------------------------------------------------
# determinism
# ---------------------------------------------------------------------------


def test_rerun_is_byte_identical(small_cfg_path, tmp_path, capsys):
    argv = ["prop23", "--config", str(small_cfg_path)]
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(argv + ["--out", str(out)]) == cli.EXIT_OK
        outs.append(read_all(out))
    capsys.readouterr()
    assert outs[0] == outs[1]


def test_worker_count_does_not_change_artifacts(small_cfg_path, tmp_path,
                                                monkeypatch, capsys):
    # corollary22 needs a real cohort; the fan-out must not change a byte
    argv = ["corollary22", "--config", str(small_cfg_path),
            "--replicas", "100"]
    out1 = tmp_path / "j1"
    assert cli.main(argv + ["--out", str(out1), "--jobs", "1"]) == cli.EXIT_OK
    out4 = tmp_path / "j4"
    assert cli.main(argv + ["--out", str(out4), "--jobs", "4"]) == cli.EXIT_OK
    outenv = tmp_path / "jenv"
    monkeypatch.setenv("BRANCHWALK_JOBS", "3")
    assert cli.main(argv + ["--out", str(outenv)]) == cli.EXIT_OK
    capsys.readouterr()
    assert read_all(out1) == read_all(out4) == read_all(outenv)
    # resolved worker counts are recorded in the config, not the summary
    assert RunConfig.load(out4 / "config.json").jobs == 4
    assert RunConfig.load(outenv / "config.json").jobs == 3
    assert (RunConfig.load(out1 / "config.json").config_hash
            == RunConfig.load(out4 / "config.json").config_hash)


def test_flags_override_config_file(small_cfg_path, tmp_path, capsys):
    out = tmp_path / "o"
    code = cli.main(["prop23", "--config", str(small_cfg_path),
                     "--seed", "77", "--replicas", "6", "--out", str(out)])
    assert code == cli.EXIT_OK
    capsys.readouterr()
    cfg = RunConfig.load(out / "config.json")
    assert cfg.master_seed == 77
    assert cfg.replicas == 6
    assert cfg.family == "f2"
    table = read_csv(out / "prop23.csv")
    assert set(table.column("eps")) == {0.3, 1.0}

"""Run configuration: validation, serialization round trips, hashing.

Oracles: the JSON round trip is checked for exact equality, the hash is
checked behaviorally (equal documents agree, semantic edits disagree,
scheduling edits do not), and every validation rule is hit with one value
just inside and one just outside its domain.
"""

import json
import math

import pytest

from branchwalk.config import KNOWN_CHECKS, RunConfig


# ---------------------------------------------------------------------------
# construction and validation
# ---------------------------------------------------------------------------


def test_defaults_are_valid_and_frozen():
    cfg = RunConfig()
    assert cfg.family == "f2"
    assert cfg.checks == KNOWN_CHECKS
    with pytest.raises(AttributeError):
        cfg.family = "f1"


@pytest.mark.parametrize("kw", [
    dict(family="f9"),
    dict(master_seed=-1),
    dict(master_seed=1 << 64),
    dict(replicas=0),
    dict(n_grid=()),
    dict(n_grid=(100, 100)),
    dict(n_grid=(1000, 100)),
    dict(n_grid=(1,)),
    dict(m_grid=(0,)),
    dict(eps_grid=()),
    dict(eps_grid=(0.0,)),
    dict(eps_grid=(1.2,)),
    dict(gamma=2.0),
    dict(lambda_cap=0.0),
    dict(arena_cap=100),
    dict(jobs=0),
    dict(checks=("theorem21", "nosuch")),
])
def test_invalid_values_are_rejected(kw):
    with pytest.raises(ValueError):
        RunConfig(**kw)


@pytest.mark.parametrize("kw", [
    dict(master_seed=(1 << 64) - 1),
    dict(n_grid=(2,)),
    dict(eps_grid=(1.0,)),
    dict(gamma=1.999),
    dict(arena_cap=1 << 14),
    dict(checks=()),
])
def test_boundary_values_are_accepted(kw):
    RunConfig(**kw)


def test_law_resolves_preset_and_explicit_params():
    assert RunConfig(family="f1").law().sigma2 > 0
    cfg = RunConfig(family="f1", law_params={"q": 0.25})
    assert cfg.law().sigma2 == pytest.approx(RunConfig(family="f1").law().sigma2)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_json_round_trip_is_exact():
    cfg = RunConfig(family="f1", master_seed=99, replicas=7,
                    n_grid=(100, 200), m_grid=(50, 500), gamma=1.25,
                    eps_grid=(0.3, 1.0), jobs=3, checks=("barrier",))
    again = RunConfig.from_json(cfg.to_json())
    assert again == cfg
    assert isinstance(again.n_grid, tuple)
    assert isinstance(again.eps_grid[0], float)


def test_file_round_trip(tmp_path):
    cfg = RunConfig(master_seed=5)
    path = tmp_path / "cfg.json"
    cfg.dump(path)
    assert RunConfig.load(path) == cfg
    # the file is plain sorted JSON with a trailing newline
    text = path.read_text(encoding="utf-8")
    assert text.endswith("\n")
    assert json.loads(text)["master_seed"] == 5


def test_unknown_keys_are_rejected():
    doc = RunConfig().to_doc()
    doc["typo_key"] = 1
    with pytest.raises(ValueError, match="typo_key"):
        RunConfig.from_doc(doc)


def test_with_overrides_ignores_none():
    cfg = RunConfig()
    assert cfg.with_overrides(master_seed=None, jobs=None) is cfg
    bumped = cfg.with_overrides(master_seed=None, jobs=4)
    assert bumped.jobs == 4
    assert bumped.master_seed == cfg.master_seed
    with pytest.raises(ValueError):
        cfg.with_overrides(jobs=0)


# ---------------------------------------------------------------------------
# identity hash
# ---------------------------------------------------------------------------


def test_hash_is_sha256_hex_and_stable():
    cfg = RunConfig()
    h = cfg.config_hash
    assert len(h) == 64 and set(h) <= set("0123456789abcdef")
    assert RunConfig.from_json(cfg.to_json()).config_hash == h


def test_hash_tracks_semantic_fields_only():
    base = RunConfig()
    assert base.with_overrides(master_seed=1).config_hash != base.config_hash
    assert base.with_overrides(replicas=9).config_hash != base.config_hash
    assert base.with_overrides(gamma=1.2).config_hash != base.config_hash
    # scheduling and placement knobs leave the identity untouched
    same = base.with_overrides(out_dir="elsewhere", jobs=16,
                               checks=("spine",))
    assert same.config_hash == base.config_hash


def test_hash_independent_of_lambda_cap_representation():
    # equal float values hash identically even if spelled differently
    a = RunConfig(lambda_cap=math.expm1(3.0))
    b = RunConfig(lambda_cap=float("%.17g" % math.expm1(3.0)))
    assert a.config_hash == b.config_hash

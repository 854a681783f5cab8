"""Config file loading and environment overrides."""

import pytest

from cellcrowd.orchestrator.config import OrchestratorConfig


def test_defaults():
    config = OrchestratorConfig.load(env={})
    assert config.port == 8040
    assert config.k == 5
    assert config.reward_cents == 1
    assert config.claim_ttl_seconds == 3600.0
    assert config.task_ttl_seconds == 3 * 86400.0
    assert config.auto_approve_seconds == 7 * 86400.0
    assert config.min_approval_rate == 0.90


def test_yaml_file(tmp_path):
    path = tmp_path / "orc.yaml"
    path.write_text("port: 9000\nk: 7\nreward_cents: 2\n")
    config = OrchestratorConfig.load(path, env={})
    assert (config.port, config.k, config.reward_cents) == (9000, 7, 2)


def test_env_overrides_file(tmp_path):
    path = tmp_path / "orc.yaml"
    path.write_text("port: 9000\nrequire_master: true\n")
    env = {
        "CELLCROWD_PORT": "9100",
        "CELLCROWD_CLAIM_TTL_SECONDS": "120.5",
        "CELLCROWD_REQUIRE_MASTER": "false",
        "CELLCROWD_DATA_DIR": "/tmp/x",
    }
    config = OrchestratorConfig.load(path, env=env)
    assert config.port == 9100
    assert config.claim_ttl_seconds == 120.5
    assert config.require_master is False
    assert config.data_dir == "/tmp/x"


def test_json_file(tmp_path):
    path = tmp_path / "orc.json"
    path.write_text('{"port": 8555}')
    assert OrchestratorConfig.load(path, env={}).port == 8555


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "orc.yaml"
    path.write_text("bogus: 1\n")
    with pytest.raises(ValueError, match="bogus"):
        OrchestratorConfig.load(path, env={})

import json

import pytest

from records import (
    RunManifest,
    connect,
    get_record,
    recent_manifests,
    save_manifest,
    text_digest,
    update_record_max,
    update_record_min,
)


@pytest.fixture
def conn(tmp_path):
    c = connect(tmp_path / "sub" / "runs.db")
    yield c
    c.close()


def test_manifest_round_trip(conn, tmp_path):
    cfg = tmp_path / "config.yaml"
    cfg.write_text("app: {}\n")
    manifest = RunManifest("tfim", str(cfg), seed=7)
    manifest.add_input("config", cfg)
    manifest.add_output("report", '{"P": 1}')
    row_id = save_manifest(conn, manifest)
    (row,) = recent_manifests(conn, "tfim")
    assert row["id"] == row_id
    assert row["seed"] == 7
    assert json.loads(row["outputs_json"]) == {"report": text_digest('{"P": 1}')}
    assert recent_manifests(conn, "compile") == []


def test_min_record_keeps_the_lightest(conn):
    changed, prev = update_record_min(conn, "gross/Z1", 14, {"trials": 5})
    assert changed and prev is None
    changed, _ = update_record_min(conn, "gross/Z1", 14 + 1e-12, {})
    assert not changed
    changed, prev = update_record_min(conn, "gross/Z1", 12, {"trials": 50})
    assert changed and prev[0] == 14
    value, meta, _ = get_record(conn, "gross/Z1")
    assert (value, meta) == (12, {"trials": 50})


def test_max_record(conn):
    update_record_max(conn, "capability", 10.0, {})
    assert update_record_max(conn, "capability", 9.0, {})[0] is False
    assert update_record_max(conn, "capability", 11.0, {})[0] is True
    assert get_record(conn, "missing") is None

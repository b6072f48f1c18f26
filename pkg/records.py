from dotenv import load_dotenv
load_dotenv()

import hashlib
import json
import logging
import sqlite3
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from tables import DB_PATH, ROOT

log = logging.getLogger(__name__)

TOOL_VERSION = "0.1.0"
SCHEMA_PATH = ROOT / "schema.sql"


# -------------------- connection --------------------
def ensure_schema(conn, schema_path=SCHEMA_PATH):
    with open(schema_path, "r", encoding="utf-8") as f:
        conn.executescript(f.read())


def connect(db_path=None) -> sqlite3.Connection:
    path = Path(db_path or DB_PATH).expanduser()
    path.parent.mkdir(parents=True, exist_ok=True)
    conn = sqlite3.connect(path)
    conn.row_factory = sqlite3.Row
    ensure_schema(conn)
    return conn


# -------------------- run manifests --------------------
def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_path: str = None
    seed: int = None
    version: str = TOOL_VERSION
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    created_at: int = field(default_factory=lambda: int(time.time()))

    def add_input(self, name, path):
        self.inputs[name] = file_digest(path)

    def add_output(self, name, payload: str):
        self.outputs[name] = text_digest(payload)

    def to_dict(self) -> dict:
        return asdict(self)


def save_manifest(conn, manifest: RunManifest) -> int:
    cur = conn.execute(
        """
        INSERT INTO run_manifests (command, config_path, seed, version, inputs_json, outputs_json, created_at)
        VALUES (?, ?, ?, ?, ?, ?, ?)
        """,
        (
            manifest.command,
            manifest.config_path,
            manifest.seed,
            manifest.version,
            json.dumps(manifest.inputs, sort_keys=True),
            json.dumps(manifest.outputs, sort_keys=True),
            manifest.created_at,
        ),
    )
    conn.commit()
    return cur.lastrowid


def recent_manifests(conn, command: str = None, limit: int = 10) -> list:
    if command:
        rows = conn.execute(
            "SELECT * FROM run_manifests WHERE command = ? ORDER BY id DESC LIMIT ?", (command, limit)
        ).fetchall()
    else:
        rows = conn.execute("SELECT * FROM run_manifests ORDER BY id DESC LIMIT ?", (limit,)).fetchall()
    return [dict(r) for r in rows]


# -------------------- records (best known values) --------------------
def get_record(conn, key: str):
    row = conn.execute(
        "SELECT value, meta_json, updated_at FROM records WHERE key = ?",
        (key,),
    ).fetchone()
    if not row:
        return None
    meta = {}
    if row["meta_json"]:
        try:
            meta = json.loads(row["meta_json"])
        except json.JSONDecodeError:
            log.warning("record %s has unreadable metadata", key)
    return float(row["value"]), meta, int(row["updated_at"])


def set_record(conn, key: str, value: float, meta: dict):
    conn.execute(
        """
        INSERT INTO records (key, value, meta_json, updated_at)
        VALUES (?, ?, ?, CAST(strftime('%s','now') AS INTEGER))
        ON CONFLICT(key) DO UPDATE SET
          value = excluded.value,
          meta_json = excluded.meta_json,
          updated_at = CAST(strftime('%s','now') AS INTEGER)
        """,
        (key, float(value), json.dumps(meta)),
    )
    conn.commit()


def update_record_max(conn, key: str, new_value: float, meta: dict):
    prev = get_record(conn, key)
    if prev is None or new_value > prev[0] + 1e-9:
        set_record(conn, key, new_value, meta)
        return True, prev
    return False, prev


def update_record_min(conn, key: str, new_value: float, meta: dict):
    prev = get_record(conn, key)
    if prev is None or new_value < prev[0] - 1e-9:
        set_record(conn, key, new_value, meta)
        return True, prev
    return False, prev

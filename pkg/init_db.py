from dotenv import load_dotenv
load_dotenv()

from pathlib import Path

from records import connect
from tables import DB_PATH


def main():
    path = Path(DB_PATH).expanduser().resolve()
    conn = connect(path)
    conn.execute("PRAGMA foreign_keys = ON;")
    tables = [r[0] for r in conn.execute("SELECT name FROM sqlite_master WHERE type = 'table' ORDER BY name")]
    conn.close()
    print(f"✅ Database initialized: {path} ({', '.join(t for t in tables if not t.startswith('sqlite_'))})")


if __name__ == "__main__":
    main()

"""SQLite persistence for registrations and per-vantage verification results."""

from __future__ import annotations

import sqlite3
import threading
from dataclasses import dataclass, field

SCHEMA = """
CREATE TABLE IF NOT EXISTS registrations (
    domain TEXT PRIMARY KEY,
    include_subdomains INTEGER NOT NULL,
    status TEXT NOT NULL,
    submitted_at INTEGER NOT NULL,
    last_verified_at INTEGER,
    last_round INTEGER
);
CREATE TABLE IF NOT EXISTS vantage_results (
    round INTEGER NOT NULL,
    domain TEXT NOT NULL,
    vantage TEXT NOT NULL,
    passed INTEGER NOT NULL,
    reason TEXT NOT NULL,
    checked_at INTEGER NOT NULL,
    PRIMARY KEY (round, vantage)
);
CREATE INDEX IF NOT EXISTS vantage_results_domain ON vantage_results (domain, round);
"""

PENDING = "Pending"
VERIFIED = "Verified"
REJECTED = "Rejected"
LAPSED = "Lapsed"
STATUSES = (PENDING, VERIFIED, REJECTED, LAPSED)


@dataclass(frozen=True)
class VantageResult:
    vantage: str
    passed: bool
    reason: str


@dataclass(frozen=True)
class Registration:
    domain: str
    include_subdomains: bool
    status: str
    submitted_at: int
    last_verified_at: int | None = None
    vantage_results: tuple = field(default_factory=tuple)

    def to_json(self) -> dict:
        return {
            "domain": self.domain,
            "include_subdomains": self.include_subdomains,
            "status": self.status,
            "submitted_at": self.submitted_at,
            "last_verified_at": self.last_verified_at,
            "vantage_results": [{"vantage": v.vantage, "passed": v.passed, "reason": v.reason}
                                for v in self.vantage_results],
        }


class Store:
    """Narrow storage interface; all methods are serialized on one connection."""

    def __init__(self, path: str = ":memory:"):
        self._db = sqlite3.connect(path, check_same_thread=False, isolation_level=None)
        self._lock = threading.RLock()
        with self._lock:
            self._db.executescript(SCHEMA)

    def close(self):
        with self._lock:
            self._db.close()

    def _row(self, row) -> Registration | None:
        if row is None:
            return None
        domain, sub, status, submitted, verified, last_round = row
        results = ()
        if last_round is not None:
            results = tuple(VantageResult(v, bool(p), r) for v, p, r in self._db.execute(
                "SELECT vantage, passed, reason FROM vantage_results WHERE round = ? "
                "ORDER BY vantage", (last_round,)))
        return Registration(domain, bool(sub), status, submitted, verified, results)

    def get(self, domain: str) -> Registration | None:
        with self._lock:
            return self._row(self._db.execute(
                "SELECT domain, include_subdomains, status, submitted_at, last_verified_at, "
                "last_round FROM registrations WHERE domain = ?", (domain,)).fetchone())

    def all(self, status: str | None = None) -> list[Registration]:
        with self._lock:
            query = ("SELECT domain, include_subdomains, status, submitted_at, last_verified_at, "
                     "last_round FROM registrations")
            args = ()
            if status is not None:
                query += " WHERE status = ?"
                args = (status,)
            rows = self._db.execute(query + " ORDER BY domain", args).fetchall()
            return [self._row(r) for r in rows]

    def upsert(self, domain: str, include_subdomains: bool, status: str, submitted_at: int):
        with self._lock:
            self._db.execute(
                "INSERT INTO registrations (domain, include_subdomains, status, submitted_at) "
                "VALUES (?, ?, ?, ?) ON CONFLICT(domain) DO UPDATE SET "
                "include_subdomains = excluded.include_subdomains, status = excluded.status, "
                "submitted_at = excluded.submitted_at, last_round = NULL",
                (domain, int(include_subdomains), status, submitted_at))

    def record_round(self, domain: str, results, status: str, now: int) -> int:
        """Store one verification round atomically and return its number."""
        with self._lock:
            db = self._db
            db.execute("BEGIN IMMEDIATE")
            try:
                (last,) = db.execute("SELECT COALESCE(MAX(round), 0) FROM vantage_results").fetchone()
                number = last + 1
                db.executemany(
                    "INSERT INTO vantage_results VALUES (?, ?, ?, ?, ?, ?)",
                    [(number, domain, r.vantage, int(r.passed), r.reason, now) for r in results])
                verified_at = ", last_verified_at = ?" if status == VERIFIED else ""
                args = [status, number] + ([now] if status == VERIFIED else []) + [domain]
                db.execute(f"UPDATE registrations SET status = ?, last_round = ?{verified_at} "
                           "WHERE domain = ?", args)
                db.execute("COMMIT")
            except Exception:
                db.execute("ROLLBACK")
                raise
            return number

    def delete(self, domain: str) -> bool:
        with self._lock:
            cur = self._db.execute("DELETE FROM registrations WHERE domain = ?", (domain,))
            self._db.execute("DELETE FROM vantage_results WHERE domain = ?", (domain,))
            return cur.rowcount > 0

    def rounds_completed(self) -> int:
        with self._lock:
            (count,) = self._db.execute("SELECT COUNT(DISTINCT round) FROM vantage_results").fetchone()
            return count

    @property
    def published_version(self) -> int:
        with self._lock:
            (version,) = self._db.execute("PRAGMA user_version").fetchone()
            return version

    def set_published_version(self, version: int):
        with self._lock:
            self._db.execute(f"PRAGMA user_version = {int(version)}")

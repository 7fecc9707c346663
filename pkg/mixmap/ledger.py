import json
import logging
import sqlite3
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import pyfiglet
from deepdiff import DeepDiff

logger = logging.getLogger('MixMap.Ledger')

ALL_CLEAR = "ALL CLEAR"
CHANGES_DETECTED = "CHANGES DETECTED"
FAILURES = "FAILURES"


class RunLedger:
    """sqlite record of verification runs and per-suite outcomes."""

    def __init__(self, db_path: str):
        self.db_path = db_path
        self.logger = logging.getLogger('MixMap.Ledger.RunLedger')
        Path(db_path).parent.mkdir(parents=True, exist_ok=True)
        self._init_db()

    def _init_db(self) -> None:
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    timestamp DATETIME NOT NULL,
                    command TEXT NOT NULL,
                    config JSON NOT NULL,
                    report JSON NOT NULL
                )
            """)
            conn.execute("""
                CREATE TABLE IF NOT EXISTS suite_activity (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id INTEGER NOT NULL,
                    suite TEXT NOT NULL,
                    status TEXT NOT NULL,
                    detail JSON,
                    timestamp DATETIME NOT NULL,
                    FOREIGN KEY (run_id) REFERENCES runs(id)
                )
            """)
            conn.commit()

    def save_run(self, command: str, config: Dict[str, Any], report: Dict[str, Any]) -> int:
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute(
                "INSERT INTO runs (timestamp, command, config, report) VALUES (?, ?, ?, ?)",
                (datetime.now().isoformat(), command, json.dumps(config, sort_keys=True), json.dumps(report))
            )
            return cursor.lastrowid

    def log_suite(self, run_id: int, suite: str, status: str, detail: Optional[Dict[str, Any]] = None) -> None:
        with sqlite3.connect(self.db_path) as conn:
            conn.execute(
                "INSERT INTO suite_activity (run_id, suite, status, detail, timestamp) VALUES (?, ?, ?, ?, ?)",
                (run_id, suite, status, json.dumps(detail or {}), datetime.now().isoformat())
            )
            conn.commit()

    def previous_report(self, run_id: int) -> Optional[Dict[str, Any]]:
        """Report of the latest earlier run with the same command and configuration."""
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            current = conn.execute("SELECT command, config FROM runs WHERE id = ?", (run_id,)).fetchone()
            if current is None:
                return None
            row = conn.execute(
                "SELECT report FROM runs WHERE command = ? AND config = ? AND id < ? ORDER BY id DESC LIMIT 1",
                (current['command'], current['config'], run_id)
            ).fetchone()
            return json.loads(row['report']) if row else None

    def suite_history(self, suite: str, limit: int = 10) -> List[Dict[str, Any]]:
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            cursor = conn.execute(
                "SELECT run_id, status, detail, timestamp FROM suite_activity "
                "WHERE suite = ? ORDER BY id DESC LIMIT ?",
                (suite, limit)
            )
            return [
                {
                    'run_id': row['run_id'],
                    'status': row['status'],
                    'detail': json.loads(row['detail']),
                    'timestamp': row['timestamp'],
                }
                for row in cursor.fetchall()
            ]

    def record(self, command: str, config: Dict[str, Any], report: Dict[str, Any]) -> str:
        """Store a verify report, compare it with the previous matching run and show a banner.

        Returns:
            The banner text: ALL CLEAR, CHANGES DETECTED or FAILURES.
        """
        run_id = self.save_run(command, config, report)
        self.logger.info(f"Run saved to ledger with ID: {run_id}")
        failed = False
        for suite in report.get("suites", []):
            status = "passed" if suite.get("passed") else "failed"
            failed = failed or status == "failed"
            self.log_suite(run_id, suite.get("name", "?"), status, {"failures": suite.get("failures", [])})

        previous = self.previous_report(run_id)
        diff = DeepDiff(previous, report, ignore_order=True) if previous is not None else {}
        if failed:
            banner = FAILURES
        elif diff:
            banner = CHANGES_DETECTED
        else:
            banner = ALL_CLEAR
        self._display(banner, diff)
        return banner

    def _display(self, banner: str, diff) -> None:
        self.logger.info(f"Status: {banner}")
        if diff:
            for change_type, changes in diff.items():
                self.logger.debug(f"{change_type}: {changes}")
        sys.stdout.write("\033[K")
        print("\n" + pyfiglet.figlet_format(banner, font='standard'))

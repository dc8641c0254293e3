import aiosqlite
import asyncio
import logging
from datetime import datetime

import pytz

from config import config

logger = logging.getLogger(__name__)

RUN_STATUSES = ("running", "finished", "failed")


class RunLedger:
    """SQLite record of every experiment run and its events."""

    def __init__(self, db_path: str | None = None):
        self.db_path = db_path or config.LEDGER_PATH
        self.write_conn = None
        self.write_lock = asyncio.Lock()
        self.init_lock = asyncio.Lock()
        self.initialized = False

    # -----------------------------------------------------------
    # initialization and shutdown
    # -----------------------------------------------------------
    async def initialize(self):
        async with self.init_lock:
            if self.initialized:
                return
            try:
                # إنشاء اتصال الكتابة
                self.write_conn = await aiosqlite.connect(self.db_path)
                await self.write_conn.execute("PRAGMA foreign_keys = ON;")
                await self.write_conn.execute("PRAGMA journal_mode = WAL;")
                await self.write_conn.execute("PRAGMA busy_timeout = 5000;")
                await self.write_conn.execute("PRAGMA synchronous = NORMAL;")
                self.write_conn.row_factory = aiosqlite.Row

                # إنشاء الجداول والفهارس
                await self._create_tables()

                self.initialized = True
                logger.info(f"✅ Run ledger ready at {self.db_path}")
            except Exception as e:
                logger.error(f"❌ Run ledger init error: {e}")
                await self._cleanup()
                raise

    async def _create_tables(self):
        await self.write_conn.execute('''
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                experiment TEXT NOT NULL,
                scenario TEXT NOT NULL,
                config_hash TEXT NOT NULL,
                seed INTEGER NOT NULL,
                rows INTEGER,
                output_path TEXT,
                status TEXT NOT NULL,
                started_at TEXT NOT NULL,
                finished_at TEXT,
                error TEXT
            )
        ''')
        await self.write_conn.execute('''
            CREATE TABLE IF NOT EXISTS events (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id INTEGER NOT NULL,
                level TEXT NOT NULL,
                message TEXT NOT NULL,
                timestamp TEXT NOT NULL,
                FOREIGN KEY (run_id) REFERENCES runs (id) ON DELETE CASCADE
            )
        ''')
        # فهارس إضافية
        await self.write_conn.execute('''
            CREATE INDEX IF NOT EXISTS idx_runs_started ON runs(started_at DESC)
        ''')
        await self.write_conn.execute('''
            CREATE INDEX IF NOT EXISTS idx_events_run ON events(run_id)
        ''')
        await self.write_conn.commit()

    async def close(self):
        if not self.initialized:
            return
        if self.write_conn:
            await self.write_conn.close()
        self.write_conn = None
        self.initialized = False
        logger.info("Run ledger closed.")

    async def _cleanup(self):
        if self.write_conn:
            await self.write_conn.close()
        self.write_conn = None

    async def _fetchall(self, sql: str, params: tuple = ()):
        if not self.initialized:
            await self.initialize()
        cursor = await self.write_conn.execute(sql, params)
        rows = await cursor.fetchall()
        await cursor.close()
        return rows

    def _now(self):
        return datetime.now(pytz.utc).isoformat()

    # -----------------------------------------------------------
    # runs
    # -----------------------------------------------------------
    async def start_run(self, experiment: str, scenario: str, config_hash: str, seed: int) -> int:
        if not self.initialized:
            await self.initialize()
        async with self.write_lock:
            cursor = await self.write_conn.execute(
                '''INSERT INTO runs (experiment, scenario, config_hash, seed, status, started_at)
                   VALUES (?, ?, ?, ?, 'running', ?)''',
                (experiment, scenario, config_hash, seed, self._now())
            )
            await self.write_conn.commit()
            return cursor.lastrowid

    async def _close_run(self, run_id: int, status: str, rows: int | None,
                         output_path: str | None, error: str | None) -> tuple[bool, str]:
        if not self.initialized:
            await self.initialize()
        async with self.write_lock:
            # لا يُغلق إلا تشغيل ما زال قيد التنفيذ
            cursor = await self.write_conn.execute(
                '''UPDATE runs SET status = ?, rows = ?, output_path = ?, error = ?, finished_at = ?
                   WHERE id = ? AND status = 'running' ''',
                (status, rows, output_path, error, self._now(), run_id)
            )
            await self.write_conn.commit()
        if cursor.rowcount == 0:
            return False, f"❌ Run {run_id} is unknown or already closed"
        return True, f"✅ Run {run_id} {status}"

    async def finish_run(self, run_id: int, rows: int, output_path: str) -> tuple[bool, str]:
        return await self._close_run(run_id, "finished", rows, output_path, None)

    async def fail_run(self, run_id: int, error: str) -> tuple[bool, str]:
        return await self._close_run(run_id, "failed", None, None, error)

    async def log_event(self, run_id: int, level: str, message: str) -> tuple[bool, str]:
        if not self.initialized:
            await self.initialize()
        try:
            async with self.write_lock:
                await self.write_conn.execute(
                    "INSERT INTO events (run_id, level, message, timestamp) VALUES (?, ?, ?, ?)",
                    (run_id, level, message, self._now())
                )
                await self.write_conn.commit()
            return True, "✅ Event recorded"
        except aiosqlite.IntegrityError:
            # رقم التشغيل غير موجود (المفتاح الأجنبي)
            return False, f"❌ Run {run_id} does not exist"

    # -----------------------------------------------------------
    # history
    # -----------------------------------------------------------
    async def recent_runs(self, limit: int = 20) -> list[dict]:
        rows = await self._fetchall("SELECT * FROM runs ORDER BY id DESC LIMIT ?", (limit,))
        return [dict(row) for row in rows]

    async def get_run(self, run_id: int) -> dict | None:
        rows = await self._fetchall("SELECT * FROM runs WHERE id = ?", (run_id,))
        if not rows:
            return None
        run = dict(rows[0])
        events = await self._fetchall(
            "SELECT level, message, timestamp FROM events WHERE run_id = ? ORDER BY id", (run_id,)
        )
        run["events"] = [dict(e) for e in events]
        return run


ledger = RunLedger()

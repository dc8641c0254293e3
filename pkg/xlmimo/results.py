"""Result tables and their CSV form: commented metadata, header, rows, LF endings."""
from __future__ import annotations

import csv
import io
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

logger = logging.getLogger(__name__)

ARTIFACT_VERSION = "1.0.0"


def _cell(value: Any) -> str:
    if isinstance(value, (np.generic, np.ndarray)):
        value = value.item()
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


@dataclass
class ResultTable:
    experiment: str
    header: list[str]
    rows: list[list[Any]] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    def append(self, row: Sequence[Any]) -> None:
        if len(row) != len(self.header):
            raise ValueError(f"{self.experiment}: row has {len(row)} cells, header has {len(self.header)}")
        self.rows.append(list(row))

    def extend(self, rows: Sequence[Sequence[Any]]) -> None:
        for row in rows:
            self.append(row)

    def column(self, name: str) -> list[Any]:
        i = self.header.index(name)
        return [row[i] for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        meta = {"experiment": self.experiment, "artifact_version": ARTIFACT_VERSION, **self.metadata}
        for key in sorted(meta):
            buf.write(f"# {key}: {meta[key]}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows([_cell(v) for v in row] for row in self.rows)
        return buf.getvalue()

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.to_csv())
        logger.info(f"✅ Wrote {len(self.rows)} rows to {path}")
        return path


def read_csv(path: str | Path) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Inverse of :meth:`ResultTable.write`: (metadata, header, rows as strings)."""
    meta: dict[str, str] = {}
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    body = []
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        elif line:
            body.append(line)
    parsed = list(csv.reader(body))
    return meta, parsed[0], parsed[1:]

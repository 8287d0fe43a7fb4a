"""
Дерево результатов <outdir>/{config.effective.toml, solution.json, fields/*.csv, report.json}.

Каждый файл пишется атомарно: временный файл в той же папке, затем os.replace.
JSON хранит числа с полной точностью (repr), CSV: 12 значащих цифр.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np
from django.utils import timezone

from energy.domain import State
from flow.domain import Solution
from radial.domain import RadialField
from radial.exceptions import ConfigurationError
from radial.io import CSV_FORMAT, field_to_csv

logger = logging.getLogger(__name__)


def atomic_write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
                f.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as e:
        raise ConfigurationError(f"cannot write {path}: {e}") from e
    logger.debug("wrote %s (%d bytes)", path, len(text))
    return path


def jsonable(value):
    """Числа numpy -> float/int; nan и inf -> None (строгий JSON)."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if is_dataclass(value) and not isinstance(value, type):
        return jsonable(asdict(value))
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dumps_json(data) -> str:
    return json.dumps(jsonable(data), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(path: str | Path, data) -> Path:
    return atomic_write_text(path, dumps_json(data))


def _cell(value) -> str:
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(value).lower()
    if isinstance(value, (float, np.floating)):
        return CSV_FORMAT.format(float(value))
    return str(value)


def table_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})
    return buf.getvalue()


def write_table(path: str | Path, rows: list) -> Path:
    rows = [asdict(row) if is_dataclass(row) else dict(row) for row in rows]
    return atomic_write_text(path, table_to_csv(rows))


def write_field(path: str | Path, u: RadialField) -> Path:
    return atomic_write_text(path, field_to_csv(u))


def solution_payload(solution: Solution) -> dict:
    data = solution.summary()
    data.update({
        "positive": solution.is_positive,
        "signs_ok": solution.signs_ok,
        "residual_history": list(solution.residuals),
        "energy_history": list(solution.energies),
        "diagnostics": solution.diagnostics,
    })
    return data


class OutputTree:
    """Файлы одного запуска в outdir."""

    def __init__(self, outdir: str | Path):
        self.root = Path(outdir)

    def config(self, text: str) -> Path:
        return atomic_write_text(self.root / "config.effective.toml", text)

    def field(self, name: str, u: RadialField) -> Path:
        return write_field(self.root / "fields" / f"{name}.csv", u)

    def state(self, state: State, prefix: str = "") -> list[Path]:
        return [self.field(f"{prefix}u{i}", state.component(i)) for i in (1, 2)]

    def solution(self, solution: Solution, name: str = "solution", extra: dict | None = None) -> Path:
        data = solution_payload(solution)
        if extra:
            data.update(extra)
        self.state(solution.state, prefix=f"{name}_" if name != "solution" else "")
        return write_json(self.root / f"{name}.json", data)

    def json(self, name: str, data) -> Path:
        return write_json(self.root / f"{name}.json", data)

    def table(self, name: str, rows: list) -> Path:
        return write_table(self.root / f"{name}.csv", rows)

    def report(self, data: dict) -> Path:
        return write_json(self.root / "report.json", {**data, "created_at": timezone.now().isoformat()})

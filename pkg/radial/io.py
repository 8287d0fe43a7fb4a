"""
Сериализация полей: CSV (r, value) и JSON {dim, r_max, nodes?, values}.

Запись на диск (атомарная) живёт в runner.writers; здесь только преобразования
в текст/словари и обратно.
"""
from __future__ import annotations

import csv
import io
import re

import numpy as np

from radial.domain import RadialField, RadialGrid
from radial.exceptions import StructuralError

CSV_FORMAT = "{:.12g}"

_UNIFORM_RE = re.compile(r"^\s*uniform\(\s*(\d+)\s*\)\s*$")


def parse_nodes_spec(value: int | str) -> int:
    """4096 или "uniform(4096)" -> 4096."""
    if isinstance(value, bool):
        raise StructuralError(f"bad nodes spec: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        m = _UNIFORM_RE.match(value)
        if m:
            return int(m.group(1))
        if value.strip().isdigit():
            return int(value.strip())
    raise StructuralError(f"bad nodes spec: {value!r} (expected an integer or 'uniform(M)')")


def field_to_csv(u: RadialField) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["r", "value"])
    for r, v in zip(u.grid.nodes, u.values):
        writer.writerow([CSV_FORMAT.format(r), CSV_FORMAT.format(v)])
    return buf.getvalue()


def field_from_csv(text: str, dim: int) -> RadialField:
    reader = csv.DictReader(io.StringIO(text))
    if not {"r", "value"}.issubset(set(reader.fieldnames or [])):
        raise StructuralError("CSV must contain columns: ['r', 'value']")
    rs, vs = [], []
    for row in reader:
        rs.append(float(row["r"]))
        vs.append(float(row["value"]))
    if not rs:
        raise StructuralError("CSV holds no rows")
    nodes = np.asarray(rs)
    # CSV хранит 12 значащих цифр: восстанавливаем равномерные узлы точно
    grid = RadialGrid.uniform(dim, nodes.size, float(nodes[-1]))
    if np.max(np.abs(grid.nodes - nodes)) > 1e-9 * max(grid.r_max, 1.0):
        raise StructuralError("CSV nodes are not a uniform grid starting at 0")
    return RadialField(grid, np.asarray(vs))


def field_to_dict(u: RadialField, *, include_nodes: bool = False) -> dict:
    data = {
        "dim": u.grid.dim,
        "r_max": float(u.grid.r_max),
        "values": [float(v) for v in u.values],
    }
    if include_nodes:
        data["nodes"] = [float(r) for r in u.grid.nodes]
    return data


def field_from_dict(data: dict) -> RadialField:
    try:
        dim = int(data["dim"])
        r_max = float(data["r_max"])
        values = np.asarray(data["values"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as e:
        raise StructuralError(f"bad field object: {e}") from e

    nodes = data.get("nodes")
    if nodes is None:
        grid = RadialGrid.uniform(dim, values.size, r_max)
    elif isinstance(nodes, str):
        grid = RadialGrid.uniform(dim, parse_nodes_spec(nodes), r_max)
    else:
        grid = RadialGrid(dim=dim, r_max=r_max, nodes=np.asarray(nodes, dtype=np.float64))
    return RadialField(grid, values)

"""CSV/JSON serialization.  Every float is written with 17 significant digits."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from fracsrc.errors import DomainError
from fracsrc.fractional_calculus import DeltaTrain, GridFunction, TemporalGrid, TemporalSource


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def csv_text(header: list[str], columns) -> str:
    cols = [np.asarray(c).ravel() for c in columns]
    n = cols[0].size
    if any(c.size != n for c in cols):
        raise DomainError("CSV columns have different lengths")
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(fmt(c[i]) for c in cols))
    return "\n".join(lines) + "\n"


def read_csv(text: str) -> dict[str, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DomainError("empty CSV")
    header, body = rows[0], [r for r in rows[1:] if r]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise DomainError(f"non-numeric CSV entry: {exc}") from None
    if data.size == 0:
        data = np.zeros((0, len(header)))
    if data.shape[1] != len(header):
        raise DomainError("CSV rows do not match the header")
    return {name: data[:, k] for k, name in enumerate(header)}


def grid_function_csv(g: GridFunction) -> str:
    return csv_text(["t", "value"], [g.t, g.values])


def grid_function_from_csv(text: str, grid: TemporalGrid | None = None) -> GridFunction:
    cols = read_csv(text)
    if "t" not in cols or "value" not in cols:
        raise DomainError("expected columns t,value")
    t = cols["t"]
    if grid is None:
        if t.size < 2:
            raise DomainError("need at least two samples")
        grid = TemporalGrid(float(t[-1]), t.size)
    if t.size != grid.n_steps or not np.allclose(t, grid.nodes, rtol=0, atol=1e-12 * grid.T):
        raise DomainError("CSV time column does not match the temporal grid")
    return GridFunction(grid, cols["value"])


def train_table(train: DeltaTrain) -> list[dict[str, float]]:
    return [{"a": a, "r": r} for a, r in train.atoms]


def temporal_source_json(src: TemporalSource) -> str:
    """``{"atoms": [{"a": .., "r": ..}], "regular": [..] | null}``."""
    return dumps({
        "regular": None if src.regular is None else src.regular.values,
        "atoms": [] if src.atoms is None else train_table(src.atoms),
    })


def temporal_source_from_json(text: str, grid: TemporalGrid) -> TemporalSource:
    try:
        d = json.loads(text)
        reg = d.get("regular")
        atoms = d.get("atoms") or []
        pairs = [(float(x["a"]), float(x["r"])) for x in atoms]
    except (ValueError, TypeError, KeyError, AttributeError) as exc:
        raise DomainError(f"malformed temporal source JSON: {exc}") from None
    return TemporalSource(
        regular=None if reg is None else GridFunction(grid, reg),
        atoms=DeltaTrain.from_pairs(pairs) if pairs else None,
    )


def _encode(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan; write them as strings
        return fmt(x) if math.isfinite(x) else json.dumps(fmt(x))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        return "{" + ",".join(json.dumps(str(k)) + ":" + _encode(v) for k, v in items) + "}"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, no whitespace, 17-digit floats."""
    return _encode(obj) + "\n"


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path

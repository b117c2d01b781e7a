"""CSV emission with the producing configuration embedded as a comment header."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path


def _fmt(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    if hasattr(v, "item"):
        return _fmt(v.item())
    return str(v)


def write_csv(path, columns, rows, config_json: str = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    if config_json is not None:
        buf.write(f"# config: {config_json}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if isinstance(row, dict):
            row = [row[c] for c in columns]
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())
    return path


def read_csv(path):
    """Return ``(config_json or None, list of row dicts)``."""
    lines = Path(path).read_text().splitlines()
    cfg = None
    while lines and lines[0].startswith("#"):
        head = lines.pop(0)
        if head.startswith("# config: "):
            cfg = head[len("# config: "):]
    rows = list(csv.DictReader(lines))
    return cfg, rows


def body(path) -> str:
    """File contents without the comment header."""
    return "".join(l for l in Path(path).read_text().splitlines(True) if not l.startswith("#"))

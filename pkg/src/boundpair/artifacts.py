"""CSV artifacts with a ``# key = value`` metadata header."""
from __future__ import annotations

import csv
import io
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .model import ModelParams

NUMBER_FORMAT = "%.12g"


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return NUMBER_FORMAT % float(value)
    return str(value)


def metadata(params: ModelParams, **extra) -> dict:
    meta = {"params_hash": params.digest()}
    meta.update({k: params.to_dict()[k] for k in ("M", "U", "gamma0", "lambda_at", "a", "boundary")})
    meta.update(extra)
    return meta


def render_csv(meta: dict, columns, rows) -> str:
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key} = {fmt(value)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | None, meta: dict, columns, rows) -> str:
    """Render and write in one go; ``path=None`` or ``-`` goes to stdout."""
    text = render_csv(meta, columns, rows)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def read_csv(path: str) -> tuple[dict, list[str], list[list[str]]]:
    meta, lines = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# ") and " = " in line:
                key, value = line[2:].rstrip("\n").split(" = ", 1)
                meta[key] = value
            else:
                lines.append(line)
    reader = csv.reader(lines)
    columns = next(reader)
    return meta, columns, [row for row in reader]


def ordered_map(fn, items, threads: int = 1) -> list:
    """Map preserving input order regardless of completion order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


class HashMismatchError(ValueError):
    pass


def load_golden(path: str, params: ModelParams) -> tuple[dict, list[str], list[list[str]]]:
    """Read a golden table, refusing one generated for different parameters."""
    meta, cols, rows = read_csv(path)
    if meta.get("params_hash") != params.digest():
        raise HashMismatchError(f"{path}: params_hash {meta.get('params_hash')} != {params.digest()}")
    return meta, cols, rows

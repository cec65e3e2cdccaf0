"""Result persistence: atomic CSV/JSON writing with a fixed dialect.

CSV files are comma-separated with a header row, '.' decimals and LF line
endings; floats are written with repr so bodies are byte-stable across runs
and thread counts.  Every file is written to a temporary sibling and renamed
into place, so an interrupted run never leaves a half-written file visible.
"""

from __future__ import annotations

import json
import os
from fractions import Fraction
from pathlib import Path

__all__ = ["ResultStore", "format_cell"]


def format_cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        return repr(float(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


class ResultStore:
    """Output directory of one experiment run."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "geometry").mkdir(exist_ok=True)
        (self.root / "figures").mkdir(exist_ok=True)

    # -- atomic writers ------------------------------------------------------

    def _atomic_write(self, rel: str, text: str) -> Path:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + f".tmp-{os.getpid()}")
        with open(tmp, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
        return path

    def write_csv(self, rel: str, header, rows) -> Path:
        lines = [",".join(map(str, header))]
        for row in rows:
            lines.append(",".join(format_cell(c) for c in row))
        return self._atomic_write(rel, "\n".join(lines) + "\n")

    def write_json(self, rel: str, obj) -> Path:
        return self._atomic_write(rel, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def snapshot_config(self, config: dict) -> Path:
        return self.write_json("config.json", config)

    # -- readers ---------------------------------------------------------------

    def read_json(self, rel: str):
        with open(self.root / rel) as fh:
            return json.load(fh)

    def read_csv(self, rel: str):
        with open(self.root / rel, newline="") as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
        header = lines[0].split(",")
        return header, [ln.split(",") for ln in lines[1:]]

    def exists(self, rel: str) -> bool:
        return (self.root / rel).exists()

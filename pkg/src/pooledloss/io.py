"""Plain-text artifacts: CSV tables, run manifests and plotting stubs.

Every CSV has a one-line header, ``.`` as decimal separator and floats at
17 significant digits so values round-trip exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

FLOAT_FMT = "%.17g"


def write_csv(path: str | Path, header: Sequence[str], rows) -> Path:
    """Write a numeric table. Integer-valued columns print without a decimal point."""
    path = Path(path)
    arr = np.asarray(rows, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None] if len(header) == 1 else arr[None, :]
    if arr.size and arr.shape[1] != len(header):
        raise ValueError(f"{len(header)} header columns but rows have {arr.shape[1]}")
    np.savetxt(path, arr.reshape(-1, len(header)), fmt=FLOAT_FMT, delimiter=",",
               header=",".join(header), comments="")
    return path


def write_records(path: str | Path, header: Sequence[str], records: Sequence[Sequence]) -> Path:
    """Write rows that mix text and numbers."""
    path = Path(path)

    def cell(v):
        if isinstance(v, (bool, np.bool_)):
            return str(int(v))
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return FLOAT_FMT % v
        return str(v)

    lines = [",".join(header)] + [",".join(cell(v) for v in rec) for rec in records]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Header and numeric body of a file written by :func:`write_csv`."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, body


def moment_header(prefix: str, K: int) -> list[str]:
    return [f"{prefix}{k}" for k in range(K + 1)]


def lln_rows(times, u) -> np.ndarray:
    """Rows ``t, u0..uK``."""
    return np.column_stack([times, u])


def typed_lln_rows(times, u) -> np.ndarray:
    """Rows ``t, type_id, u0..uK`` from per-type moments of shape (n_points, P, K+1)."""
    n, P, d = u.shape
    t = np.repeat(np.asarray(times, dtype=float), P)
    tid = np.tile(np.arange(P), n)
    return np.column_stack([t, tid, u.reshape(n * P, d)])


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int
    scheme: str | None
    settings: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def add(self, path: Path) -> Path:
        self.outputs.append(Path(path).name)
        return path

    def write(self, out_dir: str | Path) -> Path:
        path = Path(out_dir) / f"manifest_{self.command}.json"
        data = {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "scheme": self.scheme,
            "settings": self.settings,
            "timings": self.timings,
            "outputs": sorted(self.outputs),
            "diagnostics": self.diagnostics,
        }
        path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


_PLOT_STUB = '''"""Plot {csv}. Generated helper; edit freely."""

import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv}"
with open(path) as fh:
    rows = list(csv.reader(fh))
header, body = rows[0], rows[1:]
cols = {{name: [float(r[i]) for r in body] for i, name in enumerate(header)}}
x = cols["{x}"]
for name in {ys!r}:
    plt.plot(x, cols[name], label=name)
plt.xlabel("{x}")
plt.legend()
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''


def write_plot_stub(out_dir: str | Path, csv_name: str, x: str, ys: Sequence[str]) -> Path:
    stem = csv_name.rsplit(".", 1)[0]
    path = Path(out_dir) / f"plot_{stem}.py"
    path.write_text(_PLOT_STUB.format(csv=csv_name, x=x, ys=list(ys)))
    return path

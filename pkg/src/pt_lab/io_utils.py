"""Run manifests and file emission shared by the command-line tools.

Every run writes a manifest.json recording the subcommand, its full
argument set, seeds, and the sha256 of each emitted file; the manifest
hash is stamped into every CSV (comment line) and JSON (field) so files
can be traced back to the run that produced them. Replaying a manifest
re-executes the recorded command and verifies the hashes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .downfold import DownfoldedMatrix

FORMAT_VERSION = 1
ENV_OUT_DIR = "PT_LAB_OUT"
DEFAULT_OUT_DIR = "pt_lab_out"


def resolve_out_dir(flag_value: str | None) -> Path:
    """Explicit --out-dir wins, then the PT_LAB_OUT variable, then ./pt_lab_out."""
    if flag_value:
        base = Path(flag_value)
    elif os.environ.get(ENV_OUT_DIR):
        base = Path(os.environ[ENV_OUT_DIR])
    else:
        base = Path(DEFAULT_OUT_DIR)
    base.mkdir(parents=True, exist_ok=True)
    return base


def _canonical_json(doc) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      allow_nan=True, default=_json_default).encode()


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)!r}")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    args: dict
    seeds: list = field(default_factory=list)
    threads: int = 1
    outputs: list = field(default_factory=list)
    version: str = __version__
    format_version: int = FORMAT_VERSION

    @property
    def hash(self) -> str:
        doc = {"subcommand": self.subcommand, "args": self.args,
               "seeds": self.seeds, "threads": self.threads,
               "version": self.version, "format_version": self.format_version}
        return hashlib.sha256(_canonical_json(doc)).hexdigest()[:16]

    def record(self, path: Path):
        self.outputs.append({"path": str(path), "sha256": sha256_file(path)})

    def write(self, out_dir: Path) -> Path:
        doc = {
            "format_version": self.format_version,
            "version": self.version,
            "subcommand": self.subcommand,
            "args": self.args,
            "seeds": self.seeds,
            "threads": self.threads,
            "manifest_hash": self.hash,
            "outputs": self.outputs,
        }
        path = out_dir / "manifest.json"
        with open(path, "w") as f:
            json.dump(doc, f, indent=1, sort_keys=True, default=_json_default)
            f.write("\n")
        return path


def write_csv(path: Path, header: list[str], rows, manifest: RunManifest | None = None):
    """CSV with a traceability comment line and a named header row."""
    with open(path, "w", newline="") as f:
        if manifest is not None:
            f.write(f"# manifest_hash={manifest.hash} version={manifest.version}\n")
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])
    if manifest is not None:
        manifest.record(path)


def write_json(path: Path, doc: dict, manifest: RunManifest | None = None):
    out = dict(doc)
    out.setdefault("format_version", FORMAT_VERSION)
    if manifest is not None:
        out["manifest_hash"] = manifest.hash
    with open(path, "w") as f:
        json.dump(out, f, indent=1, sort_keys=True, default=_json_default)
        f.write("\n")
    if manifest is not None:
        manifest.record(path)


def read_csv_columns(path) -> dict:
    """Read a CSV written by write_csv back into named float columns."""
    with open(path) as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    cols = {name: [] for name in header}
    for row in reader:
        for name, val in zip(header, row):
            cols[name].append(val)
    out = {}
    for name, vals in cols.items():
        try:
            out[name] = np.array([float(v) for v in vals])
        except ValueError:
            out[name] = np.array(vals)
    return out


# ---------------------------------------------------------------------------
# downfolded-matrix persistence


def save_downfolded(mat: DownfoldedMatrix, base: Path,
                    manifest: RunManifest | None = None,
                    csv_max_m: int = 128) -> list[Path]:
    """Dense little-endian float64 blob plus JSON sidecar; CSV when M is small."""
    base = Path(base)
    bin_path = base.with_suffix(".bin")
    with open(bin_path, "wb") as f:
        f.write(np.ascontiguousarray(mat.matrix, dtype="<f8").tobytes())
    meta = {
        "format_version": FORMAT_VERSION,
        "M": mat.M, "n": mat.n, "B_perp": mat.B_perp,
        "V_typ": mat.V_typ, "W": mat.W, "shift": mat.shift,
        "dtype": "<f8", "order": "C",
    }
    json_path = base.with_suffix(".json")
    write_json(json_path, meta, manifest)
    paths = [bin_path, json_path]
    if manifest is not None:
        manifest.record(bin_path)
    if mat.M <= csv_max_m:
        csv_path = base.with_suffix(".csv")
        write_csv(csv_path, ["row", "col", "value_energy"],
                  ((i, j, repr(float(mat.matrix[i, j])))
                   for i in range(mat.M) for j in range(mat.M)),
                  manifest)
        paths.append(csv_path)
    return paths


def load_downfolded(base: Path) -> DownfoldedMatrix:
    base = Path(base)
    with open(base.with_suffix(".json")) as f:
        meta = json.load(f)
    raw = np.fromfile(base.with_suffix(".bin"), dtype="<f8")
    M = meta["M"]
    matrix = raw.reshape(M, M)
    return DownfoldedMatrix(matrix=matrix, V_typ=meta["V_typ"], W=meta["W"],
                            B_perp=meta.get("B_perp"), n=meta.get("n"),
                            shift=meta.get("shift", 0.0))

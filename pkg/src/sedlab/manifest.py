"""Run manifests and deterministic writers.

Every command writes a manifest.json listing its configuration, seeds and an
inventory of output files with sha256 digests.  Numbers are written with
round-trip decimal formatting (Python repr), so re-running a manifest's
config + seed reproduces the digests bit-for-bit; only the timestamps differ.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__

__all__ = ["write_json", "write_csv", "sha256_of", "RunManifestWriter"]


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _json_default(value):
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def write_csv(path: Path, header: list[str], columns: list) -> None:
    """Columns of equal length; floats formatted with full round-trip repr."""
    n = len(columns[0])
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(_fmt(col[i]) for col in columns))
    path.write_text("\n".join(lines) + "\n")


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


class RunManifestWriter:
    """Collects output files for one command run and writes manifest.json."""

    def __init__(self, command: str, config_snapshot: dict, seed: int | None, out_dir: Path):
        self.command = command
        self.config_snapshot = config_snapshot
        self.seed = seed
        self.out_dir = Path(out_dir)
        self.started = datetime.now(timezone.utc).isoformat()
        self.outputs: list[Path] = []

    def add(self, path: Path) -> None:
        self.outputs.append(Path(path))

    def write(self) -> Path:
        inventory = [
            {
                "path": p.name,
                "sha256": sha256_of(p),
                "bytes": p.stat().st_size,
            }
            for p in self.outputs
        ]
        manifest = {
            "command": self.command,
            "code_version": __version__,
            "config": self.config_snapshot,
            "master_seed": self.seed,
            "started_utc": self.started,
            "finished_utc": datetime.now(timezone.utc).isoformat(),
            "outputs": inventory,
        }
        path = self.out_dir / "manifest.json"
        write_json(path, manifest)
        return path

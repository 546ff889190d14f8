"""
MATANet — Run Manifest

``run_manifest.json`` records what a command did: the command and its
inputs, the fully resolved config, the seed, the code version, start and
end timestamps, and the artifacts it wrote.  The config plus the inputs are
enough to run the command again (``matanet.py rerun``).

The manifest is written once, at the end of the run, through a temporary
file and ``os.replace``; writing fails if a listed artifact does not exist.
"""

from __future__ import annotations

import json
import logging
import os
import subprocess
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from . import __version__

logger = logging.getLogger(__name__)

MANIFEST_FILE = "run_manifest.json"
REPO_ROOT = Path(__file__).resolve().parents[2]


class ManifestError(ValueError):
    """Manifest lists a missing artifact or cannot be read back."""


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def code_version() -> str:
    """Package version, with the short commit hash appended when the tree
    is a git checkout."""
    try:
        proc = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=REPO_ROOT,
            capture_output=True,
            text=True,
            timeout=5,
            check=False,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    sha = proc.stdout.strip()
    return f"{__version__}+g{sha}" if proc.returncode == 0 and sha else __version__


@dataclass
class RunManifest:
    command: str
    inputs: dict[str, Any] = field(default_factory=dict)
    config: dict[str, Any] | None = None
    seed: int | None = None
    code_version: str = field(default_factory=code_version)
    started_at: str = field(default_factory=utc_now)
    finished_at: str | None = None
    status: str = "running"
    error: str | None = None
    artifacts: dict[str, str] = field(default_factory=dict)

    def add_artifact(self, name: str, path: str | Path) -> None:
        self.artifacts[name] = str(path)

    def missing_artifacts(self) -> list[str]:
        return [name for name, path in self.artifacts.items() if not Path(path).exists()]

    def finish(self, status: str = "ok", error: str | None = None) -> None:
        self.finished_at = utc_now()
        self.status = status
        self.error = error
        if status != "ok":
            # A failed run keeps only what it managed to write.
            self.artifacts = {k: v for k, v in self.artifacts.items() if Path(v).exists()}

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def write(self, path: str | Path) -> Path:
        """Write to ``path``, or to ``path/run_manifest.json`` when ``path`` is a
        directory or has no suffix."""
        missing = self.missing_artifacts()
        if missing:
            raise ManifestError(f"Manifest lists artifacts that do not exist: {missing}")
        path = Path(path)
        if path.is_dir() or not path.suffix:
            path = path / MANIFEST_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, path)
        logger.info("Wrote run manifest %s (%s, %d artifacts)", path, self.status, len(self.artifacts))
        return path

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_FILE
        if not path.is_file():
            raise FileNotFoundError(f"Run manifest not found: {path}")
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
            return cls(**payload)
        except (json.JSONDecodeError, TypeError) as exc:
            raise ManifestError(f"{path}: not a run manifest ({exc})") from None

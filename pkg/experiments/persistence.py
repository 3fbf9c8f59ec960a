"""
Result files: JSON reports and CSV tables, each with a ``.meta.json`` sidecar.

Payloads carry provenance (config hash, code version, dt) but no wall-clock
time, so one config always produces byte-identical files. The write time
lives only in the sidecar.
"""
import json
import logging
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Optional

import pandas as pd

from core import __version__
from core.errors import OutputConflictError

logger = logging.getLogger(__name__)

SIDECAR_SUFFIX = ".meta.json"


def sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + SIDECAR_SUFFIX)


def finite_payload(value: Any, flagged: Optional[list] = None, path: str = "") -> Any:
    """Copy of ``value`` with non-finite floats replaced by None.

    The dotted path of every replaced value is appended to ``flagged``.
    """
    if flagged is None:
        flagged = []
    if isinstance(value, dict):
        return {k: finite_payload(v, flagged, f"{path}.{k}" if path else str(k)) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [finite_payload(v, flagged, f"{path}[{i}]") for i, v in enumerate(value)]
    if isinstance(value, float) and not math.isfinite(value):
        flagged.append(path)
        return None
    return value


class ResultWriter:
    """Writes results under ``out_dir`` for one config hash."""

    def __init__(self, out_dir, config_hash: str, dt: float,
                 code_version: str = __version__, force: bool = False):
        self.out_dir = Path(out_dir)
        self.config_hash = config_hash
        self.code_version = code_version
        self.dt = dt
        self.force = force
        self.written = []

    @property
    def provenance(self) -> dict:
        return {'config_hash': self.config_hash, 'code_version': self.code_version, 'dt': self.dt}

    def existing_hash(self, path: Path) -> Optional[str]:
        meta = sidecar_path(path)
        if not meta.exists():
            return None
        try:
            return json.loads(meta.read_text()).get('config_hash')
        except (json.JSONDecodeError, OSError):
            return None

    def check(self, names: Iterable[str]):
        """Refuse up front if any target exists from a different config."""
        for name in names:
            path = self.out_dir / name
            if not path.exists() or self.force:
                continue
            previous = self.existing_hash(path)
            if previous != self.config_hash:
                raise OutputConflictError(
                    f"{path} was written from config {str(previous)[:12]}, not {self.config_hash[:12]}; "
                    f"use --force to overwrite")

    def _finish(self, path: Path):
        meta = dict(self.provenance, written_at=datetime.now().isoformat())
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        self.written.append(path)
        logger.info(f"Wrote {path}")

    def write_json(self, name: str, payload: dict) -> Path:
        self.check([name])
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        non_finite = []
        document = {'provenance': self.provenance, **finite_payload(payload, non_finite)}
        if non_finite:
            document['non_finite'] = non_finite
            logger.warning(f"{name}: non-finite values written as null at " + ", ".join(non_finite))
        path.write_text(json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + "\n")
        self._finish(path)
        return path

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        self.check([name])
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        header = "# " + ",".join(f"{k}={v}" for k, v in self.provenance.items()) + "\n"
        body = frame.to_csv(index=False, float_format="%.12g", lineterminator="\n")
        path.write_text(header + body)
        self._finish(path)
        return path


def read_csv(path) -> pd.DataFrame:
    """Read a CSV written by ResultWriter (skips the provenance comment)."""
    return pd.read_csv(path, comment="#")


def read_provenance(path) -> dict:
    first = Path(path).read_text().splitlines()[0]
    if not first.startswith("# "):
        return {}
    return dict(item.split("=", 1) for item in first[2:].split(","))

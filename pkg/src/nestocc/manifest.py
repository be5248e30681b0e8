"""Build and validate run manifests for result tables."""

from __future__ import annotations

import hashlib
import json
import os
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any

from .config import PACKAGE_NAME
from .exceptions import ConfigurationError
from .experiment import ExperimentConfig, ExperimentResult

MANIFEST_VERSION = "1.0.0"
MANIFEST_SUFFIX = ".manifest.json"

_REQUIRED_KEYS = {
    "manifest_version",
    "package",
    "package_version",
    "created_at",
    "environment",
    "mode",
    "master_seed",
    "replicas",
    "failed_replicas",
    "acceptance_grade",
    "realized_levels",
    "results",
}
_RESULT_KEYS = ("file", "format", "rows", "size_bytes", "sha256")


def _sha256(path: Path) -> str:
    """Return the SHA-256 checksum for a file."""
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(1024 * 1024), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _created_at_utc() -> str:
    """Return UTC ISO-8601 timestamp, honoring SOURCE_DATE_EPOCH when provided."""
    epoch = os.getenv("SOURCE_DATE_EPOCH")
    if epoch is not None:
        dt = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        dt = datetime.now(timezone.utc)
    return dt.replace(microsecond=0).isoformat().replace("+00:00", "Z")


def _package_version() -> str:
    try:
        return version(PACKAGE_NAME)
    except PackageNotFoundError:
        return "0+unknown"


def manifest_path(csv_path: str | Path) -> Path:
    """Manifest written next to a results CSV: ``<csv stem>.manifest.json``."""
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + MANIFEST_SUFFIX)


def validate_run_manifest(manifest: dict[str, Any]) -> None:
    """Validate required run manifest structure.

    Raises:
        ConfigurationError: If required keys are missing or malformed.
    """
    missing = _REQUIRED_KEYS - set(manifest)
    if missing:
        raise ConfigurationError(f"Invalid manifest: missing keys {sorted(missing)}")
    results = manifest["results"]
    if not isinstance(results, dict):
        raise ConfigurationError("Invalid manifest: 'results' must be an object")
    for key in _RESULT_KEYS:
        if key not in results:
            raise ConfigurationError(f"Invalid manifest results entry: missing '{key}'")
    for entry in manifest["realized_levels"]:
        if not isinstance(entry, dict) or not {"n_or_t", "j"} <= set(entry):
            raise ConfigurationError("Invalid manifest: realized levels need 'n_or_t' and 'j'")


def build_run_manifest(
    config: ExperimentConfig,
    result: ExperimentResult,
    csv_path: str | Path,
    out_path: str | Path | None = None,
) -> dict[str, Any]:
    """Build and write the manifest of a simulate run.

    Args:
        config: Config the run used (with any seed override applied).
        result: Result of ``run_experiment``.
        csv_path: Results CSV already written to disk.
        out_path: Manifest path (``<csv stem>.manifest.json`` when None).

    Returns:
        The manifest dictionary.
    """
    run = config.run
    if run is None:
        raise ConfigurationError("Config has no [run] section")
    csv_path = Path(csv_path)
    manifest: dict[str, Any] = {
        "manifest_version": MANIFEST_VERSION,
        "package": PACKAGE_NAME,
        "package_version": _package_version(),
        "created_at": _created_at_utc(),
        "config": str(config.source) if config.source is not None else None,
        "environment": config.environment.describe(),
        "mode": run.mode,
        "poissonized": run.poissonized,
        "master_seed": run.master_seed,
        "replicas": run.replicas,
        "failed_replicas": list(result.failed_replicas),
        "acceptance_grade": result.acceptance_grade,
        "regime": list(result.regime),
        "realized_levels": [
            {"n_or_t": size, "j": j, "b_realized": offset}
            for size, j, offset in result.realized_levels
        ],
        "results": {
            "file": csv_path.name,
            "format": "csv",
            "rows": result.rows.height,
            "size_bytes": csv_path.stat().st_size,
            "sha256": _sha256(csv_path),
        },
    }
    validate_run_manifest(manifest)
    target = Path(out_path) if out_path is not None else manifest_path(csv_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest

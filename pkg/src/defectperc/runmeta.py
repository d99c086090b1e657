"""Run metadata: config hashing, format tags, and JSON file helpers.

Every artifact written by this package embeds a format-version string, the
full configuration that produced it, and a hash of that configuration so
downstream steps can refuse mixed-provenance inputs.  Files are written with
sorted keys and fixed indentation: re-running an identical configuration
reproduces the file byte-for-byte except for the `created` timestamp.
"""

from __future__ import annotations

import hashlib
import json
import os
from datetime import datetime, timezone

FORMAT_MICRO = "defectperc.microcurve/1"
FORMAT_CANONICAL = "defectperc.canonical/1"
FORMAT_CLUSTERDIST = "defectperc.clusterdist/1"
FORMAT_ESTIMATE = "defectperc.estimate/1"
FORMAT_CENSUS = "defectperc.census/1"
FORMAT_TABLE = "defectperc.table/1"
FORMAT_AUDIT = "defectperc.audit/1"

# fields that describe execution, not the experiment; excluded from hashing
_NON_CONFIG_KEYS = ("created", "workers", "config_hash")


def config_hash(meta: dict) -> str:
    cfg = {k: v for k, v in meta.items() if k not in _NON_CONFIG_KEYS}
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=_coerce)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _coerce(obj):
    # numpy scalars and arrays appear in meta dicts occasionally
    if hasattr(obj, "item"):
        return obj.item()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def created_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_json(path, payload: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1, default=_coerce)
        fh.write("\n")


def read_json(path, expected_format: str | None = None) -> dict:
    with open(path) as fh:
        payload = json.load(fh)
    if expected_format is not None:
        got = payload.get("format")
        if got != expected_format:
            raise ValueError(
                f"{path}: expected format {expected_format!r}, found {got!r}"
            )
    return payload


def default_out_dir() -> str:
    return os.environ.get("DEFECTPERC_OUT", ".")

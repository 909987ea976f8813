"""
Result tables: CSV and JSON emission with provenance, and artifact naming.
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from slugify import slugify

logger = logging.getLogger(__name__)

SCHEMA_PREFIX = "bbm-extremes"


def format_float(value: Any) -> str:
    """Render a number with 17 significant digits; other values with str()."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def artifact_name(command: str, digest: str, ext: str) -> str:
    """File name <slug(command)>-<digest>.<ext>."""
    stem = slugify(command, lowercase=True, separator="-")
    return f"{stem}-{digest}.{ext.lstrip('.')}"


def artifact_path(out_dir: str | Path, command: str, digest: str, ext: str) -> Path:
    """Path of an artifact, creating the output directory if needed."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / artifact_name(command, digest, ext)


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return format_float(value)
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item"):
        return _jsonable(value.item())
    return value


def write_csv(
    path: str | Path,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    provenance: Mapping[str, Any],
) -> Path:
    """
    Write a CSV table preceded by '# key=value' provenance lines.

    Floats are written with 17 significant digits so they round-trip exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for key, value in provenance.items():
            f.write(f"# {key}={format_float(value)}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
            writer.writerow([format_float(_as_python(v)) for v in row])
    logger.info(f"Wrote {path}")
    return path


def _as_python(value: Any) -> Any:
    return value.item() if hasattr(value, "item") else value


def write_json(
    path: str | Path,
    kind: str,
    provenance: Mapping[str, Any],
    rows: Optional[List[Mapping[str, Any]]] = None,
    summary: Optional[Mapping[str, Any]] = None,
) -> Path:
    """Write {"schema": "bbm-extremes/<kind>@1", "provenance", "rows"/"summary"}."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document: Dict[str, Any] = {
        "schema": f"{SCHEMA_PREFIX}/{kind}@1",
        "provenance": _jsonable(dict(provenance)),
    }
    if rows is not None:
        document["rows"] = _jsonable(rows)
    if summary is not None:
        document["summary"] = _jsonable(dict(summary))
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=False)
        f.write("\n")
    logger.info(f"Wrote {path}")
    return path


def read_csv(path: str | Path) -> tuple[Dict[str, str], List[Dict[str, str]]]:
    """Read a table written by write_csv: (provenance, rows as dicts of strings)."""
    provenance: Dict[str, str] = {}
    lines = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition("=")
                provenance[key] = value
            else:
                lines.append(line)
    return provenance, list(csv.DictReader(lines))


def write_table(
    out_dir: str | Path,
    command: str,
    fmt: str,
    columns: Sequence[str],
    rows: Sequence[Sequence[Any]],
    provenance: Mapping[str, Any],
    summary: Optional[Mapping[str, Any]] = None,
) -> List[Path]:
    """
    Write a command's table in the configured format.

    CSV output gets a JSON summary alongside when a summary is given.
    """
    digest = str(provenance.get("config_digest", "nodigest"))
    written = []
    if fmt == "csv":
        written.append(write_csv(artifact_path(out_dir, command, digest, "csv"), columns, rows, provenance))
        if summary is not None:
            path = artifact_path(out_dir, f"{command}-summary", digest, "json")
            written.append(write_json(path, f"{command}-summary", provenance, summary=summary))
    elif fmt == "json":
        records = [dict(zip(columns, row)) for row in rows]
        path = artifact_path(out_dir, command, digest, "json")
        written.append(write_json(path, command, provenance, rows=records, summary=summary))
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    return written

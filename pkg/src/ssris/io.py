"""Delimited-text tables and the JSON run manifest written next to them."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

from .config import ScenarioConfig
from .rectifier import RectifierModel


def format_value(value: Any) -> str:
    """Shortest text that parses back to the same value; floats keep full precision."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(float(value))
    if hasattr(value, "item"):  # numpy scalar
        return format_value(value.item())
    if hasattr(value, "value") and isinstance(value.value, str):  # enum
        return value.value
    return str(value)


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
            writer.writerow([format_value(v) for v in row])
    return path


def read_table(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def manifest(command: str, scenario: ScenarioConfig | None, model: RectifierModel | None,
             files: Sequence[Path], **extra: Any) -> dict:
    from . import __version__

    data: dict[str, Any] = {"command": command, "version": __version__,
                            "files": sorted(Path(f).name for f in files)}
    if scenario is not None:
        data["config_sha256"] = scenario.digest()
        data["config_source"] = Path(scenario.source).name
    if model is not None:
        data["rectifier"] = {**model.to_dict(), "p_thr_w": model.p_thr}
    data.update({k: v for k, v in extra.items() if v is not None})
    return data


def write_manifest(out_dir: str | Path, data: dict) -> Path:
    """Write ``<command>.manifest.json`` with sorted keys so identical runs give identical bytes."""
    path = Path(out_dir) / f"{data['command']}.manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path

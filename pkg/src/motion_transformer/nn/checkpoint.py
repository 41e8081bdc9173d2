"""
Parameter container: a zip readable by numpy.load holding one .npy per
parameter ("<group>/<name>.npy") and a meta.json record.

Entries are written in sorted order with a fixed timestamp so identical
parameters always produce identical bytes.
"""

import io
import json
import zipfile
from pathlib import Path
from typing import Any

import numpy as np

from motion_transformer.nn.layers import ParamSet
from motion_transformer.types import DataError

FORMAT_VERSION = 1
META_NAME = "meta.json"
_FIXED_TIME = (1980, 1, 1, 0, 0, 0)


def _entry(name: str) -> zipfile.ZipInfo:
    info = zipfile.ZipInfo(name, date_time=_FIXED_TIME)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    return info


def save_checkpoint(path: Path, groups: dict[str, ParamSet], meta: dict[str, Any]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    record = {"format_version": FORMAT_VERSION, **meta}
    tmp = path.with_suffix(path.suffix + ".tmp")
    with zipfile.ZipFile(tmp, "w") as zf:
        zf.writestr(_entry(META_NAME), json.dumps(record, sort_keys=True, indent=2))
        for group_name in sorted(groups):
            group = groups[group_name]
            for name in sorted(group):
                buffer = io.BytesIO()
                np.lib.format.write_array(buffer, np.ascontiguousarray(group[name].values), allow_pickle=False)
                zf.writestr(_entry(f"{group_name}/{name}.npy"), buffer.getvalue())
    tmp.replace(path)


def load_checkpoint(path: Path) -> tuple[dict[str, dict[str, np.ndarray]], dict[str, Any]]:
    """Returns arrays grouped by parameter set and the meta record."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"Checkpoint not found: {path}")
    try:
        with zipfile.ZipFile(path, "r") as zf:
            meta = json.loads(zf.read(META_NAME).decode("utf-8"))
            groups: dict[str, dict[str, np.ndarray]] = {}
            for name in zf.namelist():
                if not name.endswith(".npy"):
                    continue
                group_name, _, param = name[: -len(".npy")].partition("/")
                with zf.open(name) as f:
                    groups.setdefault(group_name, {})[param] = np.lib.format.read_array(io.BytesIO(f.read()), allow_pickle=False)
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as e:
        raise DataError(f"Not a valid checkpoint: {path}: {e}") from e
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"Unsupported checkpoint format_version {version!r} in {path}")
    return groups, meta

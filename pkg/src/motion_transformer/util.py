import hashlib
import json
import platform
import zlib
from pathlib import Path
from typing import Any

import psutil


def file_digest(path: Path) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            sha.update(chunk)
    return sha.hexdigest()


def tree_digests(root: Path) -> dict[str, str]:
    """sha256 of every file under root, keyed by posix relative path."""
    root = Path(root)
    if root.is_file():
        return {root.name: file_digest(root)}
    out: dict[str, str] = {}
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        out[path.relative_to(root).as_posix()] = file_digest(path)
    return out


def stable_key(name: str) -> int:
    """Process-independent integer for seeding per-name random streams."""
    return zlib.crc32(name.encode("utf-8"))


def experiment_id(command: str, payload: dict[str, Any]) -> str:
    text = json.dumps({"command": command, **payload}, sort_keys=True, default=str)
    return f"{command}-{hashlib.sha256(text.encode('utf-8')).hexdigest()[:12]}"


def worker_count(jobs: int) -> int:
    cpus = psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
    return max(1, min(jobs, cpus))


def host_facts() -> dict[str, Any]:
    return {
        "python": platform.python_version(),
        "platform": platform.platform(),
        "cpu_count": psutil.cpu_count(),
        "memory_bytes": psutil.virtual_memory().total,
    }

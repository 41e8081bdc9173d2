import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from motion_transformer.types import DataError
from motion_transformer.util import experiment_id, host_facts, tree_digests

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    """What a command ran on and what it produced."""

    experiment_id: str
    command: str
    seed: int
    config: dict[str, Any]
    inputs: dict[str, dict[str, str]]
    outputs: dict[str, str] = field(default_factory=dict)
    status: str = "started"
    host: dict[str, Any] = field(default_factory=host_facts)

    @staticmethod
    def create(command: str, seed: int, config: dict[str, Any], inputs: dict[str, Path | None]) -> "RunManifest":
        """Digests every input file (or every file under an input directory)."""
        digests = {name: tree_digests(path) for name, path in inputs.items() if path is not None}
        payload = {"seed": seed, "config": config, "inputs": digests}
        return RunManifest(
            experiment_id=experiment_id(command, payload),
            command=command,
            seed=seed,
            config=config,
            inputs=digests,
        )

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @staticmethod
    def from_json(data: dict[str, Any]) -> "RunManifest":
        return RunManifest(**data)

    def write(self, directory: Path) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / MANIFEST_NAME
        path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
        return path

    @staticmethod
    def read(path: Path) -> "RunManifest":
        if path.is_dir():
            path = path / MANIFEST_NAME
        try:
            return RunManifest.from_json(json.loads(path.read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError, TypeError) as e:
            raise DataError(f"Cannot read run manifest {path}: {e}") from e

    def finish(self, directory: Path, status: str = "ok") -> Path:
        """Records digests of everything written to directory except the manifest and run log."""
        outputs = tree_digests(directory)
        for name in (MANIFEST_NAME, "run.log"):
            outputs.pop(name, None)
        self.outputs = outputs
        self.status = status
        path = self.write(directory)
        logger.info(f"Run {self.experiment_id} finished with status {status}, {len(outputs)} outputs")
        return path

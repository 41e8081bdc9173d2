import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from appdirs import user_data_dir
from dotenv import load_dotenv

from motion_transformer.types import DataError, UsageError

ENV_DB_URL = "MOTION_TRANSFORMER_DB_URL"
ENV_LOG_LEVEL = "MOTION_TRANSFORMER_LOG_LEVEL"

_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


@dataclass
class Section:
    name: str
    data: dict[str, str] = field(default_factory=dict)

    def add(self, key: str, value: str) -> None:
        self.data[key] = value

    def get(self, key: str) -> str | None:
        return self.data.get(key)

    def require(self, key: str) -> str:
        if key not in self.data:
            where = f" in section [{self.name}]" if self.name else ""
            raise UsageError(f"Missing config key '{key}'{where}")
        return self.data[key]


@dataclass
class Parsed:
    sections: dict[str, Section]

    @staticmethod
    def parse(content: str) -> "Parsed":
        return parse_config(content)

    @property
    def root(self) -> Section:
        return self.sections[""]


def parse_config(content: str) -> Parsed:
    """
    Parses key = value text into sections.

    Keys before the first [section] header land in the unnamed root section.
    Lines starting with '#' or ';' are comments.
    """
    root = Section(name="")
    sections: dict[str, Section] = {"": root}
    current_section = root

    for lineno, line in enumerate(content.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section_name = line[1:-1].strip()
            current_section = sections.setdefault(section_name, Section(name=section_name))
        elif "=" in line:
            # split only on the first '='
            key, value = line.split("=", 1)
            current_section.add(key.strip(), value.strip())
        else:
            raise UsageError(f"Config line {lineno} is not 'key = value': {line!r}")
    return Parsed(sections=sections)


def to_config_text(data: dict[str, object]) -> str:
    out = ""
    for key, value in data.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        out += f"{key} = {value}\n"
    return out


def _parse_bool(key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise UsageError(f"Config key '{key}' expects a boolean, got {value!r}")


def coerce_value(key: str, value: str, kind: type) -> object:
    try:
        if kind is bool:
            return _parse_bool(key, value)
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
        return value
    except ValueError as e:
        raise UsageError(f"Config key '{key}' expects {kind.__name__}, got {value!r}") from e


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.01
    lambda2: float = 100.0
    lambda3: float = 0.1
    lambda4: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise UsageError(f"Loss weight {f.name} must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    """Training run configuration; field names are the config-file keys."""

    source: str
    target: str
    window: int
    d_z: int
    lambda1: float
    lambda2: float
    lambda3: float
    lambda4: float
    lr: float
    batch_size: int
    steps: int
    disc_steps_per_gen_step: int
    seed: int
    hidden: int = 16
    stride: int = 200
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    checkpoint_every: int = 0
    log_every: int = 100
    adversarial: bool = True
    val_fraction: float = 0.1

    REQUIRED = (
        "source",
        "target",
        "window",
        "d_z",
        "lambda1",
        "lambda2",
        "lambda3",
        "lambda4",
        "lr",
        "batch_size",
        "steps",
        "disc_steps_per_gen_step",
        "seed",
    )

    def __post_init__(self):
        if not self.lr > 0:
            raise UsageError(f"lr must be > 0, got {self.lr}")
        for name in ("window", "d_z", "batch_size", "hidden", "stride"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be positive")
        for name in ("steps", "disc_steps_per_gen_step", "checkpoint_every", "log_every"):
            if getattr(self, name) < 0:
                raise UsageError(f"{name} must be >= 0")
        if self.source == self.target:
            raise UsageError("source and target domains must differ")
        if not 0.0 <= self.val_fraction < 1.0:
            raise UsageError("val_fraction must be in [0, 1)")
        # validates the lambdas
        _ = self.weights

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.lambda1, self.lambda2, self.lambda3, self.lambda4)

    @staticmethod
    def from_text(content: str) -> "TrainConfig":
        section = parse_config(content).root
        known = {f.name: f for f in fields(TrainConfig)}
        for key in section.data:
            if key not in known:
                raise UsageError(f"Unknown config key '{key}'")
        for key in TrainConfig.REQUIRED:
            section.require(key)
        kwargs: dict[str, object] = {}
        for key, value in section.data.items():
            kind = known[key].type
            assert isinstance(kind, type)
            kwargs[key] = coerce_value(key, value, kind)
        return TrainConfig(**kwargs)  # type: ignore[arg-type]

    @staticmethod
    def from_file(path: Path) -> "TrainConfig":
        if not path.exists():
            raise UsageError(f"Config file not found: {path}")
        return TrainConfig.from_text(path.read_text(encoding="utf-8"))

    def with_overrides(self, **overrides: object) -> "TrainConfig":
        data = asdict(self)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return TrainConfig(**data)  # type: ignore[arg-type]

    def to_dict(self) -> dict[str, object]:
        return asdict(self)

    def to_text(self) -> str:
        return to_config_text(self.to_dict())


@dataclass(frozen=True)
class DatasetManifest:
    """One recording: IMU file, optional pose file, domain and nominal rate."""

    imu: Path
    poses: Path | None
    domain: str
    rate: float

    @staticmethod
    def from_file(path: Path) -> "DatasetManifest":
        path = Path(path)
        if path.is_dir():
            path = path / "manifest.txt"
        if not path.exists():
            raise DataError(f"Dataset manifest not found: {path}")
        try:
            section = parse_config(path.read_text(encoding="utf-8")).root
            poses = section.get("poses")
            rate = coerce_value("rate", section.require("rate"), float)
            imu = section.require("imu")
            domain = section.require("domain")
        except UsageError as e:
            raise DataError(f"{path}: {e}") from e
        assert isinstance(rate, float)
        if not rate > 0:
            raise DataError(f"{path}: rate must be > 0, got {rate}")
        base = path.parent
        return DatasetManifest(imu=base / imu, poses=(base / poses) if poses else None, domain=domain, rate=rate)

    def write(self, path: Path) -> None:
        data: dict[str, object] = {"imu": self.imu.name}
        if self.poses is not None:
            data["poses"] = self.poses.name
        data["domain"] = self.domain
        data["rate"] = self.rate
        path.write_text(to_config_text(data), encoding="utf-8")


def load_env() -> None:
    load_dotenv(Path(".env"))


def db_url_from_env() -> str | None:
    load_env()
    return os.getenv(ENV_DB_URL)


def log_level_from_env(default: str = "INFO") -> str:
    load_env()
    return os.getenv(ENV_LOG_LEVEL, default).upper()


def default_run_dir(experiment_id: str) -> Path:
    return Path(user_data_dir("motion_transformer")) / "runs" / experiment_id

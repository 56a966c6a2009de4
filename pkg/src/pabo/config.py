"""Declarative scenario files.

Scenarios are YAML mappings. ``render`` produces the canonical text whose
hash identifies a run.
"""

from __future__ import annotations

import hashlib
from dataclasses import MISSING, asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import yaml

PRESET_NAMES = (
    "tree-mild", "tree-moderate", "tree-severe", "oo-sweep",
    "ft-3to1", "ft-6to1", "ft-9to1", "ft-12to1", "ft-m2m",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LinkCfg:
    rate: float = 1e9
    propagation_delay: float = 0.0


@dataclass(frozen=True)
class QueueCfg:
    switch_normal: int = 500
    switch_bounce: int = 500
    host_normal: int = 1500
    host_bounce: int = 1500
    # normal-queue multiplier applied in baseline mode
    baseline_factor: int = 2


@dataclass(frozen=True)
class BurstBlock:
    src: str
    dst: str
    num_packets_per_generate: int
    send_interval: float = 10e-6
    pause_interval: float = 0.2
    payload: int = 1500
    start: float = 0.0


@dataclass(frozen=True)
class SessionBlock:
    client: str
    servers: tuple[str, ...]
    request_len: int = 200
    reply_len: int = 1 << 20
    requests_per_session: int = 4
    inter_request_gap: float = 1.0
    advertised_window: int = 45535
    mss: int = 1500
    fast_retransmit: bool = True
    rto_fixed: float | None = None
    start: float = 0.0


@dataclass(frozen=True)
class OutputCfg:
    # 0 keeps every queue-length change in util_timeseries.csv
    util_sample_interval: float = 1e-4
    trace: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    topology: str
    mode: str = "pabo"
    theta: float = 0.8
    lam: float = 50.0
    duration: float = 1.0
    seed: int = 1
    d_threshold: int | None = None
    link: LinkCfg = field(default_factory=LinkCfg)
    queues: QueueCfg = field(default_factory=QueueCfg)
    bursts: tuple[BurstBlock, ...] = ()
    sessions: tuple[SessionBlock, ...] = ()
    outputs: OutputCfg = field(default_factory=OutputCfg)

    def with_(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


# where top-level fields live in the YAML text, for error messages
_YAML_PATHS = {"lam": "lambda", "bursts": "traffic.bursts", "sessions": "traffic.sessions"}


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in fields(cls)}
    extra = set(data) - names
    if extra:
        raise ConfigError(f"{where}.{sorted(extra)[0]}: unknown field")
    kw = {}
    for f in fields(cls):
        path = _YAML_PATHS.get(f.name, f.name) if not where else f"{where}.{f.name}"
        if f.name not in data:
            if f.default is MISSING and f.default_factory is MISSING:
                raise ConfigError(f"{path}: required field missing")
            continue
        kw[f.name] = _coerce(f.type, data[f.name], path)
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"{where or cls.__name__}: {exc}") from None


def _coerce(tp: str, v, where: str):
    tp = tp.replace(" ", "")
    if v is None:
        if "None" in tp:
            return None
        raise ConfigError(f"{where}: value required")
    if tp.startswith("int"):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{where}: expected an integer, got {v!r}")
        return v
    if tp.startswith("float"):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {v!r}")
        return float(v)
    if tp == "bool":
        if not isinstance(v, bool):
            raise ConfigError(f"{where}: expected true/false, got {v!r}")
        return v
    if tp == "str":
        if not isinstance(v, str):
            raise ConfigError(f"{where}: expected a string, got {v!r}")
        return v
    if tp == "tuple[str,...]":
        if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
            raise ConfigError(f"{where}: expected a list of names")
        return tuple(v)
    sub = {"LinkCfg": LinkCfg, "QueueCfg": QueueCfg, "OutputCfg": OutputCfg}
    if tp in sub:
        return _build(sub[tp], v, where)
    if tp in ("tuple[BurstBlock,...]", "tuple[SessionBlock,...]"):
        cls = BurstBlock if "Burst" in tp else SessionBlock
        if not isinstance(v, list):
            raise ConfigError(f"{where}: expected a list")
        return tuple(_build(cls, x, f"{where}[{i}]") for i, x in enumerate(v))
    raise ConfigError(f"{where}: unsupported field type {tp}")


def from_dict(data: dict) -> ScenarioConfig:
    data = dict(data)
    if "lambda" in data:
        data["lam"] = data.pop("lambda")
    traffic = data.pop("traffic", None) or {}
    if not isinstance(traffic, dict):
        raise ConfigError("traffic: expected a mapping")
    for key in traffic:
        if key not in ("bursts", "sessions"):
            raise ConfigError(f"traffic.{key}: unknown field")
    data["bursts"] = traffic.get("bursts") or []
    data["sessions"] = traffic.get("sessions") or []
    cfg = _build(ScenarioConfig, data, "")
    validate(cfg)
    return cfg


def to_dict(cfg: ScenarioConfig) -> dict:
    d = asdict(cfg)
    d["lambda"] = d.pop("lam")
    d["traffic"] = {
        "bursts": [dict(b) for b in d.pop("bursts")],
        "sessions": [dict(s, servers=list(s["servers"])) for s in d.pop("sessions")],
    }
    return d


def render(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=True, default_flow_style=False)


def parse(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("scenario file must be a mapping")
    return from_dict(data)


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(render(cfg).encode()).hexdigest()[:16]


def validate(cfg: ScenarioConfig) -> None:
    if cfg.topology not in ("tree", "fattree"):
        raise ConfigError(f"topology: unknown topology {cfg.topology!r}")
    if cfg.mode not in ("pabo", "baseline"):
        raise ConfigError(f"mode: must be pabo or baseline, got {cfg.mode!r}")
    if not 0.0 <= cfg.theta <= 1.0:
        raise ConfigError(f"theta: must lie in [0, 1], got {cfg.theta}")
    if cfg.lam < 0:
        raise ConfigError(f"lambda: must be non-negative, got {cfg.lam}")
    if cfg.duration <= 0:
        raise ConfigError("duration: must be positive")
    if cfg.d_threshold is not None and cfg.d_threshold <= 0:
        raise ConfigError("d_threshold: must be positive")
    if cfg.link.rate <= 0:
        raise ConfigError("link.rate: must be positive")
    q = cfg.queues
    for name in ("switch_normal", "switch_bounce", "host_normal", "host_bounce", "baseline_factor"):
        if getattr(q, name) <= 0:
            raise ConfigError(f"queues.{name}: must be positive")
    for i, b in enumerate(cfg.bursts):
        where = f"traffic.bursts[{i}]"
        if b.num_packets_per_generate <= 0:
            raise ConfigError(f"{where}.num_packets_per_generate: must be positive")
        if b.send_interval <= 0:
            raise ConfigError(f"{where}.send_interval: must be positive")
        if b.pause_interval <= b.num_packets_per_generate * b.send_interval:
            raise ConfigError(f"{where}.pause_interval: must exceed one generating's duration")
    for i, s in enumerate(cfg.sessions):
        where = f"traffic.sessions[{i}]"
        if not s.servers:
            raise ConfigError(f"{where}.servers: at least one server required")
        if s.advertised_window < s.mss:
            raise ConfigError(f"{where}.advertised_window: must be at least one mss")
        if s.mss <= 0 or s.reply_len <= 0 or s.requests_per_session <= 0:
            raise ConfigError(f"{where}: mss, reply_len and requests_per_session must be positive")


def load(path_or_name: str | Path) -> ScenarioConfig:
    """Read a scenario file, or a preset when given a bare preset name."""
    p = Path(path_or_name)
    if p.exists():
        return parse(p.read_text())
    if str(path_or_name) in PRESET_NAMES:
        return preset(str(path_or_name))
    raise ConfigError(f"no such scenario file or preset: {path_or_name}")


def preset_text(name: str) -> str:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}")
    return resources.files("pabo.presets").joinpath(f"{name}.yaml").read_text()


def preset(name: str) -> ScenarioConfig:
    return parse(preset_text(name))

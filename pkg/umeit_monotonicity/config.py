import copy
import hashlib
import json
import logging
import os
from dataclasses import dataclass
from typing import Any

from umeit_monotonicity import __version__
from umeit_monotonicity.errors import ConfigError, ValidationError
from umeit_monotonicity.geometry.mesh import ElectrodeLayout
from umeit_monotonicity.geometry.regions import RegionSpec
from umeit_monotonicity.phantom import Inclusion, Phantom
from umeit_monotonicity.scan import ScanConfig
from umeit_monotonicity.validator.numbers import validate_int, validate_number, validate_number_or_keyword
from umeit_monotonicity.validator.region import validate_region

logger = logging.getLogger(__name__)

# Defaults and env var names
DEFAULT_MESH_LEVEL = 1
DEFAULT_OUT_DIR = "out"
DEFAULT_THREADS = 1
ENV_OUT_DIR = "UMEIT_OUT_DIR"
ENV_THREADS = "UMEIT_THREADS"
ENV_MESH_LEVEL = "UMEIT_MESH_LEVEL"
ENV_DELTA = "UMEIT_DELTA"
ENV_BETA = "UMEIT_BETA"

BLOCK_KEYS: dict[str, set[str]] = {
    "geometry": {"radius", "electrodes", "target_h", "mesh_level"},
    "phantom": {"sigma", "eps", "omega", "inclusions"},
    "measurement": {"patterns", "symmetrize"},
    "detection": {"beta", "delta", "case", "regions"},
    "scan": {"ball_radius", "spacing", "margin"},
    "output": {"dir"},
}
ELECTRODE_KEYS = {"count", "coverage", "start_angle"}
INCLUSION_KEYS = frozenset({"sigma", "eps"})
NAMED_REGION_KEYS = frozenset({"name"})
PATTERN_KINDS = ("adjacent",)
CASES = ("a", "b", "auto")


# ---------- value types ----------

@dataclass(frozen=True)
class GeometryConfig:
    radius: float
    layout: ElectrodeLayout
    target_h: float
    mesh_level: int


@dataclass(frozen=True)
class NamedRegion:
    name: str
    region: RegionSpec


@dataclass(frozen=True)
class DetectionConfig:
    beta: float | str
    delta: float | str
    case: str
    regions: tuple[NamedRegion, ...]


@dataclass(frozen=True)
class ScanBlock:
    ball_radius: float
    spacing: float
    margin: float


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig
    phantom: Phantom
    patterns: str
    symmetrize: bool
    detection: DetectionConfig
    scan: ScanBlock | None
    out_dir: str
    threads: int
    config_hash: str

    def scan_config(self) -> ScanConfig:
        if self.scan is None:
            raise ConfigError("MISSING", field="scan")
        return ScanConfig(
            ball_radius=self.scan.ball_radius, spacing=self.scan.spacing, margin=self.scan.margin,
            beta=self.detection.beta, delta=self.detection.delta, case=self.detection.case,
            threads=self.threads,
        )

    def provenance(self) -> dict[str, str]:
        """Header lines shared by every output file."""
        return {
            "tool": f"umeit-monotonicity {__version__}",
            "config_hash": self.config_hash,
            "omega": format(self.phantom.omega, ".17g"),
        }


# ---------- helper functions ----------

def _env_int(name: str, default: int) -> int:
    """Read an int from the environment; return default if missing or invalid."""
    raw = os.getenv(name)
    if raw is None:
        return default
    try:
        return int(raw.strip())
    except Exception:
        logger.warning("Invalid int in env %s=%r (using default=%s)", name, raw, default)
        return default


def _env_choice(name: str, keywords: tuple[str, ...], **kw) -> float | str | None:
    """Read a number-or-keyword from the environment; None if missing or invalid."""
    raw = os.getenv(name)
    if raw is None:
        return None
    ok, code, value = validate_number_or_keyword(raw, keywords, **kw)
    if not ok:
        logger.warning("Invalid value in env %s=%r (%s); ignoring", name, raw, code)
        return None
    return value


def _load_json_file(path: str) -> dict:
    """
    Read the JSON run config. A missing file is logged and yields {} (so the
    first required field is reported); malformed JSON is a ConfigError.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        logger.warning("Config file not found: %s", path)
        return {}
    except json.JSONDecodeError as e:
        raise ConfigError("invalid JSON", field="config", detail=f"{path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("NOT_AN_OBJECT", field="config", detail=path)
    return data


def config_hash(raw: dict) -> str:
    """SHA-256 of the canonical JSON of the effective config (output location excluded)."""
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _require(result: tuple[bool, str | None, Any], path: str, raw: object) -> Any:
    ok, code, value = result
    if not ok:
        raise ConfigError(code or "INVALID", field=path, detail=repr(raw))
    return value


def _block(raw: dict, name: str, *, required: bool = False) -> dict:
    block = raw.get(name)
    if block is None:
        if required:
            raise ConfigError("MISSING", field=name)
        return {}
    if not isinstance(block, dict):
        raise ConfigError("NOT_AN_OBJECT", field=name)
    unknown = sorted(set(block) - BLOCK_KEYS[name])
    if unknown:
        raise ConfigError("UNKNOWN_KEY", field=f"{name}.{unknown[0]}")
    return block


def _set_default(raw: dict, block: str, key: str, value: object) -> None:
    if value is not None:
        raw.setdefault(block, {}).setdefault(key, value)


def _set(raw: dict, block: str, key: str, value: object) -> None:
    if value is not None:
        raw.setdefault(block, {})[key] = value


# ---------- public API ------------

def load_run_config(
    path: str | None,
    *,
    mesh_level: int | None = None,
    delta: str | float | None = None,
    beta: str | float | None = None,
    out_dir: str | None = None,
    threads: int | None = None,
    symmetrize: bool | None = None,
) -> RunConfig:
    """
    Build the effective run config.
    Precedence: defaults < env vars < config file < CLI overrides.
    Unknown keys anywhere in the file are rejected with their dotted path.
    """
    raw = copy.deepcopy(_load_json_file(path)) if path else {}
    unknown = sorted(set(raw) - set(BLOCK_KEYS))
    if unknown:
        raise ConfigError("UNKNOWN_KEY", field=unknown[0])
    # overrides below write into the blocks; null counts as absent
    for name in BLOCK_KEYS:
        if name in raw and raw[name] is None:
            del raw[name]
        elif name in raw and not isinstance(raw[name], dict):
            raise ConfigError("NOT_AN_OBJECT", field=name, detail=type(raw[name]).__name__)

    # env fills what the file leaves open
    if os.getenv(ENV_MESH_LEVEL) is not None:
        _set_default(raw, "geometry", "mesh_level", _env_int(ENV_MESH_LEVEL, DEFAULT_MESH_LEVEL))
    _set_default(raw, "detection", "delta", _env_choice(ENV_DELTA, ("auto",), nonnegative=True))
    _set_default(raw, "detection", "beta", _env_choice(ENV_BETA, ("max",), positive=True))
    _set_default(raw, "output", "dir", os.getenv(ENV_OUT_DIR))

    # cli overrides
    _set(raw, "geometry", "mesh_level", mesh_level)
    _set(raw, "detection", "delta", delta)
    _set(raw, "detection", "beta", beta)
    _set(raw, "output", "dir", out_dir)
    if symmetrize:
        _set(raw, "measurement", "symmetrize", True)

    effective_threads = threads if threads is not None else _env_int(ENV_THREADS, DEFAULT_THREADS)
    if effective_threads < 1:
        raise ConfigError("OUT_OF_RANGE", field="threads", detail=repr(effective_threads))

    geometry = _parse_geometry(_block(raw, "geometry", required=True))
    phantom = _parse_phantom(_block(raw, "phantom", required=True), geometry.radius)
    measurement = _block(raw, "measurement")
    patterns = measurement.get("patterns", "adjacent")
    if patterns not in PATTERN_KINDS:
        raise ConfigError("UNKNOWN_KEYWORD", field="measurement.patterns", detail=repr(patterns))
    sym = measurement.get("symmetrize", False)
    if not isinstance(sym, bool):
        raise ConfigError("NOT_A_BOOLEAN", field="measurement.symmetrize", detail=repr(sym))

    cfg = RunConfig(
        geometry=geometry,
        phantom=phantom,
        patterns=patterns,
        symmetrize=sym,
        detection=_parse_detection(_block(raw, "detection"), geometry.radius),
        scan=_parse_scan(raw),
        out_dir=str(_block(raw, "output").get("dir", DEFAULT_OUT_DIR)),
        threads=effective_threads,
        config_hash=config_hash({k: v for k, v in raw.items() if k != "output"}),
    )
    logger.debug("Effective config %s (hash %s)", raw, cfg.config_hash[:12])
    return cfg


# ---------- block parsers ----------

def _parse_geometry(block: dict) -> GeometryConfig:
    radius = _require(validate_number(block.get("radius"), positive=True), "geometry.radius", block.get("radius"))
    target_h = _require(validate_number(block.get("target_h"), positive=True, hi=radius),
                        "geometry.target_h", block.get("target_h"))
    level = _require(validate_int(block.get("mesh_level", DEFAULT_MESH_LEVEL), lo=0, hi=8),
                     "geometry.mesh_level", block.get("mesh_level"))

    el = block.get("electrodes", {})
    if not isinstance(el, dict):
        raise ConfigError("NOT_AN_OBJECT", field="geometry.electrodes")
    unknown = sorted(set(el) - ELECTRODE_KEYS)
    if unknown:
        raise ConfigError("UNKNOWN_KEY", field=f"geometry.electrodes.{unknown[0]}")
    count = _require(validate_int(el.get("count", 16), lo=3), "geometry.electrodes.count", el.get("count"))
    coverage = _require(validate_number(el.get("coverage", 0.5), lo=0.0, hi=1.0),
                        "geometry.electrodes.coverage", el.get("coverage"))
    start = None
    if "start_angle" in el:
        start = _require(validate_number(el["start_angle"]), "geometry.electrodes.start_angle", el["start_angle"])
    return GeometryConfig(radius, ElectrodeLayout(count, coverage, start), target_h, level)


def _parse_phantom(block: dict, radius: float) -> Phantom:
    sigma = _require(validate_number(block.get("sigma"), positive=True), "phantom.sigma", block.get("sigma"))
    eps = _require(validate_number(block.get("eps"), positive=True), "phantom.eps", block.get("eps"))
    omega = _require(validate_number(block.get("omega"), nonnegative=True), "phantom.omega", block.get("omega"))

    raw_incs = block.get("inclusions", [])
    if not isinstance(raw_incs, list):
        raise ConfigError("NOT_A_LIST", field="phantom.inclusions")
    inclusions = []
    for i, item in enumerate(raw_incs):
        path = f"phantom.inclusions[{i}]"
        region = _require(validate_region(item, extra_keys=INCLUSION_KEYS), path, item)
        s = _require(validate_number(item.get("sigma"), positive=True), f"{path}.sigma", item.get("sigma"))
        e = _require(validate_number(item.get("eps"), positive=True), f"{path}.eps", item.get("eps"))
        if not region.inside_disk(radius):
            raise ConfigError("OUTSIDE_DOMAIN", field=path, detail=region.describe())
        inclusions.append(Inclusion(region, s, e))
    try:
        return Phantom(sigma, eps, omega, tuple(inclusions))
    except ValidationError as e:
        raise ConfigError(str(e), field=e.field or "phantom", detail=e.detail) from e


def _parse_detection(block: dict, radius: float) -> DetectionConfig:
    beta = _require(validate_number_or_keyword(block.get("beta", "max"), ("max",), nonnegative=True),
                    "detection.beta", block.get("beta"))
    delta = _require(validate_number_or_keyword(block.get("delta", "auto"), ("auto",), nonnegative=True),
                     "detection.delta", block.get("delta"))
    case = block.get("case", "auto")
    if case not in CASES:
        raise ConfigError("UNKNOWN_KEYWORD", field="detection.case", detail=repr(case))

    raw_regions = block.get("regions", [])
    if not isinstance(raw_regions, list):
        raise ConfigError("NOT_A_LIST", field="detection.regions")
    regions = []
    for i, item in enumerate(raw_regions):
        path = f"detection.regions[{i}]"
        region = _require(validate_region(item, extra_keys=NAMED_REGION_KEYS), path, item)
        if not region.inside_disk(radius):
            raise ConfigError("OUTSIDE_DOMAIN", field=path, detail=region.describe())
        name = str(item.get("name", f"B{i + 1}"))
        regions.append(NamedRegion(name, region))
    names = [r.name for r in regions]
    if len(set(names)) != len(names):
        raise ConfigError("DUPLICATE_NAME", field="detection.regions", detail=", ".join(names))
    return DetectionConfig(beta, delta, case, tuple(regions))


def _parse_scan(raw: dict) -> ScanBlock | None:
    if "scan" not in raw:
        return None
    block = _block(raw, "scan")
    ball_radius = _require(validate_number(block.get("ball_radius"), positive=True),
                           "scan.ball_radius", block.get("ball_radius"))
    spacing = _require(validate_number(block.get("spacing"), positive=True), "scan.spacing", block.get("spacing"))
    margin = _require(validate_number(block.get("margin", 0.0), nonnegative=True), "scan.margin", block.get("margin"))
    return ScanBlock(ball_radius, spacing, margin)

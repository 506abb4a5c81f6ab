from umeit_monotonicity.errors import ValidationError
from umeit_monotonicity.geometry.regions import Disk, Polygon, RegionSpec
from umeit_monotonicity.types import RegionValidationCode
from umeit_monotonicity.validator.numbers import validate_number

DISK_KEYS = {"shape", "center", "radius"}
POLYGON_KEYS = {"shape", "vertices"}


def validate_region(
    obj: object,
    *,
    extra_keys: frozenset[str] = frozenset(),
) -> tuple[bool, RegionValidationCode | None, RegionSpec | None]:
    """
    Parse a region block:
      {"shape": "disk", "center": [x, y], "radius": r}
      {"shape": "polygon", "vertices": [[x, y], ...]}
    `extra_keys` lists keys owned by the caller (e.g. sigma/eps of an inclusion).
    Returns:
      (True, None, region)            on success
      (False, <reason_code>, None)    on failure
    """
    if not isinstance(obj, dict):
        return False, "NOT_AN_OBJECT", None
    shape = obj.get("shape", "disk")
    if shape == "disk":
        allowed = DISK_KEYS
    elif shape == "polygon":
        allowed = POLYGON_KEYS
    else:
        return False, "UNKNOWN_SHAPE", None
    if set(obj) - allowed - extra_keys:
        return False, "UNKNOWN_KEY", None

    if shape == "disk":
        center = _point(obj.get("center"))
        if center is None:
            return False, "BAD_POINT", None
        ok, _, radius = validate_number(obj.get("radius"), positive=True)
        if not ok:
            return False, "NOT_POSITIVE", None
        return True, None, Disk(center, radius)

    raw = obj.get("vertices")
    if not isinstance(raw, list):
        return False, "TOO_FEW_VERTICES", None
    vertices = [_point(v) for v in raw]
    if any(v is None for v in vertices):
        return False, "BAD_POINT", None
    if len(vertices) < 3:
        return False, "TOO_FEW_VERTICES", None
    try:
        return True, None, Polygon(tuple(vertices))
    except ValidationError:
        return False, "DEGENERATE", None


def _point(value: object) -> tuple[float, float] | None:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        return None
    coords = []
    for v in value:
        ok, _, x = validate_number(v)
        if not ok:
            return None
        coords.append(x)
    return coords[0], coords[1]

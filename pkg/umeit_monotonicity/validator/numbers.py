import math
from collections.abc import Collection

from umeit_monotonicity.types import ChoiceValidationCode, IntValidationCode, NumberValidationCode


def validate_number(
    value: object,
    *,
    positive: bool = False,
    nonnegative: bool = False,
    lo: float | None = None,
    hi: float | None = None,
) -> tuple[bool, NumberValidationCode | None, float | None]:
    """
    Validate a real number from a JSON config or an env string.
    - Accepts ints, floats and trimmed numeric strings; rejects bools
    - lo/hi are exclusive bounds
    Returns:
      (True, None, value)             on success
      (False, <reason_code>, None)    on failure
    """
    if value is None:
        return False, "MISSING", None
    if isinstance(value, bool):
        return False, "NOT_A_NUMBER", None
    if isinstance(value, (int, float)):
        x = float(value)
    elif isinstance(value, str):
        try:
            x = float(value.strip())
        except ValueError:
            return False, "NOT_A_NUMBER", None
    else:
        return False, "NOT_A_NUMBER", None

    if not math.isfinite(x):
        return False, "NOT_FINITE", None
    if positive and not x > 0.0:
        return False, "NOT_POSITIVE", None
    if nonnegative and x < 0.0:
        return False, "NEGATIVE", None
    if (lo is not None and not x > lo) or (hi is not None and not x < hi):
        return False, "OUT_OF_RANGE", None
    return True, None, x


def validate_int(
    value: object,
    *,
    lo: int | None = None,
    hi: int | None = None,
) -> tuple[bool, IntValidationCode | None, int | None]:
    """Integer in [lo, hi] (inclusive); accepts ints and trimmed digit strings, rejects bools and floats."""
    if value is None:
        return False, "MISSING", None
    if isinstance(value, bool):
        return False, "NOT_AN_INTEGER", None
    if isinstance(value, int):
        n = value
    elif isinstance(value, str):
        try:
            n = int(value.strip())  # "07" ok, "5.0" rejected
        except ValueError:
            return False, "NOT_AN_INTEGER", None
    else:
        return False, "NOT_AN_INTEGER", None

    if (lo is not None and n < lo) or (hi is not None and n > hi):
        return False, "OUT_OF_RANGE", None
    return True, None, n


def validate_number_or_keyword(
    value: object,
    keywords: Collection[str],
    *,
    positive: bool = False,
    nonnegative: bool = False,
) -> tuple[bool, ChoiceValidationCode | None, float | str | None]:
    """
    Either one of `keywords` (e.g. "max", "auto"; case-insensitive) or a number.
    Used for detection.beta, detection.delta and their CLI/env overrides.
    """
    if value is None:
        return False, "MISSING", None
    if isinstance(value, str) and not _looks_numeric(value):
        word = value.strip().lower()
        if word in keywords:
            return True, None, word
        return False, "UNKNOWN_KEYWORD", None
    ok, code, x = validate_number(value, positive=positive, nonnegative=nonnegative)
    if not ok:
        return False, code, None  # type: ignore[return-value]
    return True, None, x


def _looks_numeric(s: str) -> bool:
    try:
        float(s.strip())
    except ValueError:
        return False
    return True

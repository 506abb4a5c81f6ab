from typing import Literal, TypedDict

# --- measurement / detection vocabulary ---
FrequencyMode = Literal["DC", "AC"]
Case = Literal["a", "b"]

# --- number-field reason codes (validator.numbers) ---
NumberValidationCode = Literal[
    "MISSING",
    "NOT_A_NUMBER",
    "NOT_FINITE",
    "NOT_POSITIVE",
    "NEGATIVE",
    "OUT_OF_RANGE",
]

# --- integer-field reason codes ---
IntValidationCode = Literal[
    "MISSING",
    "NOT_AN_INTEGER",
    "OUT_OF_RANGE",
]

# --- "number or keyword" fields: beta=max, delta=auto, case=auto ---
ChoiceValidationCode = Literal[
    "MISSING",
    "NOT_A_NUMBER",
    "NOT_FINITE",
    "NOT_POSITIVE",
    "NEGATIVE",
    "UNKNOWN_KEYWORD",
]

# --- region block reason codes (validator.region) ---
RegionValidationCode = Literal[
    "NOT_AN_OBJECT",
    "UNKNOWN_SHAPE",
    "BAD_POINT",
    "NOT_POSITIVE",
    "TOO_FEW_VERTICES",
    "DEGENERATE",
    "UNKNOWN_KEY",
]


class VerifyItem(TypedDict):
    name: str
    passed: bool
    value: float
    limit: float
    note: str


class ScanSummary(TypedDict):
    balls: int
    marked: int
    failed: int
    delta: float
    beta: float
    case: str
    duration_s: float

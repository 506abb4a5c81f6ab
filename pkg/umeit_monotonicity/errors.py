import numpy as np

MAX_DETAIL_CHARS = 300

# ---- exceptions ----

class UmeitError(Exception):
    def __init__(
        self,
        message: str,
        *,
        field: str | None = None,
        detail: str | None = None,
    ) -> None:
        super().__init__(message)
        self.field = field
        self.detail = detail[:MAX_DETAIL_CHARS] if detail else detail

    def one_line(self) -> str:
        """Single-line rendering used by the CLI before a non-zero exit."""
        parts = [str(self)]
        if self.field:
            parts.insert(0, f"{self.field}:")
        if self.detail:
            parts.append(f"({self.detail})")
        return " ".join(parts).replace("\n", " ")


class ValidationError(UmeitError): ...          # bad physical input
class ConfigError(ValidationError): ...         # bad/missing/unknown config key
class MeshError(UmeitError): ...                # invalid geometry
class ElectrodeUnderResolved(MeshError): ...    # < 2 boundary edges on an electrode
class ContrastError(UmeitError): ...            # c = 0 or no inclusion constants
class UnsupportedCombination(UmeitError): ...   # modulation with AC data
class SolverError(UmeitError): ...              # gauge / factorization / current balance
class ProvenanceMismatch(UmeitError): ...       # matrices not comparable
class NotSymmetricError(UmeitError): ...        # eigen_spectrum precondition
class ScanError(UmeitError): ...                # no admissible balls


# ---- helpers ----

def require_finite(values, *, field: str) -> None:
    """Raise ValidationError when any entry is NaN or infinite."""
    arr = np.asarray(values)
    if not np.all(np.isfinite(arr)):
        bad = int(np.count_nonzero(~np.isfinite(arr)))
        raise ValidationError("non-finite values", field=field, detail=f"{bad} entries")


def require_positive(value: float, *, field: str) -> float:
    """Return `value` as float, or raise ValidationError if it is not > 0."""
    try:
        v = float(value)
    except (TypeError, ValueError) as e:
        raise ValidationError("not a number", field=field, detail=repr(value)) from e
    if not v > 0.0:
        raise ValidationError(f"must be > 0 (got {v!r})", field=field)
    return v

import csv
import logging

import numpy as np

logger = logging.getLogger(__name__)

_SECTIONS = ("real", "imag")


def read_matrix_csv(path: str, *, encoding: str = "utf-8") -> tuple[dict[str, str], np.ndarray]:
    """
    Read a matrix file written by writers.write_matrix_csv.
    - `# key: value` lines become the provenance dict
    - [real] and [imag] blocks are combined into one complex array
    Missing, duplicate or ragged sections raise ValueError.
    """
    provenance: dict[str, str] = {}
    blocks: dict[str, list[list[float]]] = {}
    current: str | None = None
    with open(path, "r", encoding=encoding, newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row:
                continue
            first = row[0].strip()
            if first.startswith("#"):
                key, sep, value = ",".join(row).lstrip("#").partition(":")
                if sep:
                    provenance[key.strip()] = value.strip()
                continue
            if first.startswith("[") and first.endswith("]"):
                current = first[1:-1]
                if current in blocks:
                    logger.error("Matrix CSV %s: duplicate section [%s] at line %d", path, current, line_no)
                    raise ValueError(f"Duplicate section: [{current}]")
                blocks[current] = []
                continue
            if current is None:
                raise ValueError(f"Data before first section at line {line_no}")
            try:
                blocks[current].append([float(v) for v in row])
            except ValueError as e:
                raise ValueError(f"Non-numeric value at line {line_no}: {row}") from e

    missing = [s for s in _SECTIONS if s not in blocks]
    if missing:
        logger.error("Matrix CSV %s: missing sections %s (found: %s)", path, missing, sorted(blocks))
        raise ValueError(f"Missing section(s): {missing}")
    real, imag = (np.array(blocks[s], dtype=float) for s in _SECTIONS)
    if real.ndim != 2 or real.shape != imag.shape or real.shape[0] != real.shape[1]:
        raise ValueError(f"Ragged or non-square matrix blocks: real {real.shape}, imag {imag.shape}")
    return provenance, real + 1j * imag

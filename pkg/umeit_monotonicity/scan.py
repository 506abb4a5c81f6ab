import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from umeit_monotonicity.batching import ordered_map
from umeit_monotonicity.errors import ScanError, UmeitError, ValidationError
from umeit_monotonicity.fem.shunt import ShuntSystem, assemble
from umeit_monotonicity.geometry.mesh import Mesh, elements_in_region, refine_mesh
from umeit_monotonicity.geometry.regions import Disk
from umeit_monotonicity.measurements import DrivePatternSet, MeasurementMatrix, measurement_matrix
from umeit_monotonicity.monotonicity import difference_matrix, estimate_delta, regularized_test
from umeit_monotonicity.phantom import ContrastConstants, Modulation, Phantom, contrast_constants, element_admittivity
from umeit_monotonicity.types import Case, ScanSummary

logger = logging.getLogger(__name__)

PROGRESS_EVERY = 20


# ---------- value types ----------

@dataclass(frozen=True)
class ScanConfig:
    """
    Test-ball grid and detection settings.
    - beta: number or "max" (the theorem bound for the selected case)
    - delta: number >= 0 or "auto" (two-level refinement estimate)
    - case: "a", "b" or "auto" (from the sign of the contrast)
    """
    ball_radius: float
    spacing: float
    margin: float = 0.0
    beta: float | str = "max"
    delta: float | str = "auto"
    case: str = "auto"
    threads: int = 1
    reuse_ac_matrix: bool = True
    low_rank: bool = True

    def __post_init__(self) -> None:
        if not self.ball_radius > 0:
            raise ValidationError(f"ball_radius must be > 0 (got {self.ball_radius!r})", field="scan.ball_radius")
        if not self.spacing > 0:
            raise ValidationError(f"spacing must be > 0 (got {self.spacing!r})", field="scan.spacing")
        if not self.margin >= 0:
            raise ValidationError(f"margin must be >= 0 (got {self.margin!r})", field="scan.margin")
        if self.case not in ("a", "b", "auto"):
            raise ValidationError(f"case must be a, b or auto (got {self.case!r})", field="detection.case")


@dataclass(frozen=True)
class BallResult:
    index: int
    ix: int
    iy: int
    center: tuple[float, float]
    radius: float
    verdict: bool
    margin: float
    min_eigenvalue: float
    runtime_s: float = 0.0
    error: str | None = None


@dataclass(frozen=True)
class ScanResult:
    balls: list[BallResult]
    delta_used: float
    beta_used: float
    case: Case
    spacing: float
    duration_s: float = 0.0

    @property
    def marked(self) -> list[BallResult]:
        return [b for b in self.balls if b.verdict]

    @property
    def failed(self) -> list[BallResult]:
        return [b for b in self.balls if b.error is not None]

    def summary(self) -> ScanSummary:
        return {
            "balls": len(self.balls),
            "marked": len(self.marked),
            "failed": len(self.failed),
            "delta": self.delta_used,
            "beta": self.beta_used,
            "case": self.case,
            "duration_s": round(self.duration_s, 3),
        }


# ---------- public API ------------

def generate_ball_grid(domain_radius: float, config: ScanConfig) -> list[Disk]:
    """
    Balls on the axis-aligned lattice spacing*(i, j), kept when
    |center| <= domain_radius - margin - ball_radius. Ordered by row, then column.
    """
    limit = domain_radius - config.margin - config.ball_radius
    n = math.floor(domain_radius / config.spacing)
    balls = []
    for iy in range(-n, n + 1):
        for ix in range(-n, n + 1):
            cx, cy = ix * config.spacing, iy * config.spacing
            if math.hypot(cx, cy) > limit:
                continue
            ball = Disk((cx, cy), config.ball_radius)
            if ball.inside_disk(domain_radius):
                balls.append(ball)
    if not balls:
        raise ScanError("no admissible balls",
                        detail=f"radius={domain_radius:g} ball_radius={config.ball_radius:g} "
                               f"spacing={config.spacing:g} margin={config.margin:g}")
    return balls


def grid_index(ball: Disk, spacing: float) -> tuple[int, int]:
    return round(ball.center[0] / spacing), round(ball.center[1] / spacing)


def resolve_case(constants: ContrastConstants, requested: str) -> Case:
    if requested == "auto":
        return constants.case
    if requested != constants.case:
        logger.warning("Requested case %s does not match the contrast sign (c=%.4g suggests case %s)",
                       requested, constants.c, constants.case)
    return requested  # type: ignore[return-value]


def resolve_beta(constants: ContrastConstants, case: Case, requested: float | str) -> float:
    bound = constants.beta_max_a if case == "a" else constants.beta_max_b
    if requested == "max":
        return bound
    beta = float(requested)
    if not beta > 0.0:
        raise ValidationError(f"beta must be > 0 for detection (got {beta!r})", field="detection.beta")
    if beta > bound:
        logger.warning("beta=%.6g exceeds the sufficient bound %.6g for case %s; verdicts may be unreliable",
                       beta, bound, case)
    return beta


def run_scan(phantom: Phantom, mesh: Mesh, patterns: DrivePatternSet, config: ScanConfig) -> ScanResult:
    """
    Mark every ball B for which the regularized definiteness test passes.
    The AC matrix and the DC factorization are computed once; each ball is a
    low-rank update of that factorization.
    """
    t0 = time.perf_counter()
    constants = contrast_constants(phantom)
    case = resolve_case(constants, config.case)
    beta = resolve_beta(constants, case, config.beta)
    balls = generate_ball_grid(mesh.radius, config)
    logger.info("Scan: %d balls (r=%g, spacing=%g), case %s, beta=%.6g, mesh level %d (%d triangles)",
                len(balls), config.ball_radius, config.spacing, case, beta, mesh.level, mesh.n_triangles)

    gamma0 = element_admittivity(phantom, mesh, "DC")
    gamma_w = element_admittivity(phantom, mesh, "AC")
    base = assemble(mesh, gamma0)
    r_ac = _ac_matrix(phantom, mesh, gamma_w, patterns, threads=config.threads)

    if config.delta == "auto":
        delta = unmodulated_delta(phantom, mesh, patterns, case, coarse=(base, r_ac), threads=config.threads)
        logger.info("Auto delta from levels %d/%d: %.6g", mesh.level, mesh.level + 1, delta)
    else:
        delta = float(config.delta)

    def evaluate(item: tuple[int, Disk]) -> BallResult:
        index, ball = item
        ix, iy = grid_index(ball, config.spacing)
        start = time.perf_counter()
        try:
            ac = r_ac if config.reuse_ac_matrix else _ac_matrix(phantom, mesh, gamma_w, patterns)
            r_mod = _modulated_matrix(phantom, mesh, patterns, base, gamma0, ball, beta, case,
                                      low_rank=config.low_rank)
            report = regularized_test(difference_matrix(r_mod, ac, phantom.alpha, case), delta, case)
        except (UmeitError, np.linalg.LinAlgError) as e:
            logger.warning("Ball %d at (%g, %g) failed: %s", index + 1, ball.center[0], ball.center[1], e)
            return BallResult(index, ix, iy, ball.center, ball.radius, False, math.nan, math.nan,
                              time.perf_counter() - start, error=str(e).replace("\n", " "))
        if (index + 1) % PROGRESS_EVERY == 0:
            logger.info("Progress: ball %d/%d", index + 1, len(balls))
        return BallResult(index, ix, iy, ball.center, ball.radius, report.verdict, report.margin,
                          report.min_eigenvalue, time.perf_counter() - start)

    results = ordered_map(evaluate, list(enumerate(balls)), threads=config.threads)
    result = ScanResult(balls=results, delta_used=delta, beta_used=beta, case=case,
                        spacing=config.spacing, duration_s=time.perf_counter() - t0)
    logger.info("Scan summary: %s", result.summary())
    return result


def unmodulated_delta(
    phantom: Phantom,
    mesh: Mesh,
    patterns: DrivePatternSet,
    case: Case,
    *,
    coarse: tuple[ShuntSystem, MeasurementMatrix] | None = None,
    threads: int = 1,
) -> float:
    """delta from the unmodulated difference matrix at this level and the next."""
    matrices = []
    for level_mesh, cached in ((mesh, coarse), (refine_mesh(mesh), None)):
        gamma0 = element_admittivity(phantom, level_mesh, "DC")
        if cached is None:
            dc_system = assemble(level_mesh, gamma0)
            r_ac = _ac_matrix(phantom, level_mesh, element_admittivity(phantom, level_mesh, "AC"),
                              patterns, threads=threads)
        else:
            dc_system, r_ac = cached
        r_dc = measurement_matrix(level_mesh, gamma0, patterns, mode="DC", omega=phantom.omega,
                                  system=dc_system, threads=threads)
        matrices.append(difference_matrix(r_dc, r_ac, phantom.alpha, case))
    return estimate_delta([(matrices[0], matrices[1])])


# ---------- helpers -----------

def _ac_matrix(phantom: Phantom, mesh: Mesh, gamma_w: np.ndarray, patterns: DrivePatternSet,
               *, threads: int = 1) -> MeasurementMatrix:
    return measurement_matrix(mesh, gamma_w, patterns, mode="AC", omega=phantom.omega, threads=threads)


def _modulated_matrix(phantom: Phantom, mesh: Mesh, patterns: DrivePatternSet, base: ShuntSystem,
                      gamma0: np.ndarray, ball: Disk, beta: float, case: Case,
                      *, low_rank: bool) -> MeasurementMatrix:
    modulation = Modulation.for_case(ball, beta, case)
    if low_rank:
        elements = elements_in_region(mesh, ball)
        if elements.size == 0:
            logger.warning("Ball at (%g, %g) contains no element centroid", *ball.center)
        factor = 1.0 + modulation.sign * modulation.beta
        if factor <= 0.0:
            raise ValidationError(f"modulation factor {factor:g} is not positive", field="modulation.beta")
        system = base.with_element_update(elements, gamma0[elements] * factor)
    else:
        system = assemble(mesh, element_admittivity(phantom, mesh, "DC", modulation))
    return measurement_matrix(mesh, system.gamma_e, patterns, mode="DC", modulation=modulation,
                              omega=phantom.omega, system=system)

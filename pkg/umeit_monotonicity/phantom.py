"""
Admittivity phantoms: constant background, inclusions with shared constants,
and ultrasound modulation of a focusing region.

- gamma_0 (DC):  sigma
- gamma_w (AC):  sigma + i*omega*eps
- alpha:         gamma_w / gamma_0 in the background
- modulation:    gamma_0 * (1 + sign * beta * chi_B), DC only
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from umeit_monotonicity.errors import (
    ContrastError,
    UnsupportedCombination,
    ValidationError,
    require_positive,
)
from umeit_monotonicity.geometry.mesh import Mesh, elements_in_region
from umeit_monotonicity.geometry.regions import RegionSpec, regions_overlap
from umeit_monotonicity.types import Case, FrequencyMode

logger = logging.getLogger(__name__)

# relative tolerance for "multiple inclusions share their constants"
_SHARED_RTOL = 1e-12


# ---------- value types ----------

@dataclass(frozen=True)
class Inclusion:
    region: RegionSpec
    sigma: float
    eps: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma", require_positive(self.sigma, field="inclusion.sigma"))
        object.__setattr__(self, "eps", require_positive(self.eps, field="inclusion.eps"))


@dataclass(frozen=True)
class Phantom:
    sigma_bg: float
    eps_bg: float
    omega: float
    inclusions: tuple[Inclusion, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma_bg", require_positive(self.sigma_bg, field="phantom.sigma"))
        object.__setattr__(self, "eps_bg", require_positive(self.eps_bg, field="phantom.eps"))
        omega = float(self.omega)
        if not (math.isfinite(omega) and omega >= 0.0):
            raise ValidationError(f"omega must be >= 0 (got {self.omega!r})", field="phantom.omega")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "inclusions", tuple(self.inclusions))
        for i, a in enumerate(self.inclusions):
            for b in self.inclusions[i + 1:]:
                if regions_overlap(a.region, b.region):
                    raise ValidationError("inclusion regions overlap",
                                          field="phantom.inclusions",
                                          detail=f"{a.region.describe()} / {b.region.describe()}")

    @property
    def alpha(self) -> complex:
        """Background ratio gamma_w / gamma_0 = 1 + i*omega*eps/sigma."""
        return complex(1.0, self.omega * self.eps_bg / self.sigma_bg)

    def background(self, freq_mode: FrequencyMode) -> complex:
        return _admittivity(self.sigma_bg, self.eps_bg, self.omega, freq_mode)

    def check_domain(self, radius: float) -> None:
        """Raise ValidationError unless every inclusion lies strictly inside the disk."""
        for inc in self.inclusions:
            if not inc.region.inside_disk(radius):
                raise ValidationError("inclusion not strictly inside the domain",
                                      field="phantom.inclusions", detail=inc.region.describe())

    def without_inclusions(self) -> "Phantom":
        return Phantom(self.sigma_bg, self.eps_bg, self.omega, ())


@dataclass(frozen=True)
class Modulation:
    """Focused modulation gamma_0 -> gamma_0 * (1 + sign*beta*chi_B)."""
    region: RegionSpec
    beta: float
    sign: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta", require_positive(self.beta, field="modulation.beta"))
        if self.sign not in (1, -1):
            raise ValidationError(f"sign must be +1 or -1 (got {self.sign!r})", field="modulation.sign")

    @classmethod
    def for_case(cls, region: RegionSpec, beta: float, case: Case) -> "Modulation":
        return cls(region=region, beta=beta, sign=1 if case == "a" else -1)

    def describe(self) -> str:
        op = "+" if self.sign > 0 else "-"
        return f"(1{op}{self.beta:.17g}*chi[{self.region.describe()}])"


@dataclass(frozen=True)
class ContrastConstants:
    sigma_bg: float
    eps_bg: float
    sigma_d: float
    eps_d: float
    omega: float
    c: float
    C: float
    C_prime: float
    alpha: complex
    beta_max_a: float
    beta_max_b: float

    @property
    def case(self) -> Case:
        """Case (a) for positive contrast, (b) for negative."""
        return "a" if self.c > 0 else "b"

    @property
    def beta_max(self) -> float:
        return self.beta_max_a if self.c > 0 else self.beta_max_b


@dataclass(frozen=True)
class PointwiseIdentity:
    """One identity evaluated on the background and inside the inclusion, two ways."""
    name: str
    background_direct: float
    background_closed: float
    inclusion_direct: float | None
    inclusion_closed: float | None

    def max_relative_error(self) -> float:
        pairs = [(self.background_direct, self.background_closed)]
        if self.inclusion_direct is not None and self.inclusion_closed is not None:
            pairs.append((self.inclusion_direct, self.inclusion_closed))
        scale = max(1.0, *(abs(v) for pair in pairs for v in pair))
        return max(abs(a - b) for a, b in pairs) / scale


# ---------- public API ------------

def element_admittivity(
    phantom: Phantom,
    mesh: Mesh,
    freq_mode: FrequencyMode,
    modulation: Modulation | None = None,
) -> np.ndarray:
    """
    Per-element complex admittivity, sampled at element centroids.
    - DC values are real (stored as complex with zero imaginary part)
    - modulation multiplies the DC values inside B by (1 + sign*beta)
    """
    if freq_mode not in ("DC", "AC"):
        raise ValidationError(f"unknown frequency mode {freq_mode!r}", field="freq_mode")
    if modulation is not None and freq_mode != "DC":
        raise UnsupportedCombination("unsupported combination: modulation is only applied to DC data")

    phantom.check_domain(mesh.radius)
    gamma = np.full(mesh.n_triangles, phantom.background(freq_mode), dtype=complex)
    for inc in phantom.inclusions:
        idx = elements_in_region(mesh, inc.region)
        gamma[idx] = _admittivity(inc.sigma, inc.eps, phantom.omega, freq_mode)

    if modulation is not None:
        if not modulation.region.inside_disk(mesh.radius):
            raise ValidationError("modulation region not strictly inside the domain",
                                  field="modulation.region", detail=modulation.region.describe())
        factor = 1.0 + modulation.sign * modulation.beta
        if factor <= 0.0:
            raise ValidationError(f"modulation factor 1{modulation.sign:+d}*beta = {factor:g} is not positive",
                                  field="modulation.beta")
        idx = elements_in_region(mesh, modulation.region)
        if idx.size == 0:
            logger.warning("Modulation region %s contains no element centroid at level %d",
                           modulation.region.describe(), mesh.level)
        gamma[idx] *= factor
    return gamma


def contrast_constants(phantom: Phantom) -> ContrastConstants:
    if not phantom.inclusions:
        raise ContrastError("no inclusion constants: the phantom has no inclusions")
    sigma_d, eps_d = _shared_inclusion_constants(phantom)
    if phantom.omega <= 0.0:
        raise ValidationError("omega must be > 0 for contrast constants", field="phantom.omega")

    s_o, e_o, w2 = phantom.sigma_bg, phantom.eps_bg, phantom.omega ** 2
    c = eps_d * s_o - e_o * sigma_d
    if c == 0.0:
        raise ContrastError("contrast condition violated",
                            detail=f"eps_D*sigma_bg - eps_bg*sigma_D = 0 "
                                   f"(sigma_bg={s_o:g}, eps_bg={e_o:g}, sigma_D={sigma_d:g}, eps_D={eps_d:g})")

    mixed = sigma_d * s_o + w2 * eps_d * e_o
    bg = s_o ** 2 + w2 * e_o ** 2
    return ContrastConstants(
        sigma_bg=s_o, eps_bg=e_o, sigma_d=sigma_d, eps_d=eps_d, omega=phantom.omega,
        c=c,
        C=w2 * c / mixed,
        C_prime=w2 * (s_o / sigma_d) * c / bg,
        alpha=phantom.alpha,
        beta_max_a=w2 * abs(c) * e_o / (sigma_d * bg),
        beta_max_b=w2 * abs(c) * eps_d / (sigma_d * mixed),
    )


def pointwise_identities(phantom: Phantom, beta_tilde: float, *, chi: float = 1.0) -> list[PointwiseIdentity]:
    """
    Evaluate the four pointwise expressions in q = gamma_w/alpha and gamma_0,
    by complex arithmetic and by their closed forms. `chi` is the value of the
    indicator chi_B at the evaluation point.
    """
    s_o, e_o = phantom.sigma_bg, phantom.eps_bg
    alpha = phantom.alpha
    bt = float(beta_tilde) * chi

    bg = _direct_identities(s_o, complex(s_o, phantom.omega * e_o) / alpha, bt)
    bg_closed = (0.0, 0.0, -bt * s_o, -bt * s_o)

    if phantom.inclusions:
        k = contrast_constants(phantom)
        d = _direct_identities(k.sigma_d, complex(k.sigma_d, phantom.omega * k.eps_d) / alpha, bt)
        d_closed = (
            e_o * k.sigma_d * k.C / s_o,
            k.eps_d * k.C,
            k.sigma_d * (e_o * k.C_prime / s_o - bt),
            k.eps_d * k.C - bt * k.sigma_d,
        )
    else:
        d, d_closed = (None,) * 4, (None,) * 4

    names = ("energy_ratio", "energy_sum", "shifted", "shifted_sum")
    return [PointwiseIdentity(n, b, bc, di, dc)
            for n, b, bc, di, dc in zip(names, bg, bg_closed, d, d_closed)]


# ---------- helpers -----------

def _admittivity(sigma: float, eps: float, omega: float, freq_mode: FrequencyMode) -> complex:
    return complex(sigma, 0.0) if freq_mode == "DC" else complex(sigma, omega * eps)


def _shared_inclusion_constants(phantom: Phantom) -> tuple[float, float]:
    first = phantom.inclusions[0]
    for inc in phantom.inclusions[1:]:
        if not (math.isclose(inc.sigma, first.sigma, rel_tol=_SHARED_RTOL)
                and math.isclose(inc.eps, first.eps, rel_tol=_SHARED_RTOL)):
            raise ContrastError("inclusions must share (sigma, eps)",
                                detail=f"({first.sigma:g},{first.eps:g}) vs ({inc.sigma:g},{inc.eps:g})")
    return first.sigma, first.eps


def _direct_identities(g0: float, q: complex, bt: float) -> tuple[float, float, float, float]:
    im2_re = q.imag ** 2 / q.real
    shifted = q.real - (1.0 + bt) * g0
    return (
        g0 / q.real * (q.real - g0),
        (q.real - g0) + im2_re,
        shifted,
        shifted + im2_re,
    )

# Randomized trials on a coarse 16-electrode disk.
# - B inside D with the largest admissible beta: the regularized test passes
# - the energy sandwich brackets Re g^*(R2 - R1) g for random admittivities
# - real conductivities ordered pointwise give ordered measurement matrices

import numpy as np
import pytest

from umeit_monotonicity.geometry.mesh import ElectrodeLayout, build_disk_mesh, refine_mesh
from umeit_monotonicity.geometry.regions import Disk
from umeit_monotonicity.measurements import (
    adjacent_dipole_patterns,
    measurement_matrix,
    sandwich_check,
    weighted_real_part,
)
from umeit_monotonicity.monotonicity import difference_matrix, estimate_delta, regularized_test
from umeit_monotonicity.phantom import Inclusion, Modulation, Phantom, contrast_constants, element_admittivity

TRIALS = 20
RADIUS = 10.0


@pytest.fixture(scope="module")
def meshes():
    coarse = build_disk_mesh(RADIUS, ElectrodeLayout(16, 0.5), 1.0)
    return coarse, refine_mesh(coarse), adjacent_dipole_patterns(16)


def _random_phantom(rng):
    while True:
        sigma_bg, eps_bg, sigma_d, eps_d = rng.uniform(0.5, 2.0, size=4)
        if abs(eps_d * sigma_bg - eps_bg * sigma_d) > 0.05:
            break
    angle = rng.uniform(0.0, 2 * np.pi)
    dist = rng.uniform(0.0, 5.0)
    d = Disk((dist * np.cos(angle), dist * np.sin(angle)), rng.uniform(1.5, 3.0))
    return Phantom(sigma_bg, eps_bg, rng.uniform(1.0, 100.0), (Inclusion(d, sigma_d, eps_d),))


def _ball_inside(rng, d: Disk) -> Disk:
    r = rng.uniform(0.5, 0.8) * d.radius
    angle = rng.uniform(0.0, 2 * np.pi)
    off = rng.uniform(0.0, d.radius - r)
    return Disk((d.center[0] + off * np.cos(angle), d.center[1] + off * np.sin(angle)), r)


def _difference(phantom, mesh, patterns, ball, beta, case):
    modulation = Modulation.for_case(ball, beta, case)
    r_mod = measurement_matrix(mesh, element_admittivity(phantom, mesh, "DC", modulation), patterns,
                               mode="DC", modulation=modulation, omega=phantom.omega)
    r_ac = measurement_matrix(mesh, element_admittivity(phantom, mesh, "AC"), patterns,
                              mode="AC", omega=phantom.omega)
    return difference_matrix(r_mod, r_ac, phantom.alpha, case)


def test_ball_inside_inclusion_always_passes(meshes):
    coarse, fine, patterns = meshes
    rng = np.random.default_rng(20240611)
    cases = set()
    for _ in range(TRIALS):
        phantom = _random_phantom(rng)
        constants = contrast_constants(phantom)
        case, beta = constants.case, constants.beta_max
        cases.add(case)
        ball = _ball_inside(rng, phantom.inclusions[0].region)

        A = _difference(phantom, coarse, patterns, ball, beta, case)
        A_fine = _difference(phantom, fine, patterns, ball, beta, case)
        delta = estimate_delta([(A, A_fine)])

        report = regularized_test(A, delta, case)
        assert report.verdict, (phantom, ball)
        # the discrete inequality is exact, so only rounding can push it below zero
        assert report.min_eigenvalue >= -1e-10 * np.abs(A).max()
    # both contrast signs occur with this seed range
    assert cases == {"a", "b"}


def test_energy_sandwich_random_admittivities(meshes):
    mesh, _, patterns = meshes
    rng = np.random.default_rng(7)
    T = mesh.n_triangles
    for _ in range(TRIALS):
        gamma1 = rng.uniform(0.5, 2.0, T) + 1j * rng.uniform(-1.0, 1.0, T)
        gamma2 = rng.uniform(0.5, 2.0, T) + 1j * rng.uniform(-1.0, 1.0, T)
        g = rng.standard_normal(patterns.N) + 1j * rng.standard_normal(patterns.N)
        bounds = sandwich_check(mesh, gamma1, gamma2, patterns, g)
        assert bounds.holds(), bounds
        assert bounds.lower <= bounds.upper
        assert bounds.slack() <= 0.05


def test_real_monotonicity_nested_pairs(meshes):
    mesh, _, patterns = meshes
    rng = np.random.default_rng(11)
    T = mesh.n_triangles
    for _ in range(10):
        sigma1 = rng.uniform(0.5, 2.0, T)
        sigma2 = sigma1 * rng.uniform(1.0, 3.0, T)
        r1 = measurement_matrix(mesh, sigma1.astype(complex), patterns)
        r2 = measurement_matrix(mesh, sigma2.astype(complex), patterns)
        # sigma1 <= sigma2 pointwise: R(sigma1) - R(sigma2) is positive semidefinite
        lam = np.linalg.eigvalsh(weighted_real_part(r1.entries - r2.entries, 1.0))
        assert lam[0] >= -1e-8 * np.linalg.norm(r1.entries, 2)

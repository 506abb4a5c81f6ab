import math

import numpy as np
import pytest

from umeit_monotonicity.errors import NotSymmetricError, ProvenanceMismatch, ValidationError
from umeit_monotonicity.fem.shunt import assemble
from umeit_monotonicity.geometry.mesh import ElectrodeLayout, build_disk_mesh, elements_in_region
from umeit_monotonicity.geometry.regions import Disk
from umeit_monotonicity.measurements import (
    MeasurementMatrix,
    MeasurementProvenance,
    adjacent_dipole_patterns,
)
from umeit_monotonicity.monotonicity import (
    DefinitenessReport,
    difference_matrix,
    eigen_decomposition,
    eigen_spectrum,
    estimate_delta,
    jacobi_eigh,
    localized_energy_diagnostic,
    regularized_test,
)


def _cubic_roots(A):
    # eigenvalues of a symmetric 3x3 from the trigonometric solution of the characteristic cubic
    q = np.trace(A) / 3.0
    p1 = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
    p2 = sum((A[i, i] - q) ** 2 for i in range(3)) + 2.0 * p1
    p = math.sqrt(p2 / 6.0)
    B = (A - q * np.eye(3)) / p
    r = min(max(np.linalg.det(B) / 2.0, -1.0), 1.0)
    phi = math.acos(r) / 3.0
    e1 = q + 2.0 * p * math.cos(phi)
    e3 = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    return sorted([e1, 3.0 * q - e1 - e3, e3])


def _matrix(entries, mode="DC", sign=0, level=0, size=(10, 12)):
    patterns = adjacent_dipole_patterns(3)
    prov = MeasurementProvenance(mode=mode, mesh_level=level, mesh_size=size, omega=1.0,
                                 modulation="m" if sign else None, modulation_sign=sign)
    return MeasurementMatrix(np.asarray(entries, dtype=complex), patterns, prov)


@pytest.mark.parametrize("seed", range(5))
def test_jacobi_matches_closed_form_cubic(seed):
    rng = np.random.default_rng(seed)
    M = rng.uniform(-1.0, 1.0, (3, 3))
    A = 0.5 * (M + M.T)
    assert np.allclose(eigen_spectrum(A), _cubic_roots(A), atol=1e-10)


def test_jacobi_eigenvectors_orthonormal():
    rng = np.random.default_rng(11)
    M = rng.standard_normal((16, 16))
    A = M + M.T
    w, V = jacobi_eigh(A)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(V.T @ V, np.eye(16), atol=1e-12)
    assert np.allclose(A @ V, V * w, atol=1e-10)
    assert np.allclose(w, np.linalg.eigvalsh(A), atol=1e-10)


def test_jacobi_diagonal_and_zero():
    w, V = jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
    assert w.tolist() == [-1.0, 2.0, 3.0]
    assert np.allclose(np.abs(V[:, 0]), [0, 1, 0])
    assert eigen_spectrum(np.zeros((4, 4))).tolist() == [0.0] * 4


def test_eigen_preconditions():
    with pytest.raises(NotSymmetricError, match="symmetrize"):
        eigen_spectrum(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NotSymmetricError):
        eigen_spectrum(np.array([[1.0, 1j], [1j, 1.0]]))
    with pytest.raises(ValidationError):
        eigen_decomposition(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        eigen_spectrum(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_regularized_test_verdict_and_margin():
    A = np.diag([-0.01, 0.0, 0.02])
    assert not regularized_test(A, 0.0).verdict
    tie = regularized_test(A, 0.01)
    assert tie.verdict
    assert tie.margin == pytest.approx(0.0, abs=1e-15)
    r = regularized_test(A, 0.5, "b")
    assert r.verdict and r.direction == "case_b"
    assert r.min_eigenvalue == pytest.approx(-0.01)
    assert r.max_eigenvalue == pytest.approx(0.02)
    with pytest.raises(ValidationError):
        regularized_test(A, -1e-3)


def test_verdict_monotone_in_delta():
    rng = np.random.default_rng(5)
    M = rng.standard_normal((8, 8))
    A = M + M.T
    verdicts = [regularized_test(A, d).verdict for d in np.linspace(0.0, 20.0, 41)]
    first = verdicts.index(True)
    assert all(verdicts[first:])
    assert regularized_test(A, 1e9).verdict


def test_estimate_delta_is_largest_spectral_norm():
    a = np.diag([1.0, 2.0])
    assert estimate_delta([(a, a + np.diag([0.1, -0.3])), (a, a)]) == pytest.approx(0.3)
    with pytest.raises(ValidationError):
        estimate_delta([])
    with pytest.raises(ValidationError):
        estimate_delta([(np.eye(2), np.eye(3))])


def test_difference_matrix_cases_are_sign_normalized():
    R_mod = _matrix([[2.0, 0.5, 0.1], [0.5, 2.0, 0.2], [0.1, 0.2, 2.0]], sign=1)
    R_ac = _matrix(np.eye(3) * (1.0 + 1.0j), mode="AC")
    alpha = 1.0 - 0.5j
    A = difference_matrix(R_mod, R_ac, alpha, "a")
    expected = R_mod.entries.real - (alpha * R_ac.entries).real
    assert np.allclose(A, expected)
    R_mod_b = _matrix(R_mod.entries, sign=-1)
    assert np.allclose(difference_matrix(R_mod_b, R_ac, alpha, "b"), -expected)


def test_difference_matrix_rejects_incomparable_data():
    dc = _matrix(np.eye(3))
    ac = _matrix(np.eye(3), mode="AC")
    with pytest.raises(ProvenanceMismatch):
        difference_matrix(ac, ac, 1.0, "a")                      # modulated side must be DC
    with pytest.raises(ProvenanceMismatch):
        difference_matrix(dc, dc, 1.0, "a")                      # AC side must be AC
    with pytest.raises(ProvenanceMismatch):
        difference_matrix(_matrix(np.eye(3), sign=-1), ac, 1.0, "a")
    with pytest.raises(ProvenanceMismatch, match="different meshes"):
        difference_matrix(dc, _matrix(np.eye(3), mode="AC", level=1), 1.0, "a")


def test_localized_energy_diagnostic_reports_failing_directions():
    mesh = build_disk_mesh(1.0, ElectrodeLayout(count=8), 0.15)
    patterns = adjacent_dipole_patterns(8)
    system = assemble(mesh, np.ones(mesh.n_triangles))
    w = np.array([-1.0, -0.001] + [1.0] * 6)
    report = DefinitenessReport(eigenvalues=w, delta=0.01, direction="case_a", verdict=False,
                                margin=-0.99, eigenvectors=np.eye(8))
    b = elements_in_region(mesh, Disk((0.5, 0.0), 0.3))
    d = elements_in_region(mesh, Disk((-0.5, 0.0), 0.3))
    diags = localized_energy_diagnostic(report, system, patterns, b, d)
    assert [x.eigen_index for x in diags] == [0]
    diag = diags[0]
    assert diag.energy_outside > 0 and diag.energy_inside > 0
    assert diag.ratio == pytest.approx(diag.energy_outside / diag.energy_inside)
    assert diag.threshold == 1.0
    assert diag.localized == (diag.ratio > 1.0)

    strict = localized_energy_diagnostic(report, system, patterns, b, d, ratio_threshold=math.inf)
    assert [x.eigen_index for x in strict] == [0]
    assert strict[0].threshold == math.inf
    assert not strict[0].localized


def test_localized_energy_diagnostic_needs_eigenvectors():
    report = DefinitenessReport(np.array([-1.0]), 0.0, "case_a", False, -1.0)
    with pytest.raises(ValidationError):
        localized_energy_diagnostic(report, None, None, np.array([]), np.array([]))

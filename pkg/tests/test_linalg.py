import numpy as np
import pytest

from holosim import linalg
from holosim.models import usb_hamiltonian


def random_hermitian(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return m + m.conj().T


def random_unitary(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(m)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


class TestEigh:
    def test_sigma_z(self):
        dec = linalg.eigh(np.diag([1.0, -1.0]).astype(complex))
        assert np.allclose(dec.eigenvalues, [-1.0, 1.0])
        # ascending order puts the -1 eigenvector first
        assert abs(abs(dec.eigenvectors[1, 0]) - 1.0) < 1e-14

    def test_identity(self):
        dec = linalg.eigh(np.eye(2, dtype=complex))
        assert np.allclose(dec.eigenvalues, [1.0, 1.0])
        gram = dec.eigenvectors.conj().T @ dec.eigenvectors
        assert linalg.max_abs(gram - np.eye(2)) < 1e-12

    def test_four_level_at_unit_couplings(self):
        h = usb_hamiltonian([1.0, 1.0, 1.0])
        dec = linalg.eigh(h)
        r = np.sqrt(3.0)
        assert np.allclose(dec.eigenvalues, [-r, 0.0, 0.0, r], atol=1e-12)
        # independent root check: each eigenvalue must zero the
        # characteristic determinant (LU-based, not an eigensolver)
        for ev in dec.eigenvalues:
            assert abs(np.linalg.det(h - ev * np.eye(4))) < 1e-10

    def test_residual_and_orthonormality(self):
        rng = np.random.default_rng(7)
        for dim in range(1, 9):
            h = random_hermitian(rng, dim)
            dec = linalg.eigh(h)
            scale = linalg.max_abs(h)
            res = h @ dec.eigenvectors - dec.eigenvectors * dec.eigenvalues
            assert linalg.max_abs(res) < 1e-10 * max(1.0, scale)
            gram = dec.eigenvectors.conj().T @ dec.eigenvectors
            assert linalg.max_abs(gram - np.eye(dim)) < 1e-10

    def test_reconstruction(self):
        rng = np.random.default_rng(11)
        for dim in range(1, 9):
            h = random_hermitian(rng, dim)
            dec = linalg.eigh(h)
            rebuilt = (dec.eigenvectors * dec.eigenvalues) @ dec.eigenvectors.conj().T
            assert linalg.max_abs(rebuilt - h) <= 1e-10 * max(1.0, linalg.max_abs(h))

    def test_eigenvalues_invariant_under_conjugation(self):
        rng = np.random.default_rng(13)
        for dim in (2, 3, 5, 8):
            h = random_hermitian(rng, dim)
            u = random_unitary(rng, dim)
            w1 = linalg.eigh(h).eigenvalues
            w2 = linalg.eigh(u @ h @ u.conj().T).eigenvalues
            assert np.max(np.abs(w1 - w2)) < 1e-10 * max(1.0, np.max(np.abs(w1)))

    def test_rejects_non_hermitian(self):
        bad = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
        with pytest.raises(linalg.NonHermitianError) as exc:
            linalg.eigh(bad)
        assert exc.value.defect == pytest.approx(1.0)
        assert "1.0" in str(exc.value) or "1.000" in str(exc.value)

    def test_gauge_is_deterministic(self):
        rng = np.random.default_rng(17)
        h = random_hermitian(rng, 4)
        a = linalg.eigh(h).eigenvectors
        b = linalg.eigh(h.copy()).eigenvectors
        assert np.array_equal(a, b)

    def test_degenerate_cluster_detection(self):
        dec = linalg.eigh(usb_hamiltonian([1.0, 1.0, 1.0]))
        blocks = dec.clusters(scale=np.sqrt(3.0))
        assert [list(b) for b in blocks] == [[0], [1, 2], [3]]


class TestNearestUnitary:
    def test_unitary_fixed_point(self):
        rng = np.random.default_rng(23)
        u = random_unitary(rng, 4)
        assert linalg.max_abs(linalg.nearest_unitary(u) - u) < 1e-12

    def test_positive_scaling_removed(self):
        assert linalg.max_abs(
            linalg.nearest_unitary(2.0 * np.eye(3, dtype=complex)) - np.eye(3)
        ) < 1e-14

    def test_positive_diagonal_removed(self):
        m = np.diag([2.0, 0.5]).astype(complex)
        assert linalg.max_abs(linalg.nearest_unitary(m) - np.eye(2)) < 1e-14

    def test_idempotent(self):
        rng = np.random.default_rng(29)
        m = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        once = linalg.nearest_unitary(m)
        twice = linalg.nearest_unitary(once)
        assert linalg.max_abs(twice - once) < 1e-12

    def test_unitarizes(self):
        rng = np.random.default_rng(31)
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        u = linalg.nearest_unitary(m)
        assert linalg.unitarity_defect(u) < 1e-12

    def test_rank_deficient_reports_singular_value(self):
        m = np.diag([1.0, 0.0]).astype(complex)
        with pytest.raises(linalg.RankDeficientError) as exc:
            linalg.nearest_unitary(m)
        assert exc.value.sigma_min == pytest.approx(0.0, abs=1e-15)


class TestUnitarityDefect:
    def test_identity(self):
        assert linalg.unitarity_defect(np.eye(3, dtype=complex)) == 0.0

    def test_scaled_identity(self):
        assert linalg.unitarity_defect(2.0 * np.eye(2, dtype=complex)) == pytest.approx(3.0)

    def test_rotation_matrix(self):
        from holosim.holonomy import usb_holonomy_closed_form

        for eta in (0.0, 0.3, -1.2, 2.9):
            assert linalg.unitarity_defect(usb_holonomy_closed_form(eta)) < 1e-15


class TestAngles:
    def test_wrap_angle_principal_interval(self):
        assert linalg.wrap_angle(np.pi) == pytest.approx(np.pi)
        assert linalg.wrap_angle(-np.pi) == pytest.approx(np.pi)
        assert linalg.wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
        assert linalg.wrap_angle(0.0) == 0.0
        arr = linalg.wrap_angle(np.array([0.1, 2 * np.pi + 0.1, -7.0]))
        assert np.allclose(arr, [0.1, 0.1, -7.0 + 2 * np.pi])

    def test_angle_distance(self):
        assert linalg.angle_distance(np.pi - 1e-3, -np.pi + 1e-3) == pytest.approx(
            2e-3, abs=1e-12
        )

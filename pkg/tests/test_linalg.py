import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from hcma.errors import NotHermitian, NotPositiveDefinite, NotSymmetric
from hcma.linalg import (
    batched_min_eig,
    cholesky,
    hermitian_eigs,
    sim_diag_values,
    simultaneous_diagonalize,
    takagi,
)
from hcma.suites import random_complex, random_hermitian_pd, random_symmetric


def count_below(H, sigma):
    """Number of eigenvalues below ``sigma`` from the inertia of an LDL^* factorization."""
    _, D, _ = sla.ldl(H - sigma * np.eye(H.shape[0]), hermitian=True)
    return int(np.sum(np.linalg.eigvalsh(D) < 0))


def inertia_eigs(H, iters=80):
    """Eigenvalues by bisection on the inertia count (independent of any eigensolver output)."""
    n = H.shape[0]
    r = np.abs(H).sum(axis=1).max()
    out = []
    for k in range(n):
        lo, hi = -r - 1, r + 1
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if count_below(H, mid) > k:
                hi = mid
            else:
                lo = mid
        out.append(0.5 * (lo + hi))
    return np.array(out)


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(cholesky(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        np.testing.assert_allclose(cholesky(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_complex_reconstruction(self):
        A = np.array([[2, 1j], [-1j, 2]])
        C = cholesky(A)
        assert np.allclose(np.triu(C, 1), 0)
        assert np.abs(C @ C.conj().T - A).max() <= 1e-14

    @pytest.mark.parametrize("A", [np.diag([1.0, -1.0]), np.zeros((2, 2)), np.array([[1, 2], [2, 1]])])
    def test_not_positive_definite(self, A):
        with pytest.raises(NotPositiveDefinite):
            cholesky(A)

    def test_pd_tol(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky(np.diag([1.0, 1e-3]), pd_tol=1e-2)

    def test_not_hermitian(self):
        with pytest.raises(NotHermitian):
            cholesky(np.array([[1, 1j], [1j, 1]]))

    @settings(max_examples=50)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8))
    def test_random_round_trip(self, seed, n):
        A = random_hermitian_pd(np.random.default_rng(seed), n)
        C = cholesky(A)
        assert np.abs(C @ C.conj().T - A).max() <= 1e-12 * (1 + np.abs(A).max())


class TestHermitianEigs:
    def test_examples(self):
        np.testing.assert_allclose(hermitian_eigs(np.diag([3.0, 1.0])), [1.0, 3.0])
        np.testing.assert_allclose(hermitian_eigs(np.array([[0.0, 1.0], [1.0, 0.0]])), [-1.0, 1.0])

    def test_inertia_oracle(self, rng):
        X = random_complex(rng, (6, 6))
        H = 0.5 * (X + X.conj().T)
        np.testing.assert_allclose(hermitian_eigs(H), inertia_eigs(H), atol=1e-9)

    def test_charpoly_oracle(self, rng):
        X = random_complex(rng, (6, 6))
        H = 0.5 * (X + X.conj().T)
        roots = np.sort(np.roots(np.poly(H)).real)
        np.testing.assert_allclose(hermitian_eigs(H), roots, atol=1e-9)

    def test_vectors(self, rng):
        H = random_hermitian_pd(rng, 4)
        w, V = hermitian_eigs(H, vectors=True)
        np.testing.assert_allclose(H @ V, V * w, atol=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitian):
            hermitian_eigs(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestTakagi:
    def test_real_diagonal(self):
        tk = takagi(np.diag([2.0, 1.0]))
        np.testing.assert_allclose(tk.Sigma, [2.0, 1.0])
        # U is the identity up to signs on the diagonal
        np.testing.assert_allclose(np.abs(tk.U), np.eye(2), atol=1e-14)
        np.testing.assert_allclose(tk.reconstruct(), np.diag([2.0, 1.0]), atol=1e-14)

    def test_phase_case(self):
        tk = takagi(np.array([[1j]]))
        np.testing.assert_allclose(tk.Sigma, [1.0])
        u = tk.U[0, 0]
        assert abs(u**2 - 1j) < 1e-14
        assert min(abs(u - np.exp(1j * np.pi / 4)), abs(u + np.exp(1j * np.pi / 4))) < 1e-14

    def test_repeated_values(self):
        S = np.array([[0.0, 1.0], [1.0, 0.0]])
        tk = takagi(S)
        np.testing.assert_allclose(tk.Sigma, [1.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(tk.reconstruct(), S, atol=1e-14)

    def test_zero_and_rank_one(self):
        tk = takagi(np.zeros((3, 3)))
        np.testing.assert_array_equal(tk.Sigma, 0)
        v = np.array([1.0, 1j, 2.0])
        S = np.outer(v, v)
        tk = takagi(S)
        np.testing.assert_allclose(tk.Sigma, [np.vdot(v, v).real, 0, 0], atol=1e-13)
        np.testing.assert_allclose(tk.reconstruct(), S, atol=1e-13)

    def test_rejects_non_symmetric(self):
        with pytest.raises(NotSymmetric):
            takagi(np.array([[0, 1], [2, 0]]))

    @settings(max_examples=100)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8), scale=st.floats(1e-3, 10.0), rank=st.integers(0, 8))
    def test_round_trip_and_spectrum(self, seed, n, scale, rank):
        rng = np.random.default_rng(seed)
        if rank < n:
            Y = random_complex(rng, (n, rank))
            S = Y @ Y.T
            S *= scale / max(np.abs(S).max(), 1e-300) if rank else 0.0
        else:
            S = random_symmetric(rng, n, scale)
        tk = takagi(S)
        s = 1 + np.abs(S).max()
        assert np.abs(tk.reconstruct() - S).max() <= 1e-9 * s
        assert np.abs(tk.U.conj().T @ tk.U - np.eye(n)).max() <= 1e-9
        assert np.all(np.diff(tk.Sigma) <= 0) and np.all(tk.Sigma >= 0)
        np.testing.assert_allclose(np.sort(tk.Sigma**2), hermitian_eigs(S @ S.conj()), atol=1e-9 * s**2)
        # S conj(S) = U^T Sigma^2 conj(U)
        np.testing.assert_allclose(tk.U.T @ np.diag(tk.Sigma**2) @ tk.U.conj(), S @ S.conj(), atol=1e-9 * s**2)


class TestSimultaneousDiagonalize:
    def test_identity(self):
        sd = simultaneous_diagonalize(np.eye(2), np.zeros((2, 2)))
        np.testing.assert_allclose(sd.P @ sd.P.conj().T, np.eye(2), atol=1e-14)
        np.testing.assert_array_equal(sd.Lambda, 0)

    def test_scaled_identity(self):
        sd = simultaneous_diagonalize(4 * np.eye(2), np.zeros((2, 2)))
        np.testing.assert_allclose(2 * sd.P @ (2 * sd.P).conj().T, np.eye(2), atol=1e-14)

    def test_swap_matrix(self):
        B = np.array([[0.0, 1.0], [1.0, 0.0]])
        sd = simultaneous_diagonalize(np.eye(2), B)
        np.testing.assert_allclose(sd.Lambda, [1.0, 1.0], atol=1e-14)
        K = B @ B.conj()
        np.testing.assert_allclose(np.linalg.eigvals(K).real, [1.0, 1.0], atol=1e-14)

    @settings(max_examples=50)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
    def test_k_eigenvalue_oracle(self, seed, n):
        rng = np.random.default_rng(seed)
        A = random_hermitian_pd(rng, n)
        B = random_symmetric(rng, n)
        sd = simultaneous_diagonalize(A, B)
        np.testing.assert_allclose(sd.P @ A @ sd.P.conj().T, np.eye(n), atol=1e-9)
        D = sd.P @ B @ sd.P.T
        np.testing.assert_allclose(D, np.diag(sd.Lambda), atol=1e-9 * (1 + np.abs(D).max()))
        # K = B conj(A)^-1 conj(B) A^-1 is similar to the Hermitian M M^* with M = C^-1 B C^-T
        C = np.linalg.cholesky(A)
        Ci = np.linalg.inv(C)
        M = Ci @ B @ Ci.T
        ref = np.linalg.eigvalsh(M @ M.conj().T)
        np.testing.assert_allclose(np.sort(sd.Lambda**2), ref, atol=1e-9 * (1 + ref.max()))
        K = B @ np.linalg.inv(A.conj()) @ B.conj() @ np.linalg.inv(A)
        np.testing.assert_allclose(np.sort(np.linalg.eigvals(K).real), ref, atol=1e-8 * (1 + ref.max()))


class TestBatched:
    def test_min_eig(self, rng):
        stack = np.array([random_hermitian_pd(rng, 3) for _ in range(5)])
        np.testing.assert_allclose(batched_min_eig(stack), [np.linalg.eigvalsh(a)[0] for a in stack])

    def test_sim_diag_values(self, rng):
        A = np.array([random_hermitian_pd(rng, 2) for _ in range(6)]).reshape(2, 3, 2, 2)
        B = np.array([random_symmetric(rng, 2) for _ in range(6)]).reshape(2, 3, 2, 2)
        lam = sim_diag_values(A, B)
        assert lam.shape == (2, 3, 2)
        for i in range(2):
            for j in range(3):
                np.testing.assert_allclose(lam[i, j], simultaneous_diagonalize(A[i, j], B[i, j]).Lambda, atol=1e-12)

    def test_sim_diag_values_flags_non_pd(self):
        A = np.array([np.eye(2), -np.eye(2)])
        lam = sim_diag_values(A, np.zeros((2, 2)))
        assert np.all(lam[0] == 0) and np.all(np.isinf(lam[1]))

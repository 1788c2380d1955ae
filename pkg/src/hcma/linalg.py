"""Dense complex linear algebra: Cholesky, Hermitian spectra, Takagi factorization.

All routines act on small dense matrices (n <= 16).  Batched helpers at the
bottom work on stacks ``(..., n, n)`` and are used for grid-wide sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotHermitian, NotPositiveDefinite, NotSymmetric

__all__ = [
    "TakagiFactorization",
    "SimDiag",
    "cholesky",
    "hermitian_eigs",
    "takagi",
    "simultaneous_diagonalize",
    "sim_diag_values",
    "batched_min_eig",
]


@dataclass(frozen=True)
class TakagiFactorization:
    """``S = U^T diag(Sigma) U`` with unitary ``U`` and descending ``Sigma``."""

    U: np.ndarray
    Sigma: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.U.T @ np.diag(self.Sigma) @ self.U


@dataclass(frozen=True)
class SimDiag:
    """``P A P^* = I`` and ``P B P^T = diag(Lambda)``."""

    P: np.ndarray
    Lambda: np.ndarray


def _inf_norm(M) -> float:
    return float(np.max(np.abs(M))) if np.size(M) else 0.0


def _check_hermitian(H, tol=1e-8):
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    if H.shape[0] != H.shape[1]:
        raise NotHermitian(f"matrix must be square, got {H.shape}")
    gap = _inf_norm(H - H.conj().T)
    if gap > tol * max(_inf_norm(H), np.finfo(float).tiny):
        raise NotHermitian(f"asymmetry {gap:.3e} exceeds tolerance")
    return 0.5 * (H + H.conj().T)


def _check_symmetric(S, tol=1e-10):
    S = np.atleast_2d(np.asarray(S, dtype=complex))
    if S.shape[0] != S.shape[1]:
        raise NotSymmetric(f"matrix must be square, got {S.shape}")
    gap = _inf_norm(S - S.T)
    if gap > tol * (1 + _inf_norm(S)):
        raise NotSymmetric(f"asymmetry {gap:.3e} exceeds tolerance")
    return 0.5 * (S + S.T)


def cholesky(A, pd_tol: float | None = None) -> np.ndarray:
    """Lower-triangular ``C`` with ``A = C C^*``.

    Raises
    ------
    NotPositiveDefinite
        If a squared pivot falls to ``pd_tol`` or below (default
        ``1e-12 * max|A|``).
    """
    A = _check_hermitian(A)
    n = A.shape[0]
    if pd_tol is None:
        pd_tol = 1e-12 * _inf_norm(A)
    C = np.zeros_like(A)
    for j in range(n):
        d = A[j, j].real - np.sum(np.abs(C[j, :j]) ** 2)
        if not d > pd_tol:
            raise NotPositiveDefinite(f"pivot {j} is {d:.3e} <= {pd_tol:.1e}")
        C[j, j] = np.sqrt(d)
        for i in range(j + 1, n):
            C[i, j] = (A[i, j] - C[i, :j] @ C[j, :j].conj()) / C[j, j]
    return C


def hermitian_eigs(H, vectors: bool = False, tol: float = 1e-8):
    """Ascending eigenvalues of a Hermitian matrix (and optionally eigenvectors)."""
    H = _check_hermitian(H, tol)
    if vectors:
        return np.linalg.eigh(H)
    return np.linalg.eigvalsh(H)


def _orth_complement(Y, n):
    """Orthonormal basis of the complex orthogonal complement of ``span(Y)``."""
    k = Y.shape[1]
    proj = np.eye(n) - Y @ Y.conj().T
    u, _, _ = np.linalg.svd(proj)
    return u[:, : n - k]


def _takagi_columns(S, rel_gap=1e-3):
    """Return ``(Y, sigma)`` with ``S = Y diag(sigma) Y^T`` and ``Y`` unitary."""
    n = S.shape[0]
    smax = _inf_norm(S)
    if n == 0:
        return np.zeros((0, 0), complex), np.zeros(0)
    if smax == 0.0:
        return np.eye(n, dtype=complex), np.zeros(n)
    X, Yim = S.real, S.imag
    # eigenvalues of this real symmetric matrix come in pairs (+s, -s)
    M = np.block([[X, Yim], [Yim, -X]])
    w, V = np.linalg.eigh(M)
    w = w[::-1][:n]
    V = V[:, ::-1][:, :n]
    good = w > rel_gap * w[0]
    good[0] = True
    cols = V[:n, good] + 1j * V[n:, good]
    # re-orthonormalise inside the well-separated block
    q, r = np.linalg.qr(cols)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    sig = np.real(np.einsum("ik,ij,jk->k", q.conj(), S, q.conj()))
    if good.all():
        return q, sig
    Z = _orth_complement(q, n)
    T = Z.conj().T @ S @ Z.conj()
    T = 0.5 * (T + T.T)
    Yt, st = _takagi_columns(T, rel_gap)
    return np.hstack([q, Z @ Yt]), np.concatenate([sig, st])


def takagi(S, sym_tol: float = 1e-10) -> TakagiFactorization:
    """Autonne-Takagi factorization ``S = U^T diag(Sigma) U`` of a complex symmetric matrix.

    The singular values are obtained from the real symmetric embedding
    ``[[Re S, Im S], [Im S, -Re S]]`` whose spectrum is ``{+s_k, -s_k}``; an
    eigenvector ``(a, b)`` for ``+s_k`` gives the Takagi vector ``a + i b``.
    Small values that cannot be separated from their negative partner are
    handled by recursing on the orthogonal complement.
    """
    S = _check_symmetric(S, sym_tol)
    Y, sig = _takagi_columns(S)
    # a rounding-level negative value flips into a phase
    neg = sig < 0
    Y[:, neg] *= 1j
    sig = np.abs(sig)
    order = np.argsort(-sig, kind="stable")
    Y = Y[:, order]
    sig = sig[order]
    return TakagiFactorization(U=Y.T.copy(), Sigma=sig)


def simultaneous_diagonalize(A, B, pd_tol: float | None = None) -> SimDiag:
    """Find ``P`` with ``P A P^* = I`` and ``P B P^T`` diagonal nonnegative.

    ``Q = C^{-1}`` from ``A = C C^*`` whitens ``A``; a Takagi factorization
    ``Q B Q^T = U^T Sigma U`` then gives ``P = conj(U) Q``.
    """
    C = cholesky(A, pd_tol)
    B = _check_symmetric(B)
    Q = np.linalg.solve(C, np.eye(C.shape[0]))
    Bt = Q @ B @ Q.T
    tk = takagi(0.5 * (Bt + Bt.T))
    return SimDiag(P=tk.U.conj() @ Q, Lambda=tk.Sigma)


# ---------------------------------------------------------------------------
# batched helpers
# ---------------------------------------------------------------------------


def batched_min_eig(A) -> np.ndarray:
    """Smallest eigenvalue of each Hermitian matrix in a stack."""
    A = np.asarray(A)
    return np.linalg.eigvalsh(A)[..., 0]


def sim_diag_values(A, B) -> np.ndarray:
    """Simultaneous-diagonalization values ``Lambda`` (descending) over a stack.

    These are the singular values of ``C^{-1} B C^{-T}`` with ``A = C C^*``,
    which coincide with the Takagi values.  Points where ``A`` is not
    positive definite get ``inf``.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    n = A.shape[-1]
    batch = np.broadcast_shapes(A.shape[:-2], B.shape[:-2])
    A = np.broadcast_to(A, batch + (n, n)).reshape(-1, n, n)
    B = np.broadcast_to(B, batch + (n, n)).reshape(-1, n, n)
    out = np.full((A.shape[0], n), np.inf)
    ok = np.linalg.eigvalsh(A)[:, 0] > 0
    if ok.any():
        C = np.linalg.cholesky(A[ok])
        Q = np.linalg.inv(C)
        M = Q @ B[ok] @ np.swapaxes(Q, -1, -2)
        out[ok] = np.linalg.svd(M, compute_uv=False)
    return out.reshape(batch + (n,))

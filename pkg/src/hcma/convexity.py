"""Pointwise (S, omega_0)-convexity calculus.

Conventions
-----------
At a point, ``A = b + phi_{a bbar}`` (Hermitian) and ``B = phi_{ab}``
(symmetric).  For a quadratic ``f`` with these complex second derivatives
the real second derivative along ``w = x + i y`` is::

    d^2 f[w, w] = 2 w^T A conj(w) + 2 Re(w^T B w)

and ``f`` is strictly convex iff ``A > 0`` and every eigenvalue of
``K = B conj(A^{-1}) conj(B) A^{-1}`` is below one.  Convexity relative to
a section ``S`` replaces ``B`` by ``B - S``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh as _gen_eigh

from .errors import NotPositiveDefinite, NotSymmetric
from .linalg import (
    _check_hermitian,
    _check_symmetric,
    hermitian_eigs,
    sim_diag_values,
    simultaneous_diagonalize,
)

__all__ = [
    "ConvexityMargin",
    "BlockEquivalence",
    "WMatrix",
    "DegreeCheck",
    "k_matrix",
    "k_eigenvalues",
    "m_s",
    "q_trace",
    "q_norm",
    "strict_convexity",
    "real_form",
    "block_equivalence",
    "modulus_of_convexity",
    "modulus_field",
    "modulus_generalized_eig",
    "degree_check",
    "degree_check_detail",
    "admissible_theta",
    "w_matrix",
    "w_det_closed_form",
    "w_is_psd",
    "w_threshold",
    "monotonicity_curve",
    "concavity_probe_f1",
    "concavity_probe_f2",
]


def _as_S(S, n):
    if S is None:
        return np.zeros((n, n), dtype=complex)
    S = getattr(S, "S", S)
    return np.atleast_2d(np.asarray(S, dtype=complex))


# ---------------------------------------------------------------------------
# K_S and its spectral summaries
# ---------------------------------------------------------------------------


def k_matrix(A, B, S=None) -> np.ndarray:
    """``K_S = (B - S) conj(A^{-1}) conj(B - S) A^{-1}``."""
    A = _check_hermitian(A)
    n = A.shape[0]
    D = _check_symmetric(B) - _as_S(S, n)
    if hermitian_eigs(A)[0] <= 0:
        raise NotPositiveDefinite("A is not positive definite")
    Ainv = np.linalg.inv(A)
    return D @ Ainv.conj() @ D.conj() @ Ainv


def k_eigenvalues(A, B, S=None) -> np.ndarray:
    """Eigenvalues of ``K_S`` (descending), as ``Lambda**2`` from simultaneous diagonalization."""
    A = _check_hermitian(A)
    D = _check_symmetric(B) - _as_S(S, A.shape[0])
    return simultaneous_diagonalize(A, D).Lambda ** 2


def m_s(K) -> float:
    """Largest eigenvalue of ``K`` (real and nonnegative for admissible ``K``)."""
    K = np.atleast_2d(np.asarray(K, dtype=complex))
    return float(np.max(np.linalg.eigvals(K).real))


def q_trace(K, p: int) -> float:
    """``Q^<p> = tr(K^p)``."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    K = np.atleast_2d(np.asarray(K, dtype=complex))
    return max(float(np.trace(np.linalg.matrix_power(K, p)).real), 0.0)


def q_norm(K, p: int) -> float:
    """``Q^[p] = (tr K^p)^(1/p)``."""
    return q_trace(K, p) ** (1.0 / p)


@dataclass(frozen=True)
class ConvexityMargin:
    strictly_convex: bool
    max_eig_K: float
    min_eig_A: float


def strict_convexity(A, B, S=None) -> ConvexityMargin:
    """Strict (S, omega_0)-convexity: ``A > 0`` and ``max eig K_S < 1``."""
    A = _check_hermitian(A)
    min_a = float(hermitian_eigs(A)[0])
    if min_a <= 0:
        return ConvexityMargin(False, float("inf"), min_a)
    try:
        kmax = float(k_eigenvalues(A, B, S)[0])
    except NotPositiveDefinite:
        return ConvexityMargin(False, float("inf"), min_a)
    return ConvexityMargin(bool(kmax < 1.0), kmax, min_a)


# ---------------------------------------------------------------------------
# real block form
# ---------------------------------------------------------------------------


def real_form(A, B) -> np.ndarray:
    """Real Hessian ``[[U, V], [V^T, W]]`` in ``(x, y)`` of the quadratic with data ``(A, B)``."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    U = 2 * (A + B).real
    W = 2 * (A - B).real
    V = 2 * (A - B).imag
    return np.block([[U, V], [V.T, W]])


@dataclass(frozen=True)
class BlockEquivalence:
    A: np.ndarray
    B: np.ndarray
    real_verdict: bool
    complex_verdict: bool
    real_margin: float
    complex_margin: float

    @property
    def agree(self) -> bool:
        return self.real_verdict == self.complex_verdict


def block_equivalence(U, V, W, tol: float = 1e-12) -> BlockEquivalence:
    """Compare positivity of ``[[U, V], [V^T, W]]`` with the complex ``(A, B)`` test.

    ``A = (U + W)/4 + i (V - V^T)/4`` and ``B = (U - W)/4 - i (V + V^T)/4``.
    ``real_margin`` is the smallest eigenvalue of the block matrix;
    ``complex_margin`` is ``min(min eig A, 1 - max eig K)``.
    """
    U, V, W = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (U, V, W))
    for name, M in (("U", U), ("W", W)):
        if np.max(np.abs(M - M.T), initial=0.0) > tol * (1 + np.max(np.abs(M))):
            raise NotSymmetric(f"{name} is not symmetric")
    A = 0.25 * (U + W) + 0.25j * (V - V.T)
    B = 0.25 * (U - W) - 0.25j * (V + V.T)
    A = 0.5 * (A + A.conj().T)
    B = 0.5 * (B + B.T)
    block = np.block([[U, V], [V.T, W]])
    block = 0.5 * (block + block.T)
    real_margin = float(np.linalg.eigvalsh(block)[0])
    cm = strict_convexity(A, B)
    complex_margin = min(cm.min_eig_A, 1.0 - cm.max_eig_K)
    return BlockEquivalence(A, B, real_margin > 0, cm.strictly_convex, real_margin, complex_margin)


# ---------------------------------------------------------------------------
# modulus of convexity
# ---------------------------------------------------------------------------


def _convex_batch(A, D, b, mu):
    """Vectorised predicate ``A - mu b > 0 and max eig K < 1``."""
    Am = A - mu[..., None, None] * b
    ok = np.linalg.eigvalsh(Am)[..., 0] > 0
    lam = sim_diag_values(np.where(ok[..., None, None], Am, np.eye(b.shape[0])), D)
    return ok & (lam[..., 0] < 1.0)


def modulus_field(A, B, S, b, tol: float = 1e-10) -> np.ndarray:
    """Modulus of convexity for a stack of ``(A, B)`` by bisection on ``mu``.

    The admissible set in ``mu`` is an interval ``(-inf, mu*)``, so the
    predicate is monotone.  The upper bracket is the smallest generalized
    eigenvalue of ``(A, b)``, beyond which ``A - mu b`` is indefinite.
    Non-convex points get a negative value found by extending the lower
    bracket downwards.
    """
    A = np.asarray(A, dtype=complex)
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    n = b.shape[0]
    D = np.asarray(B, dtype=complex) - _as_S(S, n)
    batch = np.broadcast_shapes(A.shape[:-2], D.shape[:-2])
    A = np.broadcast_to(A, batch + (n, n)).reshape(-1, n, n)
    D = np.broadcast_to(D, batch + (n, n)).reshape(-1, n, n)
    Lb = np.linalg.cholesky(b)
    Lbi = np.linalg.inv(Lb)
    hi = np.linalg.eigvalsh(Lbi @ A @ Lbi.conj().T)[:, 0]
    lo = np.minimum(hi - 1.0, 0.0)
    step = np.maximum(np.abs(hi), 1.0)
    for _ in range(200):
        bad = ~_convex_batch(A, D, b, lo)
        if not bad.any():
            break
        lo = np.where(bad, lo - step, lo)
        step = np.where(bad, 2 * step, step)
    else:
        raise RuntimeError("could not bracket the modulus from below")
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        good = _convex_batch(A, D, b, mid)
        lo = np.where(good, mid, lo)
        hi = np.where(good, hi, mid)
    return lo.reshape(batch)


def modulus_of_convexity(A, B, S, b, tol: float = 1e-10) -> float:
    """Largest ``mu`` with ``A - mu b > 0`` and ``max eig K_S(A - mu b) < 1`` (bisection)."""
    A = _check_hermitian(A)
    B = _check_symmetric(B)
    b = _check_hermitian(b)
    return float(modulus_field(A, B, S, b, tol))


def modulus_generalized_eig(A, B, S, b) -> tuple[float, np.ndarray]:
    """Modulus as the smallest generalized eigenvalue of the real forms.

    ``M(A - mu b, D) = M(A, D) - mu M(b, 0)`` is positive definite exactly
    for ``mu`` below the smallest eigenvalue of the pencil
    ``(M(A, D), M(b, 0))``.  Returns the value and its real eigenvector.
    """
    A = _check_hermitian(A)
    b = _check_hermitian(b)
    D = _check_symmetric(B) - _as_S(S, A.shape[0])
    w, v = _gen_eigh(real_form(A, D), real_form(b, 0 * b), subset_by_index=[0, 0])
    return float(w[0]), v[:, 0]


# ---------------------------------------------------------------------------
# degree of convexity
# ---------------------------------------------------------------------------


def admissible_theta(b, delta, rng, count: int) -> np.ndarray:
    """Random symmetric ``Theta`` whose b-weighted Takagi values are at most ``delta``.

    With ``P b P^* = I`` the b-weighted ``Theta conj(b^{-1}) conj(Theta) b^{-1}``
    is similar to ``s conj(s)`` for ``Theta = P^{-1} s P^{-T}``, so it suffices
    to draw ``s = V^T diag(d) V`` with unitary ``V`` and ``d`` in ``[0, delta]``.
    """
    b = _check_hermitian(b)
    n = b.shape[0]
    Pinv = np.linalg.cholesky(b)  # P = C^{-1}
    out = np.empty((count, n, n), dtype=complex)
    for k in range(count):
        Z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        Vq, r = np.linalg.qr(Z)
        Vq = Vq * (np.diag(r) / np.abs(np.diag(r)))
        d = delta * rng.uniform(0.0, 1.0, size=n)
        # push some samples to the edge of the admissible set
        if k % 2 == 0:
            d[rng.integers(n)] = delta
        s = Vq.T @ np.diag(d) @ Vq
        out[k] = Pinv @ s @ Pinv.T
    return out


def _extreme_theta(A, D, b, delta):
    """Admissible ``Theta`` most damaging along the weakest real direction."""
    _, zeta = modulus_generalized_eig(A, D, None, b)
    n = b.shape[0]
    w = zeta[:n] + 1j * zeta[n:]
    C = np.linalg.cholesky(b)
    # u = P^{-T} w with P = C^{-1}
    u = C.T @ w
    nu = np.vdot(u, u).real
    if nu == 0:
        return np.zeros((n, n), dtype=complex)
    s = np.outer(u.conj(), u.conj()) / nu
    return delta * (C @ s @ C.T)


@dataclass(frozen=True)
class DegreeCheck:
    """Outcome of the degree-of-convexity test and of the modulus shortcut."""

    theta_verdict: bool
    modulus_verdict: bool
    modulus: float
    samples: int
    worst_max_eig_K: float

    @property
    def agree(self) -> bool:
        return self.theta_verdict == self.modulus_verdict


def degree_check_detail(A, B, S, b, delta: float, samples: int = 100, rng=None) -> DegreeCheck:
    """Test strict (S + Theta)-convexity over admissible ``Theta`` of size ``delta``.

    The Theta path combines random admissible sections with the extreme
    section built from the weakest real direction; it is reported next to
    the independent shortcut ``modulus > delta`` so the two can be compared.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    A = _check_hermitian(A)
    b = _check_hermitian(b)
    n = A.shape[0]
    D = _check_symmetric(B) - _as_S(S, n)
    rng = np.random.default_rng(0) if rng is None else rng
    thetas = [np.zeros((n, n), complex)]
    if delta > 0:
        thetas.append(_extreme_theta(A, D, b, delta))
        if samples:
            thetas.extend(admissible_theta(b, delta, rng, samples))
    ok = True
    worst = 0.0
    for th in thetas:
        m = strict_convexity(A, D - th)
        worst = max(worst, m.max_eig_K)
        ok &= m.strictly_convex
    mu = modulus_of_convexity(A, B, S, b)
    return DegreeCheck(bool(ok), bool(mu > delta), mu, len(thetas), worst)


def degree_check(A, B, S, b, delta: float, samples: int = 100, rng=None) -> bool:
    """Is the point (S, omega_0)-convex of degree ``> delta``?  (Theta path and shortcut.)"""
    d = degree_check_detail(A, B, S, b, delta, samples, rng)
    return d.theta_verdict and d.modulus_verdict


# ---------------------------------------------------------------------------
# the 2x2 W matrices of the maximum-principle computation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WMatrix:
    entries: np.ndarray
    lambda_a: float
    lambda_b: float
    p: int


def w_matrix(la: float, lb: float, p: int) -> WMatrix:
    """Direct summation of the 2x2 matrix for values ``la``, ``lb`` and power ``p``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if la < 0 or lb < 0:
        raise ValueError("lambda values must be nonnegative")
    w11 = sum(la ** (2 * k) * lb ** (2 * p - 2 - 2 * k) for k in range(p))
    w12 = sum(la ** (2 * k + 1) * lb ** (2 * p - 3 - 2 * k) for k in range(p - 1))
    w21 = sum(la ** (2 * p - 3 - 2 * k) * lb ** (2 * k + 1) for k in range(p - 1))
    w22 = w11 - la ** (2 * p) - lb ** (2 * p)
    return WMatrix(np.array([[w11, w12], [w21, w22]], dtype=float), float(la), float(lb), p)


def w_det_closed_form(la: float, lb: float, p: int) -> float:
    """Determinant as a divided difference of ``f(x) = -x^(2p) + x^(2p-1)`` at ``la^2, lb^2``."""
    xa, xb = la * la, lb * lb
    if xa == xb:
        # derivative f'(x) = (2p-1) x^(2p-2) [1 - 2p/(2p-1) x]
        return (2 * p - 1) * xa ** (2 * p - 2) * (1 - 2 * p / (2 * p - 1) * xa)

    def f(x):
        return -(x ** (2 * p)) + x ** (2 * p - 1)

    return (f(xb) - f(xa)) / (xb - xa)


def w_is_psd(W: WMatrix, tol: float = 0.0) -> bool:
    return bool(np.linalg.eigvalsh(W.entries)[0] >= -tol)


def w_threshold(la: float, lb: float, p: int) -> bool:
    """Sufficient condition ``max(la^2, lb^2) <= 1 - 1/(2p)`` for a PSD ``W``."""
    return max(la * la, lb * lb) <= 1.0 - 1.0 / (2 * p)


# ---------------------------------------------------------------------------
# monotonicity and concavity probes
# ---------------------------------------------------------------------------


def monotonicity_curve(A0, A, B, p: int, t_grid):
    """``t^(2p) tr(K_t^p)`` and ``t^2 max eig K_t`` along ``A0 + t A``.

    Returns two arrays over ``t_grid``.
    """
    A0 = _check_hermitian(A0)
    A = _check_hermitian(A)
    B = _check_symmetric(B)
    t_grid = np.asarray(t_grid, dtype=float)
    tr = np.empty_like(t_grid)
    top = np.empty_like(t_grid)
    for k, t in enumerate(t_grid):
        At = A0 + t * A
        lam2 = simultaneous_diagonalize(At, B).Lambda ** 2
        tr[k] = t ** (2 * p) * np.sum(lam2**p)
        top[k] = t * t * lam2[0]
    return tr, top


def _logdet_pd(M):
    M = _check_hermitian(M)
    sign, ld = np.linalg.slogdet(M)
    if sign.real <= 0 or np.linalg.eigvalsh(M)[0] <= 0:
        raise NotPositiveDefinite("matrix left the positive cone")
    return float(ld.real)


def concavity_probe_f1(A, H=None, t: float = 0.0) -> float:
    """``F1 = log(A_00 - A_0b A^{ab} A_a0)`` at ``A + t H``: the log of a Schur complement."""
    A = _check_hermitian(A)
    if H is not None:
        A = A + t * _check_hermitian(H)
    return _logdet_pd(A) - _logdet_pd(A[1:, 1:])


def concavity_probe_f2(Acal, G, H=None, t: float = 0.0) -> float:
    """``F2 = -log tr(G (A + t H)^{-1})``."""
    Acal = _check_hermitian(Acal)
    G = _check_hermitian(G)
    if H is not None:
        Acal = Acal + t * _check_hermitian(H)
    _logdet_pd(Acal)
    return float(-np.log(np.trace(G @ np.linalg.inv(Acal)).real))

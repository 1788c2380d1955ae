"""Randomized property suites for the matrix identities.

Each suite draws its instances from a seeded generator, so a seed fixes the
outcome.  The same suites back the ``lemma-tests`` command and the test
suite.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .convexity import (
    block_equivalence,
    concavity_probe_f1,
    concavity_probe_f2,
    degree_check_detail,
    modulus_generalized_eig,
    modulus_of_convexity,
    monotonicity_curve,
    w_det_closed_form,
    w_is_psd,
    w_matrix,
    w_threshold,
)
from .linalg import hermitian_eigs, takagi

__all__ = [
    "SuiteResult",
    "random_hermitian_pd",
    "random_symmetric",
    "takagi_suite",
    "block_equivalence_suite",
    "degree_modulus_suite",
    "monotonicity_suite",
    "concavity_suite",
    "w_matrix_suite",
    "DEFAULT_COUNTS",
    "run_all",
]


@dataclass(frozen=True)
class SuiteResult:
    name: str
    cases: int
    failures: int
    worst: float
    threshold: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.failures == 0

    @property
    def vacuous(self) -> bool:
        return self.cases == 0


def random_complex(rng, shape, scale=1.0):
    return scale * (rng.normal(size=shape) + 1j * rng.normal(size=shape))


def random_hermitian_pd(rng, n, floor=0.1):
    X = random_complex(rng, (n, n))
    return X @ X.conj().T / n + floor * np.eye(n)


def random_symmetric(rng, n, scale=1.0):
    X = random_complex(rng, (n, n), scale)
    return 0.5 * (X + X.T)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        name, cases, fails, worst, thr = fn(*args, **kwargs)
        return SuiteResult(name, int(cases), int(fails), float(worst), thr, time.perf_counter() - t0)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def takagi_suite(rng, count=500, tol=1e-9):
    """Round trip ``U^T Sigma U = S``, unitarity of ``U`` and ``Sigma^2 = eig(S conj(S))``.

    Every fifth matrix is rank deficient to exercise repeated zero values.
    """
    worst = 0.0
    fails = 0
    for k in range(count):
        n = int(rng.integers(1, 9))
        if k % 5 == 4:
            r = int(rng.integers(0, n))
            Y = random_complex(rng, (n, r))
            S = Y @ Y.T
        else:
            S = random_symmetric(rng, n, scale=rng.uniform(0.1, 5.0))
        S = S * min(1.0, 10.0 / max(np.abs(S).max(), 1e-300))
        tk = takagi(S)
        scale = 1 + np.abs(S).max()
        rec = np.abs(tk.reconstruct() - S).max() / scale
        uni = np.abs(tk.U.conj().T @ tk.U - np.eye(n)).max()
        sq = np.sort(tk.Sigma**2)
        ev = hermitian_eigs(S @ S.conj())
        spread = np.abs(sq - ev).max() / scale**2
        err = max(rec, uni, spread)
        worst = max(worst, err)
        fails += err > tol
    return "takagi round trip", count, fails, worst, tol


def _random_block(rng, n):
    M = rng.normal(size=(2 * n, 2 * n))
    M = 0.5 * (M + M.T) + rng.uniform(-1.0, 3.0) * np.eye(2 * n)
    return M[:n, :n], M[:n, n:], M[n:, n:]


@_timed
def block_equivalence_suite(rng, count=500, margin=1e-6):
    """Positivity of the real block matrix versus ``A > 0`` and ``max eig K < 1``.

    Instances whose margins are within ``margin`` of zero are redrawn.
    """
    fails = 0
    worst = np.inf
    done = 0
    while done < count:
        n = int(rng.integers(1, 5))
        U, V, W = _random_block(rng, n)
        res = block_equivalence(U, V, W)
        if abs(res.real_margin) <= margin or abs(res.complex_margin) <= margin:
            continue
        done += 1
        fails += not res.agree
        worst = min(worst, abs(res.real_margin))
    return "block positivity equivalence", count, fails, 0.0 if count == 0 else worst, margin


@_timed
def degree_modulus_suite(rng, count=200, samples=20, rtol=1e-8):
    """Degree of convexity (Theta sampling plus extreme Theta) versus ``modulus > delta``.

    Each instance is probed at ``delta = mu/2, 0.99 mu, 1.01 mu``; the
    bisection modulus is also compared with the generalized-eigenvalue value.
    """
    fails = 0
    worst = 0.0
    done = 0
    while done < count:
        n = int(rng.integers(1, 4))
        b = random_hermitian_pd(rng, n, floor=0.5)
        A = random_hermitian_pd(rng, n, floor=0.5) + b
        B = random_symmetric(rng, n, scale=0.3)
        S = random_symmetric(rng, n, scale=0.1)
        mu = modulus_of_convexity(A, B, S, b)
        if mu <= 1e-3:
            continue
        done += 1
        ref, _ = modulus_generalized_eig(A, B, S, b)
        err = abs(mu - ref) / (1 + abs(ref))
        worst = max(worst, err)
        bad = err > rtol
        for f in (0.5, 0.99, 1.01):
            d = degree_check_detail(A, B, S, b, f * mu, samples=samples, rng=rng)
            bad |= not d.agree
            bad |= d.theta_verdict != (f < 1)
        fails += bad
    return "modulus/degree equivalence", count, fails, worst, rtol


@_timed
def monotonicity_suite(rng, count=200, npts=21, tol=1e-9):
    """Forward differences of ``t^(2p) tr K_t^p`` and ``t^2 max eig K_t`` on ``[0, 1]``."""
    fails = 0
    worst = np.inf
    ts = np.linspace(0.0, 1.0, npts)
    for k in range(count):
        n = int(rng.integers(1, 5))
        p = 1 + k % 3
        A0 = random_hermitian_pd(rng, n)
        X = random_complex(rng, (n, n))
        A = 0.5 * (X + X.conj().T)
        lo = np.linalg.eigvalsh(A0 + A)[0]
        if lo <= 0.05:
            A = A + (0.05 - lo) * np.eye(n)
        B = random_symmetric(rng, n)
        tr, top = monotonicity_curve(A0, A, B, p, ts)
        for seq in (tr, top):
            diff = np.diff(seq) / (1 + np.abs(seq[1:]))
            m = float(diff.min())
            worst = min(worst, m)
            if m < -tol:
                fails += 1
                break
    return "monotonicity in t", count, fails, 0.0 if count == 0 else worst, tol


@_timed
def concavity_suite(rng, count=1000, tol=1e-9):
    """Midpoint concavity of the Schur-complement and inverse-trace log functionals."""
    fails = 0
    worst = np.inf
    for k in range(count):
        n = int(rng.integers(1, 5))
        if k % 2 == 0:
            X = random_hermitian_pd(rng, n + 1, 0.05)
            Y = random_hermitian_pd(rng, n + 1, 0.05)
            f = concavity_probe_f1
            defect = f(0.5 * (X + Y)) - 0.5 * (f(X) + f(Y))
        else:
            G = random_hermitian_pd(rng, n)
            X = random_hermitian_pd(rng, n, 0.05)
            Y = random_hermitian_pd(rng, n, 0.05)

            def f(M):
                return concavity_probe_f2(M, G)

            defect = f(0.5 * (X + Y)) - 0.5 * (f(X) + f(Y))
        worst = min(worst, defect)
        fails += defect < -tol
    return "midpoint concavity", count, fails, 0.0 if count == 0 else worst, tol


def w_matrix_suite(grid=50, pmax=5, lam_max=1.2, det_tol=1e-12, boundary_tol=1e-10) -> SuiteResult:
    """Closed-form determinant vs summation, PSD under the threshold, and the equal-value boundary.

    ``worst`` is the largest scaled determinant mismatch.
    """
    t0 = time.perf_counter()
    lams = np.linspace(0.0, lam_max, grid)
    fails = 0
    worst = 0.0
    cases = 0
    for p in range(1, pmax + 1):
        for la in lams:
            for lb in lams:
                W = w_matrix(la, lb, p)
                direct = float(np.linalg.det(W.entries))
                closed = w_det_closed_form(la, lb, p)
                scale = 1 + np.abs(W.entries).max() ** 2
                err = abs(direct - closed) / scale
                worst = max(worst, err)
                bad = err > det_tol
                if w_threshold(la, lb, p):
                    bad |= not w_is_psd(W, tol=1e-12)
                fails += bad
                cases += 1
        lam = np.sqrt((2 * p - 1) / (2 * p))
        W = w_matrix(lam, lam, p)
        edge = max(abs(w_det_closed_form(lam, lam, p)), abs(float(np.linalg.det(W.entries))))
        fails += edge > boundary_tol
        fails += not w_is_psd(W, tol=1e-12)
        cases += 1
    return SuiteResult("W-matrix identities", cases, int(fails), float(worst), det_tol, time.perf_counter() - t0)


DEFAULT_COUNTS = {
    "takagi": 500,
    "block": 500,
    "degree": 200,
    "monotonicity": 200,
    "concavity": 1000,
}


def run_all(seed: int = 0, counts: dict | None = None, w_grid: int = 50) -> list[SuiteResult]:
    """Run every suite with one generator per suite derived from ``seed``."""
    counts = {**DEFAULT_COUNTS, **(counts or {})}
    seeds = np.random.SeedSequence(seed).spawn(5)
    rngs = [np.random.default_rng(s) for s in seeds]
    return [
        takagi_suite(rngs[0], counts["takagi"]),
        block_equivalence_suite(rngs[1], counts["block"]),
        degree_modulus_suite(rngs[2], counts["degree"]),
        monotonicity_suite(rngs[3], counts["monotonicity"]),
        concavity_suite(rngs[4], counts["concavity"]),
        w_matrix_suite(grid=w_grid),
    ]

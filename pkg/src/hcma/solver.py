"""Newton and continuation solver for the perturbed geodesic equation on the strip.

Multiplied by four, the theta-invariant equation reads::

    R(phi) = phi_tt - (1/4) w^* g^{-1} w - 4 eps tr(g^{-1} b) = 0

with ``g = A = b + phi_{a bbar}`` and ``w_a = phi_{t x^a} - i phi_{t y^a}``.
The discrete residual uses the central stencils of :mod:`hcma.torus`, and
the Jacobian below is the exact derivative of that discrete residual.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres, splu

from .errors import BoundaryNotConvex, ContinuityStalled, EllipticityLost, NewtonDiverged
from .torus import GridField, TorusDomain, complex_parts, hessian_field, spatial_hessian_field

__all__ = [
    "SolverConfig",
    "Boundary",
    "SolverState",
    "ContinuityStep",
    "ContinuityResult",
    "SweepResult",
    "quadratic_solution",
    "residual",
    "residual_field",
    "linearized_apply",
    "jacobian",
    "newton_solve",
    "continuity_solve",
    "epsilon_sweep",
    "boundary_pairs",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 0.1
    newton_tol: float = 1e-10
    max_newton: int = 50
    sigma_step: float = 0.1
    sigma_min_step: float = 1e-4
    damping: float = 0.5
    max_halvings: int = 30
    ellipticity_guard: float = 1e-8

    def __post_init__(self):
        for name in ("epsilon", "newton_tol", "sigma_step", "sigma_min_step", "damping", "ellipticity_guard"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_newton < 1 or self.max_halvings < 1:
            raise ValueError("iteration limits must be positive")
        if not self.damping < 1:
            raise ValueError("damping must be < 1")
        if not self.sigma_min_step < self.sigma_step <= 1:
            raise ValueError("need sigma_min_step < sigma_step <= 1")


@dataclass(frozen=True, eq=False)
class Boundary:
    """Dirichlet data on the two torus slices ``t = 0`` and ``t = 1``."""

    phi0: np.ndarray
    phi1: np.ndarray

    def __post_init__(self):
        for name in ("phi0", "phi1"):
            v = np.array(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} contains NaN or Inf")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if self.phi0.shape != self.phi1.shape:
            raise ValueError("boundary slices differ in shape")

    @classmethod
    def zero(cls, domain: TorusDomain) -> "Boundary":
        z = np.zeros(domain.spatial_shape)
        return cls(z, z)

    @classmethod
    def from_fields(cls, f0: GridField, f1: GridField) -> "Boundary":
        """Take the ``t = 0`` row of ``f0`` and the ``t = 1`` row of ``f1``."""
        return cls(f0.values[0], f1.values[-1])

    def scaled(self, s: float) -> "Boundary":
        return Boundary(s * self.phi0, s * self.phi1)

    def interpolant(self, domain: TorusDomain) -> np.ndarray:
        """Linear-in-t extension of the boundary data over the full grid."""
        t = domain.t.reshape((-1,) + (1,) * len(domain.spatial_shape))
        return (1 - t) * self.phi0 + t * self.phi1


@dataclass(frozen=True, eq=False)
class SolverState:
    phi: GridField
    sigma: float
    residual_norm: float
    min_eig_A: float
    newton_iters_used: int
    epsilon: float
    residual_history: tuple = ()

    @property
    def valid(self) -> bool:
        return self.min_eig_A > 0


# ---------------------------------------------------------------------------
# residual and Jacobian
# ---------------------------------------------------------------------------


def quadratic_solution(domain: TorusDomain, epsilon: float) -> GridField:
    """Exact solution ``2 eps n t (t - 1)`` for zero boundary data."""
    t = domain.t.reshape((-1,) + (1,) * len(domain.spatial_shape))
    vals = 2 * epsilon * domain.n * t * (t - 1)
    return GridField(domain, np.broadcast_to(vals, domain.shape))


def _pointwise(domain: TorusDomain, H: np.ndarray, epsilon: float):
    """Residual and helper quantities from a stack of real Hessians."""
    n = domain.n
    b = domain.metric_b
    A, _, tt, cross = complex_parts(H, n, b)
    min_eig = np.linalg.eigvalsh(A)[..., 0]
    w = 4 * np.conj(cross)
    ginv = np.linalg.inv(A)
    v = np.einsum("...ij,...j->...i", ginv, w)
    quad = np.einsum("...i,...i->...", np.conj(w), v).real
    trace = np.einsum("...ij,ji->...", ginv, b).real
    R = tt - 0.25 * quad - 4 * epsilon * trace
    return R, min_eig, v, ginv


def residual_from_hessian(domain: TorusDomain, H: np.ndarray, epsilon: float) -> np.ndarray:
    """Pointwise residual for given real Hessians (no ellipticity check)."""
    return _pointwise(domain, H, epsilon)[0]


def _check_boundary(phi: GridField, boundary: Boundary | None):
    if boundary is None:
        return
    if not (np.array_equal(phi.values[0], boundary.phi0) and np.array_equal(phi.values[-1], boundary.phi1)):
        raise ValueError("phi does not match the boundary rows")


def _residual_interior(phi_vals, domain, epsilon, guard):
    H = hessian_field(GridField(domain, phi_vals))
    R, min_eig, v, ginv = _pointwise(domain, H, epsilon)
    m = float(min_eig.min())
    if not m > guard:
        raise EllipticityLost(m, guard)
    return R, m, v, ginv


def residual_field(phi: GridField, epsilon: float, guard: float = 1e-8) -> np.ndarray:
    """Residual on interior levels as an array of shape ``(Nt, *spatial)``."""
    return _residual_interior(phi.values, phi.domain, epsilon, guard)[0]


def residual(phi: GridField, boundary: Boundary | None, cfg: SolverConfig) -> GridField:
    """Residual as a grid field; the two Dirichlet rows are zero.

    Raises
    ------
    EllipticityLost
        If the smallest eigenvalue of ``A`` is at or below the guard.
    """
    _check_boundary(phi, boundary)
    R = residual_field(phi, cfg.epsilon, cfg.ellipticity_guard)
    out = np.zeros(phi.domain.shape)
    out[1:-1] = R
    return phi.with_values(out)


_OPERATOR_CACHE: dict = {}


def _operators(domain: TorusDomain):
    """Sparse difference matrices ``D[(i, j)]`` from the full grid to interior rows."""
    key = (domain.n, domain.Nx, domain.Ny, domain.Nt, domain.y_invariant)
    if key in _OPERATOR_CACHE:
        return _OPERATOR_CACHE[key]
    Nt, ht = domain.Nt, domain.h_t
    rows = np.arange(Nt)
    sel = sp.csr_matrix((np.ones(Nt), (rows, rows + 1)), shape=(Nt, Nt + 2))
    t2 = sp.csr_matrix(
        (np.concatenate([np.ones(Nt), -2 * np.ones(Nt), np.ones(Nt)]) / ht**2,
         (np.tile(rows, 3), np.concatenate([rows, rows + 1, rows + 2]))),
        shape=(Nt, Nt + 2),
    )
    t1 = sp.csr_matrix(
        (np.concatenate([-np.ones(Nt), np.ones(Nt)]) / (2 * ht),
         (np.tile(rows, 2), np.concatenate([rows, rows + 2]))),
        shape=(Nt, Nt + 2),
    )

    def periodic(N, h, second):
        e = np.ones(N)
        if second:
            M = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], format="lil")
            M[0, N - 1] = 1
            M[N - 1, 0] = 1
            return M.tocsr() / h**2
        M = sp.diags([-e[:-1], e[:-1]], [-1, 1], format="lil")
        M[0, N - 1] = -1
        M[N - 1, 0] = 1
        return M.tocsr() / (2 * h)

    axes = domain.spatial_axes
    sizes = domain.spatial_shape
    ident = [sp.identity(N, format="csr") for N in sizes]
    first = [periodic(N, domain.spacing(k), False) for N, k in zip(sizes, axes)]
    second = [periodic(N, domain.spacing(k), True) for N, k in zip(sizes, axes)]

    def kron_all(mats):
        out = mats[0]
        for m in mats[1:]:
            out = sp.kron(out, m, format="csr")
        return out

    D = {(0, 0): kron_all([t2] + ident)}
    for a, k in enumerate(axes):
        mats = [t1] + [first[c] if c == a else ident[c] for c in range(len(axes))]
        D[(0, k)] = kron_all(mats)
        mats = [sel] + [second[c] if c == a else ident[c] for c in range(len(axes))]
        D[(k, k)] = kron_all(mats)
        for c2 in range(a + 1, len(axes)):
            mats = [sel] + [first[c] if c in (a, c2) else ident[c] for c in range(len(axes))]
            D[(k, axes[c2])] = kron_all(mats)
    S = int(np.prod(sizes))
    interior = np.arange(S, (Nt + 1) * S)
    _OPERATOR_CACHE[key] = (D, interior)
    return D, interior


def _coefficients(domain: TorusDomain, v, ginv, epsilon):
    """Symmetric real coefficient fields ``C_ij`` with ``dR = sum_ij C_ij D_ij psi``."""
    n = domain.n
    d = domain.dim
    b = domain.metric_b
    M = 0.25 * np.einsum("...i,...j->...ij", v, np.conj(v)) + 4 * epsilon * ginv @ b @ ginv
    Mt = np.swapaxes(M, -1, -2)
    C = np.zeros(v.shape[:-1] + (d, d), dtype=complex)
    xs = slice(1, n + 1)
    ys = slice(n + 1, 2 * n + 1)
    C[..., 0, 0] = 1.0
    C[..., 0, xs] = -0.5 * v.real
    C[..., 0, ys] = 0.5 * v.imag
    C[..., xs, xs] = 0.25 * Mt
    C[..., ys, ys] = 0.25 * Mt
    C[..., xs, ys] = 0.25j * Mt
    C[..., ys, xs] = -0.25j * Mt
    return (0.5 * (C + np.swapaxes(C, -1, -2))).real


def _assemble(domain, coeff):
    D, interior = _operators(domain)
    J = None
    for (i, j), Dij in D.items():
        c = coeff[..., i, j].ravel() * (1.0 if i == j else 2.0)
        term = sp.diags(c) @ Dij
        J = term if J is None else J + term
    return J.tocsr(), interior


def jacobian(phi: GridField, epsilon: float, guard: float = 1e-8):
    """Sparse Jacobian of the interior residual w.r.t. all grid values, plus the interior column index."""
    _, _, v, ginv = _residual_interior(phi.values, phi.domain, epsilon, guard)
    return _assemble(phi.domain, _coefficients(phi.domain, v, ginv, epsilon))


def linearized_apply(phi: GridField, psi: GridField, cfg: SolverConfig | float) -> GridField:
    """Apply the linearized operator at ``phi`` to ``psi``.

    The result equals the derivative of the discrete residual in direction
    ``psi`` (four times the operator in ``tau``-coordinates).  Dirichlet
    rows of the output are zero.
    """
    eps = cfg.epsilon if isinstance(cfg, SolverConfig) else float(cfg)
    guard = cfg.ellipticity_guard if isinstance(cfg, SolverConfig) else 1e-8
    J, _ = jacobian(phi, eps, guard)
    out = np.zeros(phi.domain.shape)
    out[1:-1] = (J @ psi.values.ravel()).reshape(out[1:-1].shape)
    return phi.with_values(out)


# ---------------------------------------------------------------------------
# Newton
# ---------------------------------------------------------------------------

DIRECT_LIMIT = 30000


def _linear_solve(J, rhs, domain: TorusDomain):
    """Solve ``J x = rhs`` on interior unknowns.

    Quasi-1D problems, and small grids with two torus directions, use a
    sparse LU factorization.  Other grids use GMRES preconditioned by the
    t-line part of ``J`` (all couplings between nodes sharing a torus
    position), which is a set of independent tridiagonal systems.
    """
    J = J.tocsc()
    naxes = len(domain.spatial_axes)
    if naxes == 1 or (naxes == 2 and J.shape[0] <= DIRECT_LIMIT):
        return splu(J).solve(rhs)
    S = int(np.prod(domain.spatial_shape))
    C = J.tocoo()
    keep = (C.row - C.col) % S == 0
    P = sp.csc_matrix((C.data[keep], (C.row[keep], C.col[keep])), shape=J.shape)
    lu = splu(P)
    M = LinearOperator(J.shape, lu.solve)
    x, info = gmres(J, rhs, M=M, rtol=1e-12, atol=0.0, restart=60, maxiter=50)
    if info != 0:
        log.debug("gmres stopped before tolerance (info=%d)", info)
    return x


def newton_solve(phi_init: GridField, boundary: Boundary | None, cfg: SolverConfig, forcing=None, sigma: float = 1.0) -> SolverState:
    """Damped Newton iteration for ``R(phi) = forcing`` with fixed Dirichlet rows.

    Each step solves the sparse linearized system directly and halves the
    step until the guard holds and the sup-norm residual decreases.

    Raises
    ------
    EllipticityLost
        If the initial guess violates the guard, or no damped step keeps it.
    NewtonDiverged
        If the iteration limit is hit or no damped step reduces the residual.
    """
    dom = phi_init.domain
    vals = np.array(phi_init.values)
    if boundary is not None:
        vals[0] = boundary.phi0
        vals[-1] = boundary.phi1
    f = 0.0 if forcing is None else np.asarray(forcing, dtype=float)
    eps, guard = cfg.epsilon, cfg.ellipticity_guard

    R, m, v, ginv = _residual_interior(vals, dom, eps, guard)
    R = R - f
    rnorm = float(np.max(np.abs(R)))
    history = [rnorm]
    it = 0
    while rnorm > cfg.newton_tol:
        if it >= cfg.max_newton:
            raise NewtonDiverged(f"no convergence after {it} iterations (residual {rnorm:.3e})")
        J, interior = _assemble(dom, _coefficients(dom, v, ginv, eps))
        delta = _linear_solve(J[:, interior], -R.ravel(), dom)
        alpha = 1.0
        lost = None
        for _ in range(cfg.max_halvings + 1):
            trial = vals.copy()
            trial[1:-1] += alpha * delta.reshape(R.shape)
            try:
                Rt, mt, vt, gt = _residual_interior(trial, dom, eps, guard)
            except EllipticityLost as exc:
                lost = exc
                alpha *= cfg.damping
                continue
            Rt = Rt - f
            rt = float(np.max(np.abs(Rt)))
            if rt < rnorm:
                break
            lost = None
            alpha *= cfg.damping
        else:
            if lost is not None:
                raise lost
            raise NewtonDiverged(f"line search failed at residual {rnorm:.3e}")
        vals, R, m, v, ginv, rnorm = trial, Rt, mt, vt, gt, rt
        it += 1
        history.append(rnorm)
        log.debug("newton %d: residual %.3e step %.3g", it, rnorm, alpha)
    return SolverState(GridField(dom, vals), sigma, rnorm, m, it, eps, tuple(history))


# ---------------------------------------------------------------------------
# continuity method
# ---------------------------------------------------------------------------


def boundary_pairs(domain: TorusDomain, slice_values):
    """``(A, B)`` stacks from the spatial Hessian of one torus slice."""
    full = np.broadcast_to(slice_values, domain.shape)
    H = spatial_hessian_field(GridField(domain, full))[0]
    A, B, _, _ = complex_parts(H, domain.n, domain.metric_b)
    return A, B


def _boundary_q(domain, boundary, S, p, sigma):
    """Max over both boundary slices of ``Q^[p]`` for data ``sigma F`` and section ``sigma S``."""
    from .linalg import sim_diag_values

    best = 0.0
    for sl in (boundary.phi0, boundary.phi1):
        A, B = boundary_pairs(domain, sigma * sl)
        lam = sim_diag_values(A, B - sigma * S)
        q = np.sum(lam ** (2 * p), axis=-1) ** (1.0 / p)
        best = max(best, float(np.max(q)))
    return best


def check_boundary_convexity(domain: TorusDomain, boundary: Boundary, S=None):
    """Raise :class:`BoundaryNotConvex` unless both slices are strictly (S, omega_0)-convex."""
    from .linalg import sim_diag_values

    S = np.zeros((domain.n, domain.n), complex) if S is None else np.asarray(getattr(S, "S", S), complex)
    for name, sl in (("t=0", boundary.phi0), ("t=1", boundary.phi1)):
        A, B = boundary_pairs(domain, sl)
        min_a = float(np.linalg.eigvalsh(A)[..., 0].min())
        kmax = float(np.max(sim_diag_values(A, B - S)[..., 0] ** 2))
        if not (min_a > 0 and kmax < 1):
            raise BoundaryNotConvex(
                f"boundary slice {name} is not strictly (S, omega_0)-convex: "
                f"min eig A = {min_a:.4g}, max eig K_S = {kmax:.4g}"
            )


@dataclass(frozen=True)
class ContinuityStep:
    sigma: float
    residual_norm: float
    min_eig_A: float
    boundary_max_Q: float
    newton_iters: int


@dataclass(frozen=True, eq=False)
class ContinuityResult:
    state: SolverState
    trace: tuple


def continuity_solve(domain: TorusDomain, boundary: Boundary, cfg: SolverConfig, S=None, p: int = 4) -> ContinuityResult:
    """March ``sigma`` from 0 to 1 with boundary data ``sigma F``.

    The ``sigma = 0`` problem has the exact quadratic solution; each later
    solve is seeded with the previous solution plus the linear-in-t
    boundary increment.  Failed solves halve the step.
    """
    S = np.zeros((domain.n, domain.n), complex) if S is None else np.asarray(getattr(S, "S", S), complex)
    check_boundary_convexity(domain, boundary, S)
    interp = boundary.interpolant(domain)
    state = newton_solve(quadratic_solution(domain, cfg.epsilon), Boundary.zero(domain), cfg, sigma=0.0)
    trace = [ContinuityStep(0.0, state.residual_norm, state.min_eig_A, 0.0, state.newton_iters_used)]
    sigma = 0.0
    step = cfg.sigma_step
    nonzero = np.any(boundary.phi0) or np.any(boundary.phi1)
    if not nonzero:
        sigma = 1.0
        state = replace(state, sigma=1.0)
        trace.append(ContinuityStep(1.0, state.residual_norm, state.min_eig_A, 0.0, 0))
        return ContinuityResult(state, tuple(trace))
    while sigma < 1.0:
        target = sigma + step
        if target > 1.0 - 1e-9:
            target = 1.0
        seed = state.phi.values + (target - sigma) * interp
        try:
            new = newton_solve(GridField(domain, seed), boundary.scaled(target), cfg, sigma=target)
        except (EllipticityLost, NewtonDiverged) as exc:
            step *= 0.5
            log.info("continuity step to sigma=%.4g failed (%s); step -> %.3g", target, exc, step)
            if step < cfg.sigma_min_step:
                raise ContinuityStalled(f"step fell below {cfg.sigma_min_step} at sigma={sigma:.6g}") from exc
            continue
        state, sigma = new, target
        trace.append(
            ContinuityStep(sigma, new.residual_norm, new.min_eig_A, _boundary_q(domain, boundary, S, p, sigma), new.newton_iters_used)
        )
        step = min(2 * step, cfg.sigma_step)
    return ContinuityResult(state, tuple(trace))


# ---------------------------------------------------------------------------
# epsilon sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SweepResult:
    epsilons: tuple
    states: tuple
    distances: tuple
    reports: tuple = ()


def epsilon_sweep(domain: TorusDomain, boundary: Boundary, eps_list, cfg: SolverConfig, S=None, p: int = 4, reports: bool = False) -> SweepResult:
    """Solve for each ``eps`` in a descending list, warm-starting from the previous solution.

    ``distances[k]`` is the sup-norm distance between solutions ``k`` and
    ``k + 1``.  With ``reports=True`` each state also gets a convexity report.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(e <= 0 for e in eps_list):
        raise ValueError("epsilon list must be nonempty and positive")
    if any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("epsilon list must be strictly descending")
    states = []
    for eps in eps_list:
        c = replace(cfg, epsilon=eps)
        if states:
            try:
                st = newton_solve(states[-1].phi, boundary, c)
            except (EllipticityLost, NewtonDiverged):
                st = continuity_solve(domain, boundary, c, S, p).state
        else:
            st = continuity_solve(domain, boundary, c, S, p).state
        states.append(st)
    dist = tuple(a.phi.sup_distance(b.phi) for a, b in zip(states, states[1:]))
    reps = ()
    if reports:
        from .verify import convexity_preservation_check

        reps = tuple(convexity_preservation_check(st, S, p) for st in states)
    return SweepResult(tuple(eps_list), tuple(states), dist, reps)

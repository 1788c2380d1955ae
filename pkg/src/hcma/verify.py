"""Numerical checks of convexity preservation on solver output.

Every check returns raw numbers next to its verdict.  Discrete tolerances
are split into a floating-point floor plus an ``O(h^2)`` allowance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .convexity import modulus_field
from .errors import EllipticityLost
from .linalg import sim_diag_values
from .solver import (
    Boundary,
    SolverConfig,
    SolverState,
    continuity_solve,
    jacobian,
    newton_solve,
    residual_from_hessian,
)
from .torus import GridField, TorusDomain, complex_parts, spatial_hessian_field

__all__ = [
    "ConvexityReport",
    "MaxPrincipleResult",
    "slice_pairs",
    "slice_fields",
    "convexity_preservation_check",
    "metric_lower_bound_check",
    "maximum_principle_check",
    "path_energy",
    "ManufacturedStudy",
    "manufactured_study",
    "observed_orders",
    "cosine_boundary",
    "cosine_solution",
    "MaxPrincipleStudy",
    "max_principle_study",
]


# Allowance constant C in C h^2 for the maximum-principle check, calibrated by
# max_principle_study on the two-phase cosine family (which gives C ~ 8e-5).
DEFAULT_MP_C = 1e-4


def _S_matrix(S, n):
    if S is None:
        return np.zeros((n, n), complex)
    return np.atleast_2d(np.asarray(getattr(S, "S", S), dtype=complex))


def slice_pairs(phi: GridField):
    """``(A, B)`` at every node of every time level, from spatial derivatives only."""
    H = spatial_hessian_field(phi)
    A, B, _, _ = complex_parts(H, phi.domain.n, phi.domain.metric_b)
    return A, B


def slice_fields(phi: GridField, S=None, p: int = 4):
    """Per-node ``min eig A``, ``Lambda`` values and ``Q^[p]`` on all time levels."""
    dom = phi.domain
    A, B = slice_pairs(phi)
    lam = sim_diag_values(A, B - _S_matrix(S, dom.n))
    q = np.sum(lam ** (2 * p), axis=-1) ** (1.0 / p)
    return A, B, lam, q


@dataclass(frozen=True, eq=False)
class MaxPrincipleResult:
    min_value: float
    eligible: int
    excluded: int
    tol: float
    passed: bool
    field: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True, eq=False)
class ConvexityReport:
    t: np.ndarray
    slice_modulus: np.ndarray
    slice_max_Q: np.ndarray
    slice_min_gap: np.ndarray
    p: int
    mu: float
    boundary_modulus: float
    interior_min_modulus: float
    interior_max_Q: float
    boundary_max_Q: float
    min_metric_gap: float
    max_principle: MaxPrincipleResult
    q_tol: float
    modulus_tol: float
    metric_tol: float
    verdicts: dict

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    @property
    def max_principle_min(self) -> float:
        return self.max_principle.min_value

    def summary(self) -> dict:
        """Plain-dict view suitable for serialization."""
        return {
            "p": self.p,
            "mu": self.mu,
            "boundary_modulus": self.boundary_modulus,
            "interior_min_modulus": self.interior_min_modulus,
            "interior_max_Q": self.interior_max_Q,
            "boundary_max_Q": self.boundary_max_Q,
            "min_metric_gap": self.min_metric_gap,
            "max_principle_min": self.max_principle.min_value,
            "max_principle_eligible": self.max_principle.eligible,
            "max_principle_excluded": self.max_principle.excluded,
            "tolerances": {
                "q": self.q_tol,
                "modulus": self.modulus_tol,
                "metric": self.metric_tol,
                "max_principle": self.max_principle.tol,
            },
            "verdicts": dict(self.verdicts),
            "passed": self.passed,
        }


def _h2(dom: TorusDomain) -> float:
    hs = [dom.h_t] + [dom.spacing(k) for k in dom.spatial_axes]
    return max(hs) ** 2


def metric_lower_bound_check(state: SolverState, mu: float, tol: float = 1e-6):
    """Minimum over interior nodes of the smallest eigenvalue of ``A - mu b``.

    Returns ``(gap, passed)`` with ``passed = gap >= -tol``.
    """
    dom = state.phi.domain
    A, _ = slice_pairs(state.phi)
    gap = float(np.linalg.eigvalsh(A[1:-1] - mu * dom.metric_b)[..., 0].min())
    return gap, bool(gap >= -tol)


def maximum_principle_check(state: SolverState, S=None, p: int = 4, tol: float | None = None, C: float = DEFAULT_MP_C) -> MaxPrincipleResult:
    """Apply the discrete linearized operator to ``Q^<p>`` and take the minimum over eligible nodes.

    Eligible interior nodes have ``max eig K_S <= 1 - 1/(2p)``; the rest are
    counted as excluded.  The default tolerance is ``1e-12 + C h^2`` with
    ``h`` the coarsest grid spacing.  A state on which the operator is not
    elliptic fails with ``min_value = -inf``.
    """
    dom = state.phi.domain
    _, _, lam, _ = slice_fields(state.phi, S, p)
    qtrace = np.sum(lam ** (2 * p), axis=-1)
    if tol is None:
        tol = 1e-12 + C * _h2(dom)
    try:
        J, _ = jacobian(state.phi, state.epsilon, 0.0)
    except EllipticityLost:
        # the operator is not elliptic somewhere, so the check cannot hold
        return MaxPrincipleResult(-np.inf, 0, int(qtrace[1:-1].size), float(tol), False, None)
    LQ = (J @ qtrace.ravel()).reshape(qtrace[1:-1].shape)
    eligible = lam[1:-1, ..., 0] ** 2 <= 1 - 1 / (2 * p)
    n_el = int(eligible.sum())
    m = float(LQ[eligible].min()) if n_el else 0.0
    return MaxPrincipleResult(m, n_el, int(eligible.size - n_el), float(tol), bool(m >= -tol), LQ)


def convexity_preservation_check(
    state: SolverState,
    S=None,
    p: int = 4,
    tol: float | None = None,
    mu: float | None = None,
    modulus_tol: float | None = None,
    metric_tol: float = 1e-6,
    mp_C: float = DEFAULT_MP_C,
) -> ConvexityReport:
    """Per-slice convexity summaries and pass/fail verdicts for a solution.

    ``tol`` bounds how far the interior maximum of ``Q^[p]`` may exceed the
    boundary maximum (default ``1e-6 + h^2``).  ``mu`` is the modulus to
    certify (default: the smaller boundary modulus minus ``modulus_tol``).
    """
    dom = state.phi.domain
    h2 = _h2(dom)
    if tol is None:
        tol = 1e-6 + h2
    if modulus_tol is None:
        modulus_tol = 1e-4 + h2
    Smat = _S_matrix(S, dom.n)
    A, B, lam, q = slice_fields(state.phi, Smat, p)
    mod = modulus_field(A, B, Smat, dom.metric_b)
    axes = tuple(range(1, mod.ndim))
    slice_mod = mod.min(axis=axes)
    slice_q = q.max(axis=axes)
    boundary_mod = float(min(slice_mod[0], slice_mod[-1]))
    if mu is None:
        mu = boundary_mod - modulus_tol
    gaps = np.linalg.eigvalsh(A - mu * dom.metric_b)[..., 0]
    slice_gap = gaps.min(axis=axes)
    interior_mod = float(slice_mod[1:-1].min())
    interior_q = float(slice_q[1:-1].max())
    boundary_q = float(max(slice_q[0], slice_q[-1]))
    gap = float(slice_gap[1:-1].min())
    mp = maximum_principle_check(state, Smat, p, C=mp_C)
    verdicts = {
        "interior_q_below_boundary": bool(interior_q <= boundary_q + tol),
        "slice_modulus_preserved": bool(interior_mod >= min(mu, boundary_mod) - modulus_tol),
        "metric_lower_bound": bool(gap >= -metric_tol),
        "maximum_principle": mp.passed,
    }
    return ConvexityReport(
        t=dom.t.copy(),
        slice_modulus=slice_mod,
        slice_max_Q=slice_q,
        slice_min_gap=slice_gap,
        p=p,
        mu=float(mu),
        boundary_modulus=boundary_mod,
        interior_min_modulus=interior_mod,
        interior_max_Q=interior_q,
        boundary_max_Q=boundary_q,
        min_metric_gap=gap,
        max_principle=mp,
        q_tol=float(tol),
        modulus_tol=float(modulus_tol),
        metric_tol=float(metric_tol),
        verdicts=verdicts,
    )


def path_energy(state: SolverState):
    """Energy ``E`` and speed profile ``speed(t) = int phi_t^2 det(g)/det(b)`` over the torus.

    The torus integral is the mean over nodes (unit volume); ``phi_t`` uses
    second-order differences including one-sided ones at the ends, and ``E``
    is the trapezoid rule in ``t``.
    """
    dom = state.phi.domain
    A, _ = slice_pairs(state.phi)
    ratio = (np.linalg.det(A) / np.linalg.det(dom.metric_b)).real
    phi_t = np.gradient(state.phi.values, dom.h_t, axis=0, edge_order=2)
    speed = (phi_t**2 * ratio).reshape(dom.Nt + 2, -1).mean(axis=1)
    energy = float(np.sum(0.5 * (speed[1:] + speed[:-1])) * dom.h_t)
    return energy, speed


# ---------------------------------------------------------------------------
# refinement studies
# ---------------------------------------------------------------------------


def observed_orders(errors, ratio: float = 2.0) -> np.ndarray:
    """``log(e_k / e_{k+1}) / log(ratio)`` for consecutive refinement levels."""
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(ratio)


def cosine_boundary(domain: TorusDomain, c: float, shift: float = 0.25) -> Boundary:
    """``c cos(2 pi x^1)`` at ``t = 0`` and ``c cos(2 pi (x^1 + shift))`` at ``t = 1``."""
    x = domain.coordinates()["x1"][0]
    shape = domain.spatial_shape
    phi0 = np.broadcast_to(c * np.cos(2 * np.pi * x), shape)
    phi1 = np.broadcast_to(c * np.cos(2 * np.pi * (x + shift)), shape)
    return Boundary(phi0, phi1)


def _manufactured(t, x, eps, a=0.02, b=0.01):
    """Smooth strip function with its exact ``(t, x)`` Hessian (n = 1, y-invariant)."""
    k = 2 * np.pi
    cx, sx = np.cos(k * x), np.sin(k * x)
    st, ct = np.sin(np.pi * t), np.cos(np.pi * t)
    u = 2 * eps * t * (t - 1) + a * (1 + t) * cx + b * st * sx
    u_tt = 4 * eps - b * np.pi**2 * st * sx
    u_tx = -a * k * sx + b * np.pi * k * ct * cx
    u_xx = -a * k**2 * (1 + t) * cx - b * k**2 * st * sx
    H = np.zeros(np.broadcast(t, x).shape + (3, 3))
    H[..., 0, 0] = u_tt
    H[..., 0, 1] = H[..., 1, 0] = u_tx
    H[..., 1, 1] = u_xx
    return np.broadcast_to(u, H.shape[:-2]), H


@dataclass(frozen=True)
class ManufacturedStudy:
    sizes: tuple
    errors: tuple
    orders: tuple


def manufactured_study(sizes=(32, 64, 128), epsilon: float = 0.1, cfg: SolverConfig | None = None) -> ManufacturedStudy:
    """Sup-norm error of the discrete solution against a manufactured exact solution.

    The forcing is the continuum residual of the exact function, so the
    discrete error measures the consistency of the whole scheme.
    """
    cfg = SolverConfig(epsilon=epsilon) if cfg is None else cfg
    errs = []
    for N in sizes:
        dom = TorusDomain(1, np.eye(1), N, 8, N - 1, y_invariant=True)
        c = dom.coordinates()
        u, H = _manufactured(c["t"], c["x1"], cfg.epsilon)
        u = np.array(u)
        f = residual_from_hessian(dom, H[1:-1], cfg.epsilon)
        bd = Boundary(u[0], u[-1])
        seed = u[0] + (u[-1] - u[0]) * c["t"]
        st = newton_solve(GridField(dom, np.broadcast_to(seed, dom.shape)), bd, cfg, forcing=f)
        errs.append(float(np.max(np.abs(st.phi.values - u))))
    return ManufacturedStudy(tuple(sizes), tuple(errs), tuple(observed_orders(errs)))


def cosine_solution(N: int, c: float = 0.01, epsilon: float = 0.05, cfg: SolverConfig | None = None) -> SolverState:
    """Continuity solve of the two-phase cosine problem on an ``N x N`` y-invariant grid."""
    cfg = SolverConfig(epsilon=epsilon) if cfg is None else cfg
    dom = TorusDomain(1, np.eye(1), N, 8, N - 1, y_invariant=True)
    return continuity_solve(dom, cosine_boundary(dom, c), cfg).state


@dataclass(frozen=True, eq=False)
class MaxPrincipleStudy:
    """Refinement calibration of the maximum-principle tolerance ``C h^2``.

    ``differences[k]`` is the sup-norm change of the discrete ``L Q^<p>`` on
    eligible nodes shared by levels ``k`` and ``k + 1``; it estimates the
    discretization error of level ``k``.
    """

    sizes: tuple
    minima: tuple
    differences: tuple
    orders: tuple
    C: float
    states: tuple = field(repr=False, default=())


def max_principle_study(sizes=(32, 64, 128), c: float = 0.01, epsilon: float = 0.05, S=None, p: int = 4, safety: float = 2.0) -> MaxPrincipleStudy:
    """Solve the cosine problem on nested grids and calibrate ``C`` from successive differences.

    With error ``~ K h^2`` the difference between levels ``h`` and ``h/2`` is
    ``(3/4) K h^2``, so ``C = safety * (4/3) * max_k d_k / h_k^2``.
    """
    states, results = [], []
    for N in sizes:
        st = cosine_solution(N, c, epsilon)
        states.append(st)
        results.append(maximum_principle_check(st, S, p))
    diffs, cs = [], []
    for k in range(len(sizes) - 1):
        r = sizes[k + 1] // sizes[k]
        coarse = results[k].field
        fine = results[k + 1].field
        # interior level i of the coarse grid sits at fine interior level r*(i+1)-1
        sub = fine[r - 1 :: r][: coarse.shape[0]][:, ::r]
        _, _, lam, _ = slice_fields(states[k].phi, S, p)
        eligible = lam[1:-1, ..., 0] ** 2 <= 1 - 1 / (2 * p)
        d = float(np.max(np.abs(coarse - sub)[eligible]))
        diffs.append(d)
        cs.append(d * 4.0 / 3.0 / _h2(states[k].phi.domain))
    C = safety * max(cs) if cs else 0.0
    return MaxPrincipleStudy(
        tuple(sizes),
        tuple(r.min_value for r in results),
        tuple(diffs),
        tuple(observed_orders(diffs)),
        float(C),
        tuple(states),
    )

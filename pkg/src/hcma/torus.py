"""Flat complex tori, strip grids and finite-difference complex Hessians.

The product domain is ``[0, 1] x C^n / Z^2n`` with real coordinates
``(t, x^1..x^n, y^1..y^n)`` and ``z^a = x^a + i y^a``.  Real Hessians are
indexed the same way: index 0 is ``t``, ``1..n`` are the ``x^a`` and
``n+1..2n`` are the ``y^a``.

Strip reduction
---------------
With ``tau = t + i theta`` and a potential that does not depend on
``theta`` we have ``d/dtau = (d/dt - i d/dtheta) / 2 = (1/2) d/dt``, and
``d/dz^a = (d/dx^a - i d/dy^a) / 2``.  Therefore::

    Phi_{tau taubar} = phi_tt / 4
    Phi_{tau abar}   = (phi_{t x^a} + i phi_{t y^a}) / 4
    Phi_{a bbar}     = (phi_{x^a x^b} + phi_{y^a y^b}
                        + i (phi_{x^a y^b} - phi_{y^a x^b})) / 4
    Phi_{a b}        = (phi_{x^a x^b} - phi_{y^a y^b}
                        - i (phi_{x^a y^b} + phi_{y^a x^b})) / 4

so every complex second derivative is a quarter of a real combination.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

__all__ = [
    "TorusDomain",
    "ConstantSection",
    "GridField",
    "ComplexHessianPair",
    "PotentialKind",
    "real_hessian",
    "complex_hessian",
    "sample_potential",
    "hessian_field",
    "spatial_hessian_field",
    "complex_parts",
]


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TorusDomain:
    """Flat torus ``C^n / Z^2n`` with constant metric ``b`` and a strip grid.

    ``Nt`` counts interior time levels; the grid has ``Nt + 2`` levels
    including the two Dirichlet slices at ``t = 0`` and ``t = 1``.
    """

    n: int
    metric_b: np.ndarray
    Nx: int
    Ny: int
    Nt: int
    y_invariant: bool = False

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"complex dimension must be 1 or 2, got {self.n}")
        b = np.atleast_2d(np.asarray(self.metric_b, dtype=complex))
        if b.shape != (self.n, self.n):
            raise ValueError(f"metric_b must be {self.n}x{self.n}, got {b.shape}")
        if not np.allclose(b, b.conj().T, rtol=0, atol=1e-14 * (1 + np.abs(b).max())):
            raise ValueError("metric_b is not Hermitian")
        b = 0.5 * (b + b.conj().T)
        if np.linalg.eigvalsh(b).min() <= 0:
            raise ValueError("metric_b is not positive definite")
        for name in ("Nx", "Ny"):
            v = getattr(self, name)
            if v < 8 or v % 2:
                raise ValueError(f"{name} must be even and >= 8, got {v}")
        if self.Nt < 2:
            raise ValueError(f"Nt must be >= 2, got {self.Nt}")
        object.__setattr__(self, "metric_b", _readonly(b))

    @property
    def h_t(self) -> float:
        return 1.0 / (self.Nt + 1)

    @property
    def h_x(self) -> float:
        return 1.0 / self.Nx

    @property
    def h_y(self) -> float:
        return 1.0 / self.Ny

    @property
    def dim(self) -> int:
        """Size of the real Hessian, ``2n + 1``."""
        return 2 * self.n + 1

    @property
    def spatial_axes(self) -> list[int]:
        """Real-Hessian index carried by each spatial array axis."""
        axes = list(range(1, self.n + 1))
        if not self.y_invariant:
            axes += list(range(self.n + 1, 2 * self.n + 1))
        return axes

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return tuple(self.Nx if k <= self.n else self.Ny for k in self.spatial_axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.Nt + 2,) + self.spatial_shape

    def spacing(self, k: int) -> float:
        """Grid spacing along real-Hessian index ``k``."""
        if k == 0:
            return self.h_t
        return self.h_x if k <= self.n else self.h_y

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.Nt + 2) * self.h_t

    def coordinates(self) -> dict[str, np.ndarray]:
        """Broadcastable coordinate arrays keyed ``t``, ``x1``, ``y1``, ...

        Collapsed y-directions are returned as zeros.
        """
        ndim = 1 + len(self.spatial_axes)
        out = {}
        shape = [1] * ndim
        shape[0] = -1
        out["t"] = self.t.reshape(shape)
        for ax, k in enumerate(self.spatial_axes, start=1):
            shape = [1] * ndim
            shape[ax] = -1
            h = self.spacing(k)
            npts = self.Nx if k <= self.n else self.Ny
            name = f"x{k}" if k <= self.n else f"y{k - self.n}"
            out[name] = (np.arange(npts) * h).reshape(shape)
        for a in range(1, self.n + 1):
            out.setdefault(f"y{a}", np.zeros([1] * ndim))
        return out


@dataclass(frozen=True, eq=False)
class ConstantSection:
    """Constant symmetric 2-tensor ``S`` stored as an ``n x n`` matrix."""

    S: np.ndarray

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.S, dtype=complex))
        if S.shape[0] != S.shape[1]:
            raise ValueError(f"S must be square, got {S.shape}")
        if not np.array_equal(S, S.T):
            raise ValueError("S must equal its transpose exactly")
        object.__setattr__(self, "S", _readonly(S))

    @classmethod
    def zero(cls, n: int) -> "ConstantSection":
        return cls(np.zeros((n, n), dtype=complex))

    @property
    def n(self) -> int:
        return self.S.shape[0]


@dataclass(frozen=True, eq=False)
class GridField:
    """Real scalar samples on the ``(t, x[, y])`` grid of a domain."""

    domain: TorusDomain
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.domain.shape:
            raise ValueError(f"field shape {v.shape} != domain shape {self.domain.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains NaN or Inf")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def h_t(self) -> float:
        return self.domain.h_t

    @property
    def h_x(self) -> float:
        return self.domain.h_x

    @property
    def h_y(self) -> float:
        return self.domain.h_y

    def with_values(self, values) -> "GridField":
        return GridField(self.domain, values)

    def sup_distance(self, other: "GridField") -> float:
        return float(np.max(np.abs(self.values - other.values)))


@dataclass(frozen=True, eq=False)
class ComplexHessianPair:
    """Pointwise complex second derivatives on the strip.

    ``A = b + Phi_{a bbar}`` (Hermitian), ``B = Phi_{ab}`` (symmetric),
    ``t_block = phi_tt`` and ``cross[a] = Phi_{tau abar}``.
    """

    A: np.ndarray
    B: np.ndarray
    t_block: float
    cross: np.ndarray


# ---------------------------------------------------------------------------
# pointwise stencils
# ---------------------------------------------------------------------------


def _check_point(domain: TorusDomain, point: Sequence[int]) -> tuple[int, ...]:
    point = tuple(int(i) for i in point)
    if len(point) != len(domain.shape):
        raise IndexError(f"point {point} does not match grid rank {len(domain.shape)}")
    if not 1 <= point[0] <= domain.Nt:
        raise IndexError(f"time index {point[0]} is not interior (1..{domain.Nt})")
    return point


def real_hessian(field: GridField, point: Sequence[int]) -> np.ndarray:
    """Central-difference real Hessian at one interior grid point.

    Returns the symmetric ``(2n+1) x (2n+1)`` matrix ordered
    ``(t, x^1..x^n, y^1..y^n)``; y-rows are zero for y-invariant domains.
    """
    dom = field.domain
    point = _check_point(dom, point)
    u = field.values
    shape = u.shape
    # array axis of each real index (None where collapsed)
    axis_of = {0: 0}
    for ax, k in enumerate(dom.spatial_axes, start=1):
        axis_of[k] = ax

    def at(offsets):
        idx = list(point)
        for ax, d in offsets.items():
            idx[ax] += d
            if ax > 0:
                idx[ax] %= shape[ax]
        return u[tuple(idx)]

    d = dom.dim
    H = np.zeros((d, d))
    present = sorted(axis_of)
    for i in present:
        ai, hi = axis_of[i], dom.spacing(i)
        H[i, i] = (at({ai: 1}) - 2 * at({}) + at({ai: -1})) / hi**2
        for j in present:
            if j <= i:
                continue
            aj, hj = axis_of[j], dom.spacing(j)
            H[i, j] = H[j, i] = (
                at({ai: 1, aj: 1}) - at({ai: 1, aj: -1}) - at({ai: -1, aj: 1}) + at({ai: -1, aj: -1})
            ) / (4 * hi * hj)
    return H


def complex_parts(H: np.ndarray, n: int, b: np.ndarray):
    """Map real Hessians ``(..., 2n+1, 2n+1)`` to ``(A, B, t_block, cross)``.

    Works on any leading batch shape.  Only the spatial block is used for
    ``A`` and ``B``, so a ``(..., 2n, 2n)`` spatial Hessian padded with a
    zero time row is also accepted.
    """
    xs = slice(1, n + 1)
    ys = slice(n + 1, 2 * n + 1)
    Hxx = H[..., xs, xs]
    Hyy = H[..., ys, ys]
    Hxy = H[..., xs, ys]
    Hyx = np.swapaxes(Hxy, -1, -2)
    A = b + 0.25 * (Hxx + Hyy + 1j * (Hxy - Hyx))
    B = 0.25 * (Hxx - Hyy - 1j * (Hxy + Hyx))
    A = 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))
    B = 0.5 * (B + np.swapaxes(B, -1, -2))
    cross = 0.25 * (H[..., 0, xs] + 1j * H[..., 0, ys])
    return A, B, H[..., 0, 0], cross


def complex_hessian(field: GridField, point: Sequence[int], domain: TorusDomain | None = None) -> ComplexHessianPair:
    """Complex derivative matrices ``A``, ``B`` and the strip terms at a point."""
    domain = field.domain if domain is None else domain
    H = real_hessian(field, point)
    A, B, tt, cross = complex_parts(H, domain.n, domain.metric_b)
    return ComplexHessianPair(A=A, B=B, t_block=float(tt), cross=cross)


# ---------------------------------------------------------------------------
# vectorised stencils over the whole grid
# ---------------------------------------------------------------------------


def _d1(u, ax, h):
    return (np.roll(u, -1, axis=ax) - np.roll(u, 1, axis=ax)) / (2 * h)


def _d2(u, ax, h):
    return (np.roll(u, -1, axis=ax) - 2 * u + np.roll(u, 1, axis=ax)) / h**2


def spatial_hessian_field(field: GridField) -> np.ndarray:
    """Real Hessian with a zero time row/column on *every* time level.

    Shape ``(Nt + 2, *spatial, 2n+1, 2n+1)``; valid on the Dirichlet slices
    too since no time derivative is taken.
    """
    dom = field.domain
    u = field.values
    H = np.zeros(u.shape + (dom.dim, dom.dim))
    axes = list(enumerate(dom.spatial_axes, start=1))
    first = {k: _d1(u, ax, dom.spacing(k)) for ax, k in axes}
    for ax, k in axes:
        H[..., k, k] = _d2(u, ax, dom.spacing(k))
        for ax2, k2 in axes:
            if k2 > k:
                H[..., k, k2] = H[..., k2, k] = _d1(first[k], ax2, dom.spacing(k2))
    return H


def hessian_field(field: GridField) -> np.ndarray:
    """Full real Hessian on interior time levels, shape ``(Nt, *spatial, d, d)``."""
    dom = field.domain
    u = field.values
    ht = dom.h_t
    H = spatial_hessian_field(field)[1:-1].copy()
    H[..., 0, 0] = (u[2:] - 2 * u[1:-1] + u[:-2]) / ht**2
    for ax, k in enumerate(dom.spatial_axes, start=1):
        du = _d1(u, ax, dom.spacing(k))
        H[..., 0, k] = H[..., k, 0] = (du[2:] - du[:-2]) / (2 * ht)
    return H


# ---------------------------------------------------------------------------
# test potentials
# ---------------------------------------------------------------------------


class PotentialKind(str, Enum):
    COSINE_X = "cosine_x"
    COSINE_Y = "cosine_y"
    COSINE_MIX = "cosine_mix"
    CONSTANT = "constant"


def sample_potential(kind, amplitudes, domain: TorusDomain, shift: float = 0.0) -> GridField:
    """Torus-periodic trigonometric potential broadcast over every time level.

    ``cosine_x``   ``c cos(2 pi (x^1 + shift))``
    ``cosine_y``   ``c cos(2 pi (y^1 + shift))`` (needs y-directions)
    ``cosine_mix`` ``sum_k c_k cos(2 pi (k-th wave . coords + shift))`` over the
                   waves ``x^1``, ``x^1 + x^n``, ``x^1 - y^1`` (or
                   ``x^1 - 2 x^n`` on y-invariant domains)
    ``constant``   ``c``
    """
    kind = PotentialKind(kind)
    amps = np.atleast_1d(np.asarray(amplitudes, dtype=float))
    if not np.all(np.isfinite(amps)):
        raise ValueError("amplitudes must be finite")
    c = dom_coords = domain.coordinates()
    x1 = dom_coords["x1"]
    xn = dom_coords[f"x{domain.n}"]
    two_pi = 2 * np.pi
    if kind is PotentialKind.COSINE_X:
        vals = amps[0] * np.cos(two_pi * (x1 + shift))
    elif kind is PotentialKind.COSINE_Y:
        if domain.y_invariant:
            raise ValueError("cosine_y needs a domain with y-directions")
        vals = amps[0] * np.cos(two_pi * (c["y1"] + shift))
    elif kind is PotentialKind.COSINE_MIX:
        third = x1 - 2 * xn if domain.y_invariant else x1 - c["y1"]
        waves = [x1, x1 + xn, third]
        if len(amps) > len(waves):
            raise ValueError(f"cosine_mix takes at most {len(waves)} amplitudes")
        vals = sum(a * np.cos(two_pi * (w + shift)) for a, w in zip(amps, waves))
    else:
        vals = amps[0] * np.ones([1] * len(domain.shape))
    return GridField(domain, np.broadcast_to(vals, domain.shape))

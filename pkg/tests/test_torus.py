import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcma.torus import (
    ConstantSection,
    GridField,
    TorusDomain,
    complex_hessian,
    complex_parts,
    hessian_field,
    real_hessian,
    sample_potential,
    spatial_hessian_field,
)
from hcma.verify import observed_orders


def dom1(N=32, Nt=15, y_invariant=False, Ny=None):
    return TorusDomain(1, np.eye(1), N, N if Ny is None else Ny, Nt, y_invariant=y_invariant)


def dom2(N=8, Nt=5, b=None):
    b = np.eye(2) if b is None else b
    return TorusDomain(2, b, N, N, Nt)


class TestDomain:
    def test_shapes_and_spacings(self):
        d = dom1(16, 7)
        assert d.shape == (9, 16, 16)
        assert d.h_t == pytest.approx(1 / 8)
        assert d.h_x == pytest.approx(1 / 16)
        assert d.dim == 3
        dy = dom1(16, 7, y_invariant=True)
        assert dy.shape == (9, 16)
        assert dom2().shape == (7, 8, 8, 8, 8)

    def test_coordinates_broadcast(self):
        d = dom2(8, 3)
        c = d.coordinates()
        assert set(c) == {"t", "x1", "x2", "y1", "y2"}
        full = np.broadcast(*c.values()).shape
        assert full == d.shape
        assert c["t"].ravel()[-1] == pytest.approx(1.0)

    def test_collapsed_y_coordinates_are_zero(self):
        c = dom1(8, 3, y_invariant=True).coordinates()
        assert np.all(c["y1"] == 0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n=3, metric_b=np.eye(3), Nx=8, Ny=8, Nt=3),
            dict(n=1, metric_b=[[-1.0]], Nx=8, Ny=8, Nt=3),
            dict(n=2, metric_b=[[1, 1j], [1j, 1]], Nx=8, Ny=8, Nt=3),
            dict(n=1, metric_b=[[1.0]], Nx=2, Ny=8, Nt=3),
            dict(n=1, metric_b=[[1.0]], Nx=8, Ny=8, Nt=0),
        ],
    )
    def test_rejects_bad_domains(self, kwargs):
        with pytest.raises(ValueError):
            TorusDomain(**kwargs)

    def test_field_validation_and_immutability(self):
        d = dom1(8, 3)
        with pytest.raises(ValueError):
            GridField(d, np.zeros((5, 8, 7)))
        bad = np.zeros(d.shape)
        bad[1, 1, 1] = np.nan
        with pytest.raises(ValueError):
            GridField(d, bad)
        f = GridField(d, np.zeros(d.shape))
        with pytest.raises(ValueError):
            f.values[0, 0, 0] = 1.0

    def test_constant_section_requires_symmetry(self):
        with pytest.raises(ValueError):
            ConstantSection(np.array([[0, 1], [2, 0]]))
        assert ConstantSection.zero(2).n == 2


class TestRealHessian:
    def test_zero_field(self):
        d = dom1(8, 3)
        H = real_hessian(GridField(d, np.zeros(d.shape)), (2, 3, 4))
        assert np.array_equal(H, np.zeros((3, 3)))

    def test_quadratic_patch_is_exact(self):
        d = dom1(32, 15)
        c = d.coordinates()
        t, x, y = c["t"], c["x1"], c["y1"]
        u = 0.7 * t**2 + x**2 - 0.3 * x * y + 1.1 * t * x - 0.4 * t * y + 2.5 * y**2
        f = GridField(d, np.broadcast_to(u, d.shape))
        H = real_hessian(f, (7, 10, 20))
        ref = np.array([[1.4, 1.1, -0.4], [1.1, 2.0, -0.3], [-0.4, -0.3, 5.0]])
        np.testing.assert_allclose(H, ref, rtol=0, atol=1e-9)

    def test_out_of_range_time_index(self):
        d = dom1(8, 3)
        f = GridField(d, np.zeros(d.shape))
        for k in (0, 4, -1):
            with pytest.raises(IndexError):
                real_hessian(f, (k, 0, 0))
        with pytest.raises(IndexError):
            real_hessian(f, (1, 0))

    def test_cosine_second_derivative_converges(self):
        # analytic oracle -4 pi^2 at x = 0; Richardson removes the h^2 term
        vals = []
        for N in (16, 32, 64):
            d = dom1(N, 3, y_invariant=True)
            x = d.coordinates()["x1"]
            f = GridField(d, np.broadcast_to(np.cos(2 * np.pi * x), d.shape))
            vals.append(real_hessian(f, (1, 0))[1, 1])
        exact = -4 * np.pi**2
        errs = [abs(v - exact) for v in vals]
        assert errs[-1] < 0.05
        orders = observed_orders(errs)
        assert np.all((orders > 1.9) & (orders < 2.1))
        rich = (4 * vals[2] - vals[1]) / 3
        assert abs(rich - exact) < 1e-4

    def test_matches_vectorised_field(self, rng):
        d = dom2(8, 4)
        f = GridField(d, 0.01 * rng.normal(size=d.shape))
        Hf = hessian_field(f)
        pt = (3, 1, 5, 2, 0)
        np.testing.assert_allclose(Hf[(pt[0] - 1,) + pt[1:]], real_hessian(f, pt), atol=1e-10)
        Hs = spatial_hessian_field(f)
        np.testing.assert_allclose(Hs[pt][1:, 1:], real_hessian(f, pt)[1:, 1:], atol=1e-10)
        assert np.all(Hs[..., 0, :] == 0)


class TestComplexHessian:
    def test_metric_only(self):
        d = dom2(8, 3, b=np.array([[2, 0.5j], [-0.5j, 1]]))
        pair = complex_hessian(GridField(d, np.zeros(d.shape)), (1, 0, 0, 0, 0))
        np.testing.assert_allclose(pair.A, d.metric_b)
        np.testing.assert_allclose(pair.B, 0)
        assert pair.t_block == 0
        np.testing.assert_allclose(pair.cross, 0)

    @pytest.mark.parametrize("axis,sign", [("x1", -1.0), ("y1", 1.0)])
    def test_cosine_examples(self, axis, sign):
        # continuum oracle: A = 1 - pi^2 c and B = -/+ pi^2 c at the crest
        c = 0.01
        errs = []
        for N in (32, 64, 128):
            d = dom1(N, 3)
            coord = d.coordinates()[axis]
            f = GridField(d, np.broadcast_to(c * np.cos(2 * np.pi * coord), d.shape))
            pair = complex_hessian(f, (1, 0, 0))
            errs.append(max(abs(pair.A[0, 0] - (1 - np.pi**2 * c)), abs(pair.B[0, 0] - sign * np.pi**2 * c)))
        orders = observed_orders(errs)
        assert np.all((orders > 1.8) & (orders < 2.2))
        assert errs[-1] < 3e-5

    def test_mixed_field_refinement_order(self):
        # phi = sin(2 pi x) cos(2 pi y) + t^2 x-coupling; all complex entries at order h^2
        def field(N):
            d = dom1(N, N - 1, Ny=N)
            c = d.coordinates()
            u = np.sin(2 * np.pi * c["x1"]) * np.cos(2 * np.pi * c["y1"]) * (1 + c["t"] ** 2)
            return d, GridField(d, np.broadcast_to(u, d.shape))

        k = 2 * np.pi
        errs = []
        for N in (16, 32, 64):
            d, f = field(N)
            it, ix, iy = N // 2 - 1, N // 8, N // 16
            t, x, y = d.t[it], ix / N, iy / N
            s = 1 + t**2
            uxx = -(k**2) * np.sin(k * x) * np.cos(k * y) * s
            uyy = uxx
            uxy = -(k**2) * np.cos(k * x) * np.sin(k * y) * s
            utx = 2 * t * k * np.cos(k * x) * np.cos(k * y)
            uty = -2 * t * k * np.sin(k * x) * np.sin(k * y)
            A = 1 + 0.25 * (uxx + uyy)
            B = 0.25 * (uxx - uyy - 2j * uxy)
            cross = 0.25 * (utx + 1j * uty)
            pair = complex_hessian(f, (it, ix, iy))
            errs.append(max(abs(pair.A[0, 0] - A), abs(pair.B[0, 0] - B), abs(pair.cross[0] - cross), abs(pair.t_block - 2 * np.sin(k * x) * np.cos(k * y))))
        orders = observed_orders(errs)
        assert np.all((orders > 1.8) & (orders < 2.2)), orders

    @settings(max_examples=25)
    @given(seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 10.0))
    def test_hermitian_and_symmetric(self, seed, scale):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        b = X @ X.conj().T + np.eye(2)
        d = dom2(8, 2, b=b)
        f = GridField(d, scale * rng.normal(size=d.shape))
        pt = (1 + int(rng.integers(0, 2)),) + tuple(int(i) for i in rng.integers(0, 8, size=4))
        pair = complex_hessian(f, pt)
        assert np.abs(pair.A - pair.A.conj().T).max() <= 1e-13 * np.abs(pair.A).max()
        assert np.abs(pair.B - pair.B.T).max() <= 1e-13 * max(np.abs(pair.B).max(), 1e-300)

    def test_complex_parts_batched(self, rng):
        H = rng.normal(size=(3, 4, 5, 5))
        H = H + np.swapaxes(H, -1, -2)
        A, B, tt, cross = complex_parts(H, 2, np.eye(2))
        assert A.shape == (3, 4, 2, 2) and cross.shape == (3, 4, 2)
        A1, B1, _, _ = complex_parts(H[1, 2], 2, np.eye(2))
        np.testing.assert_allclose(A[1, 2], A1)
        np.testing.assert_allclose(B[1, 2], B1)


class TestPotentials:
    def test_zero_amplitude(self):
        d = dom1(8, 3)
        assert np.all(sample_potential("cosine_x", [0.0], d).values == 0)

    def test_constant(self):
        d = dom1(8, 3)
        assert np.all(sample_potential("constant", [0.3], d).values == 0.3)

    def test_cosine_x_modulus_half(self):
        from hcma.convexity import modulus_field

        d = dom1(64, 3, y_invariant=True)
        c = 1 / (4 * np.pi**2)
        f = sample_potential("cosine_x", [c], d)
        A, B, _, _ = complex_parts(spatial_hessian_field(f), 1, d.metric_b)
        mod = modulus_field(A, B, np.zeros((1, 1)), d.metric_b)
        # discrete crest value: second difference of cos is (2 cos(2 pi h) - 2)/h^2
        lam = 0.25 * c * (2 * np.cos(2 * np.pi / 64) - 2) * 64**2
        assert mod.min() == pytest.approx(1 + 2 * lam, abs=1e-9)
        assert mod.min() == pytest.approx(0.5, abs=2e-3)

    def test_cosine_mix_n2(self):
        d = dom2(8, 3)
        f = sample_potential("cosine_mix", [0.01, 0.02, 0.005], d)
        pair = complex_hessian(f, (1, 1, 2, 3, 5))
        assert np.abs(pair.A - np.diag(np.diag(pair.A))).max() > 1e-6
        assert np.abs(pair.B - np.diag(np.diag(pair.B))).max() > 1e-6
        np.testing.assert_allclose(pair.A, pair.A.conj().T, atol=1e-15)
        np.testing.assert_allclose(pair.B, pair.B.T, atol=1e-15)

    def test_cosine_y_needs_y(self):
        with pytest.raises(ValueError):
            sample_potential("cosine_y", [0.1], dom1(8, 3, y_invariant=True))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            sample_potential("gaussian", [0.1], dom1(8, 3))

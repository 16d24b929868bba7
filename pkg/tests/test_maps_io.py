import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from arakelian import io
from arakelian.cauchy_green import ScalarField
from arakelian.maps import FunctionMap, RationalMap, SampledMap, cr_residual, stencil_jump
from arakelian.planar_sets import Disc, GridSpec, RasterSet, SetDescriptor, disc_raster, rasterize
from arakelian.target_cp1 import dist_cp1, exp_sl2, from_chart, to_chart
from oracles import mobius

cplx = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


class TestRationalMap:
    def test_identity_and_constant(self):
        z = np.array([0, 1 + 1j, -3])
        assert np.allclose(RationalMap.identity().chart(z), z)
        c = RationalMap.constant(from_chart(2j))
        assert np.allclose(c.chart(z), 2j)
        assert c.degree == 0

    def test_zero_zero(self):
        with pytest.raises(ValueError, match="both vanish"):
            RationalMap(np.zeros(2), np.zeros(3))

    def test_poles_zeros(self):
        # (z - 1)(z + 2) / ((z - 3) z)
        R = RationalMap(np.array([-2, 1, 1]), np.array([0, -3, 1]))
        assert np.allclose(np.sort_complex(R.zeros()), [-2, 1])
        assert np.allclose(np.sort_complex(R.poles()), [0, 3])
        assert np.isinf(R.chart(np.array([3.0]))[0])

    @given(cplx, st.tuples(cplx, cplx, cplx))
    def test_compose_mobius(self, z, t):
        A = exp_sl2(np.array(t) / max(1, np.linalg.norm(t)))
        R = RationalMap(np.array([1, 2, 0.5]), np.array([0.3, 1]))
        u = R.chart(np.array([z]))[0]
        w = mobius(A, u)
        if not np.isfinite(w) or abs(w) > 1e8 or abs(u) > 1e8:
            return
        assert dist_cp1(R.compose_mobius(A).hom(np.array([z]))[0], from_chart(w)) < 1e-9

    def test_preimages(self):
        R = RationalMap(np.array([0, 0, 1]), np.array([1]))  # z^2
        pre = R.preimages(from_chart(4.0))
        assert np.allclose(np.sort_complex(pre), [-2, 2])

    def test_cancel_common_roots(self):
        # (z - 1)(z + 1) / ((z - 1)(z - 3))
        R = RationalMap(np.array([-1, 0, 1]), np.array([3, -4, 1]))
        assert R.common_root_gap() < 1e-12
        Rc = R.cancel_common_roots()
        assert Rc.degree == 1
        z = np.array([0.3, -2j])
        assert dist_cp1(Rc.hom(z), R.hom(z)).max() < 1e-12

    def test_common_root_value(self):
        # at the cancelled point the limit value is used
        R = RationalMap(np.array([-1, 0, 1]), np.array([3, -4, 1]))
        assert dist_cp1(R.hom(np.array([1.0])), from_chart(2 / -2)) < 1e-6

    def test_without_doublets(self):
        # z (z - 0.5) / (z - 0.5001)
        R = RationalMap(np.array([0, -0.5, 1]), np.array([-0.5001, 1]))
        R2, n = R.without_doublets(0.01)
        assert n == 1 and R2.degree == 1
        assert R.without_doublets(1e-6)[1] == 0

    def test_text_roundtrip(self, tmp_path):
        R = RationalMap(np.array([1 + 2j, -0.1, 1e-7j]), np.array([3, 1 / 3]), scale=2.5)
        p = io.write_rational(tmp_path / "r.txt", R)
        back = io.read_rational(p)
        z = np.array([0.1, 2 + 1j, -3j])
        assert np.array_equal(back.hom(z), RationalMap(*R.z_coefficients()).hom(z))
        assert dist_cp1(back.hom(z), R.hom(z)).max() < 1e-14

    @pytest.mark.parametrize("text", ["num: 1,0\n", "num: 1\nden: 1\nfoo: 2\n"])
    def test_text_errors(self, text):
        with pytest.raises(ValueError):
            RationalMap.from_text(text)


class TestSampled:
    def test_on_grid_exact(self):
        g = GridSpec(1.0, 0.1)
        R = RationalMap.identity()
        S = SampledMap(g, R.on_grid(g))
        D = disc_raster(Disc(0, 0.5), g)
        assert np.array_equal(S.on(D), R.on(D))

    def test_interpolation(self):
        g = GridSpec(1.0, 0.05)
        f = FunctionMap(lambda z: from_chart(0.5 * z))
        S = SampledMap(g, f.on_grid(g))
        z = np.array([0.123 + 0.321j, -0.4 + 0.01j])
        assert dist_cp1(S.hom(z), f.hom(z)).max() < 1e-3

    def test_shape(self):
        with pytest.raises(ValueError, match="one value per grid cell"):
            SampledMap(GridSpec(1.0, 0.1), np.ones((3, 3, 2)))


class TestCR:
    def test_holomorphic_small(self):
        g = GridSpec(2.0, 0.05)
        # centered differences are exact on u = z inside the chart-0 disc
        r, skipped = cr_residual(RationalMap.identity().on_grid(g), g, disc_raster(Disc(0, 0.9), g))
        assert r < 1e-12 and skipped == 0
        D = disc_raster(Disc(0, 1.5), g)
        for f in (RationalMap.identity(), FunctionMap(lambda z: from_chart(np.exp(z)))):
            assert cr_residual(f.on_grid(g), g, D)[0] < 0.01

    def test_antiholomorphic_large(self):
        g = GridSpec(2.0, 0.05)
        D = disc_raster(Disc(0, 1.0), g)
        r, _ = cr_residual(FunctionMap(lambda z: from_chart(np.conj(z))).on_grid(g), g, D)
        assert r > 0.2

    def test_jump_mask(self):
        g = GridSpec(2.0, 0.05)
        D = disc_raster(Disc(0, 1.5), g)
        # a pole-zero pair inside one cell spacing swings the value across the sphere
        V = RationalMap(np.array([-0.01, 1]), np.array([0.012, 1])).on_grid(g)
        J = stencil_jump(V)
        assert np.isnan(J[0, 0]) and np.nanmax(J) > 0.1
        r_all, s0 = cr_residual(V, g, D)
        r_cut, s1 = cr_residual(V, g, D, max_jump=0.1)
        assert s0 == 0 and s1 > 0 and r_cut <= r_all


class TestPGM:
    def test_mask_roundtrip(self, tmp_path):
        g = GridSpec(2.0, 0.1)
        S = rasterize(SetDescriptor.parse(["hstrip 0.5 0.3", "disc 1 -1 0.5"]), g)
        p = io.write_pgm(tmp_path / "s.pgm", S.mask)
        img = io.read_pgm(p)
        assert np.array_equal(img == 255, S.mask)
        raw = p.read_bytes()
        assert raw.startswith(b"P5\n")
        # top image row is the top of the window
        assert np.array_equal(np.frombuffer(raw[-g.n:], np.uint8) == 255, S.mask[0])

    def test_scaled(self, tmp_path):
        a = np.array([[0.0, 1.0], [np.nan, 0.5]])
        img = io.read_pgm(io.write_pgm(tmp_path / "a.pgm", a))
        assert img[0, 0] == 1 and img[0, 1] == 255 and img[1, 0] == 0 and img[1, 1] == 128
        img = io.read_pgm(io.write_pgm(tmp_path / "b.pgm", np.array([[1e-3, 1e-1]]), log=True))
        assert list(img[0]) == [1, 255]

    def test_not_pgm(self, tmp_path):
        p = tmp_path / "x.pgm"
        p.write_bytes(b"P2\n1 1\n255\n0\n")
        with pytest.raises(ValueError, match="binary PGM"):
            io.read_pgm(p)


class TestCSV:
    def test_fmt(self):
        assert io.fmt(True) == "true" and io.fmt(np.int64(3)) == "3"
        assert float(io.fmt(0.1)) == 0.1 and io.fmt("x") == "x"

    def test_field_roundtrip(self, tmp_path):
        g = GridSpec(1.0, 0.1)
        D = disc_raster(Disc(0.2, 0.5), g)
        f = ScalarField.from_function(D, lambda z: z * z - 1j / 3)
        back = io.read_field(io.write_field(tmp_path / "f.csv", f), g)
        assert back.support == D and np.array_equal(back.values, f.values)

    def test_grid_field(self, tmp_path):
        g = GridSpec(1.0, 0.1)
        V = g.points * 2
        p = io.write_grid_field(tmp_path / "v.csv", V, g)
        h, rows = io.read_csv(p)
        assert h == ["x", "y", "re", "im"] and len(rows) == g.n ** 2

    @pytest.mark.parametrize("body,msg", [
        ("a,b,c,d\n", "expected columns"),
        ("x,y,re,im\n", "no data"),
        ("x,y,re,im\n5,0,1,0\n", "outside the window"),
        ("x,y,re,im\n0.01,0.05,1,0\n", "not cell centres"),
        ("x,y,re,im\n0.05,0.05,1,0\n0.05,0.05,2,0\n", "duplicate"),
    ])
    def test_field_errors(self, tmp_path, body, msg):
        p = tmp_path / "bad.csv"
        p.write_text(body)
        with pytest.raises(ValueError, match=msg):
            io.read_field(p, GridSpec(1.0, 0.1))

    def test_components(self, tmp_path):
        S = rasterize(SetDescriptor.parse(["annulus 0 0 0.4 0.8"]), GridSpec(1.0, 0.05))
        h, rows = io.read_csv(io.write_components(tmp_path / "c.csv", S))
        assert h == ["component_id", "area_cells", "touches_boundary"]
        assert sorted(r[2] for r in rows) == ["false", "true"]

    def test_empty_csv(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("")
        with pytest.raises(ValueError, match="empty"):
            io.read_csv(p)


def test_chart_helpers_consistent():
    u = np.array([0.5, np.inf])
    assert np.isinf(to_chart(from_chart(u))[1])
    assert RasterSet  # re-exported type used by io signatures

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fplap.mesh import (
    build_mesh,
    grid_function,
    linf_norm,
    load_grid_function,
    lp_norm,
    save_grid_function,
)


def test_build_mesh_unit_interval():
    m = build_mesh(0.0, 1.0, 4)
    assert m.h == 0.25
    np.testing.assert_array_equal(m.centers, [0.125, 0.375, 0.625, 0.875])


def test_build_mesh_symmetric():
    m = build_mesh(-1.0, 1.0, 2)
    assert m.h == 1.0
    np.testing.assert_array_equal(m.centers, [-0.5, 0.5])


def test_build_mesh_edges_hit_endpoints():
    m = build_mesh(-3.0, 7.0, 10)
    assert m.centers[0] - m.h / 2 == pytest.approx(m.a, abs=1e-15)
    assert m.centers[-1] + m.h / 2 == pytest.approx(m.b, abs=1e-15)
    assert np.all(np.diff(m.centers) > 0)


@pytest.mark.parametrize(
    "a,b,n",
    [(0.0, 1.0, 1), (1.0, 0.0, 4), (0.0, 0.0, 4), (np.inf, 1.0, 4), (0.0, np.nan, 4)],
)
def test_build_mesh_rejects_bad_input(a, b, n):
    with pytest.raises(ValueError):
        build_mesh(a, b, n)


def test_grid_function_validation():
    m = build_mesh(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        grid_function(m, [1.0, 2.0])
    with pytest.raises(ValueError):
        grid_function(m, [1.0, np.nan, 0.0, 0.0])


def test_lp_norm_zero_and_constant():
    m = build_mesh(0.0, 1.0, 7)
    assert lp_norm(grid_function(m, np.zeros(7)), 2.0) == 0.0
    assert lp_norm(grid_function(m, np.ones(7)), 2.0) == pytest.approx(1.0, rel=1e-15)


def test_lp_norm_two_cells():
    m = build_mesh(-1.0, 1.0, 2)
    u = grid_function(m, [1.0, -1.0])
    assert lp_norm(u, 3.0) == pytest.approx(2.0 ** (1.0 / 3.0), rel=1e-15)


def test_lp_norm_rejects_small_nu():
    m = build_mesh(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        lp_norm(grid_function(m, np.ones(4)), 0.5)


def test_linf_norm_values():
    m = build_mesh(0.0, 1.0, 3)
    assert linf_norm(grid_function(m, [1.0, -3.0, 2.0])) == 3.0
    assert linf_norm(grid_function(m, np.zeros(3))) == 0.0


@given(
    c=st.floats(-1e6, 1e6, allow_nan=False),
    vals=st.lists(st.floats(-1e3, 1e3, width=32), min_size=2, max_size=24),
)
@settings(deadline=None, max_examples=60)
def test_linf_homogeneity(c, vals):
    m = build_mesh(0.0, 1.0, len(vals))
    u = grid_function(m, vals)
    cu = grid_function(m, c * u.values)
    assert linf_norm(cu) == pytest.approx(abs(c) * linf_norm(u), rel=1e-12, abs=1e-300)


@given(
    nu=st.floats(1.0, 8.0),
    vals=st.lists(st.floats(-100.0, 100.0, width=32), min_size=2, max_size=24),
)
@settings(deadline=None, max_examples=60)
def test_discrete_hoelder(nu, vals):
    m = build_mesh(-2.0, 3.0, len(vals))
    u = grid_function(m, vals)
    bound = (m.b - m.a) ** (1.0 / nu) * linf_norm(u)
    assert lp_norm(u, nu) <= bound * (1.0 + 1e-12) + 1e-300


@pytest.mark.parametrize("nu", [1.0, 2.0, 3.5])
def test_lp_norm_refinement_convergence(nu):
    # smooth profile sampled on n, 2n, 4n: successive norm gaps shrink
    vals = []
    for n in (32, 64, 128, 256):
        m = build_mesh(0.0, 1.0, n)
        u = grid_function(m, np.exp(m.centers) + 0.3 * np.sin(2.3 * m.centers))
        vals.append(lp_norm(u, nu))
    gaps = np.abs(np.diff(vals))
    assert gaps[1] < gaps[0] and gaps[2] < gaps[1]


def test_csv_roundtrip(tmp_path, rng):
    m = build_mesh(-1.5, 2.5, 9)
    u = grid_function(m, rng.normal(size=9))
    path = tmp_path / "u.csv"
    save_grid_function(u, path)
    text = path.read_text()
    assert text.splitlines()[0] == "x,u"
    assert len(text.splitlines()) == 10
    back = load_grid_function(m, path)
    np.testing.assert_array_equal(back.values, u.values)


def test_csv_rejects_wrong_mesh(tmp_path, rng):
    m = build_mesh(0.0, 1.0, 8)
    u = grid_function(m, rng.normal(size=8))
    path = tmp_path / "u.csv"
    save_grid_function(u, path)
    other = build_mesh(0.0, 2.0, 8)
    with pytest.raises(ValueError):
        load_grid_function(other, path)

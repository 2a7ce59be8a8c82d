import math

import numpy as np
import pytest

from fplap.kernel import FracParams, apply_A, assemble_kernel, pairing, seminorm_p
from fplap.mesh import build_mesh, grid_function

from oracles import (
    exterior_weight_quad,
    pair_weight_dblquad,
    pair_weight_quad,
)


def random_gf(mesh, rng, scale=1.0):
    return grid_function(mesh, scale * rng.normal(size=mesh.n))


@pytest.mark.parametrize(
    "s,p",
    [(0.3, 2.0), (0.45, 2.0), (0.3, 2.5), (0.7, 2.0), (0.5, 2.0), (0.7, 3.0)],
)
def test_symmetry_and_zero_diagonal(s, p):
    k = assemble_kernel(build_mesh(-1.0, 1.0, 12), FracParams(s, p))
    assert np.max(np.abs(k.K - k.K.T)) == 0.0
    assert np.all(np.diag(k.K) == 0.0)
    assert np.all(k.K + np.eye(12) > 0.0)
    assert np.all(k.E > 0.0)
    assert np.all(np.isfinite(k.K)) and np.all(np.isfinite(k.E))


def test_fracparams_validation():
    with pytest.raises(ValueError):
        FracParams(0.0, 2.0)
    with pytest.raises(ValueError):
        FracParams(1.0, 2.0)
    with pytest.raises(ValueError):
        FracParams(0.5, 1.0)
    assert FracParams(0.4, 2.0).p_star == pytest.approx(10.0)
    assert FracParams(0.5, 2.0).p_star == math.inf
    assert FracParams(0.7, 3.0).p_star == math.inf


@pytest.mark.parametrize("s,p", [(0.3, 2.0), (0.45, 2.0), (0.3, 2.5)])
def test_pair_weights_match_quadrature_subcritical(s, p):
    # sp < 1: every pair integral converges; closed form must match 1e-8
    mesh = build_mesh(0.0, 1.0, 16)
    k = assemble_kernel(mesh, FracParams(s, p))
    sp = s * p
    for i in range(mesh.n):
        for j in range(i + 1, mesh.n):
            d = (j - i) * mesh.h
            ref = pair_weight_quad(d, mesh.h, sp)
            assert k.K[i, j] == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("s,p", [(0.3, 2.0), (0.45, 2.0), (0.3, 2.5)])
def test_exterior_weights_match_quadrature_subcritical(s, p):
    mesh = build_mesh(0.0, 1.0, 16)
    k = assemble_kernel(mesh, FracParams(s, p))
    sp = s * p
    for i in range(mesh.n):
        ref = exterior_weight_quad(mesh.centers[i], mesh.a, mesh.b, mesh.h, sp)
        assert k.E[i] == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("s,p", [(0.5, 2.0), (0.75, 2.0)])
def test_weights_match_quadrature_where_integrals_exist(s, p):
    # sp >= 1: touching-pair and wall-cell integrals diverge; the rest are
    # exact and must still match the oracle
    mesh = build_mesh(0.0, 1.0, 16)
    k = assemble_kernel(mesh, FracParams(s, p))
    sp = s * p
    for i in range(mesh.n):
        for j in range(i + 2, mesh.n):
            d = (j - i) * mesh.h
            ref = pair_weight_quad(d, mesh.h, sp)
            assert k.K[i, j] == pytest.approx(ref, rel=1e-8)
    for i in range(1, mesh.n - 1):
        ref = exterior_weight_quad(mesh.centers[i], mesh.a, mesh.b, mesh.h, sp)
        assert k.E[i] == pytest.approx(ref, rel=1e-8)


def test_hat_reduction_against_raw_dblquad():
    # validates the oracle's own 1-D reduction on a few well-separated pairs
    mesh = build_mesh(0.0, 1.0, 8)
    sp = 0.9
    for i, j in [(0, 2), (1, 5), (3, 7)]:
        d = (j - i) * mesh.h
        a = pair_weight_quad(d, mesh.h, sp)
        b = pair_weight_dblquad(mesh.centers[i], mesh.centers[j], mesh.h, sp)
        assert a == pytest.approx(b, rel=1e-9)


def test_kernel_offset_monotonicity():
    for s, p in [(0.3, 2.0), (0.5, 2.0), (0.7, 3.0)]:
        k = assemble_kernel(build_mesh(0.0, 1.0, 32), FracParams(s, p))
        first_row = k.K[0, 1:]
        assert np.all(np.diff(first_row) < 0.0)


def test_exterior_reflection_symmetry():
    for s, p in [(0.35, 2.0), (0.5, 2.0), (0.8, 2.5)]:
        k = assemble_kernel(build_mesh(-2.0, 5.0, 21), FracParams(s, p))
        np.testing.assert_array_equal(k.E, k.E[::-1])


def test_dilation_of_weights():
    # (0,1,8) vs (0,2,8) at sp = 0.8: every weight scales by 2^0.2
    pa = FracParams(0.4, 2.0)
    k1 = assemble_kernel(build_mesh(0.0, 1.0, 8), pa)
    k2 = assemble_kernel(build_mesh(0.0, 2.0, 8), pa)
    ratio = 2.0 ** (1.0 - pa.sp)
    np.testing.assert_allclose(k2.K + np.eye(8), ratio * k1.K + np.eye(8), rtol=1e-14)
    np.testing.assert_allclose(k2.E, ratio * k1.E, rtol=1e-14)


def test_dilation_of_seminorm(rng):
    pa = FracParams(0.6, 2.5)
    m1 = build_mesh(-1.0, 1.0, 24)
    m2 = build_mesh(-3.0, 3.0, 24)
    k1, k2 = assemble_kernel(m1, pa), assemble_kernel(m2, pa)
    vals = rng.normal(size=24)
    s1 = seminorm_p(k1, grid_function(m1, vals))
    s2 = seminorm_p(k2, grid_function(m2, vals))
    assert s2 == pytest.approx(3.0 ** (1.0 - pa.sp) * s1, rel=1e-12)


def test_seminorm_zero_and_positivity(rng):
    mesh = build_mesh(0.0, 1.0, 16)
    k = assemble_kernel(mesh, FracParams(0.5, 2.0))
    assert seminorm_p(k, grid_function(mesh, np.zeros(16))) == 0.0
    for _ in range(5):
        u = random_gf(mesh, rng)
        assert seminorm_p(k, u) > 0.0


def test_seminorm_p_homogeneity(rng):
    mesh = build_mesh(-1.0, 1.0, 20)
    for p in (2.0, 2.5, 3.0):
        k = assemble_kernel(mesh, FracParams(0.4, p))
        u = random_gf(mesh, rng)
        u2 = grid_function(mesh, 2.0 * u.values)
        assert seminorm_p(k, u2) == pytest.approx(2.0**p * seminorm_p(k, u), rel=1e-12)


def test_constant_function_seminorm_is_exterior_only():
    mesh = build_mesh(0.0, 1.0, 16)
    k = assemble_kernel(mesh, FracParams(0.35, 2.0))
    u = grid_function(mesh, np.ones(16))
    expected = 2.0 * float(np.sum(k.E))
    assert seminorm_p(k, u) == pytest.approx(expected, rel=1e-13)
    # cross-check against the quadrature oracle for the whole exterior term
    ref = sum(
        exterior_weight_quad(x, mesh.a, mesh.b, mesh.h, k.params.sp)
        for x in mesh.centers
    )
    assert seminorm_p(k, u) == pytest.approx(2.0 * ref, rel=1e-8)


def test_apply_A_zero():
    mesh = build_mesh(0.0, 1.0, 10)
    k = assemble_kernel(mesh, FracParams(0.5, 2.5))
    w = apply_A(k, grid_function(mesh, np.zeros(10)))
    np.testing.assert_array_equal(w.values, np.zeros(10))


@pytest.mark.parametrize("p", [2.0, 2.5, 3.0])
def test_operator_energy_identity(p, rng):
    mesh = build_mesh(-1.0, 1.0, 32)
    k = assemble_kernel(mesh, FracParams(0.5, p))
    for _ in range(100):
        u = random_gf(mesh, rng)
        lhs = float(np.dot(apply_A(k, u).values, u.values))
        assert lhs == pytest.approx(seminorm_p(k, u), rel=1e-12)


@pytest.mark.parametrize("p", [2.0, 2.5, 3.0])
def test_apply_A_homogeneity(p, rng):
    mesh = build_mesh(0.0, 2.0, 16)
    k = assemble_kernel(mesh, FracParams(0.45, p))
    u = random_gf(mesh, rng)
    for t in (0.5, 3.0):
        lhs = apply_A(k, grid_function(mesh, t * u.values)).values
        rhs = t ** (p - 1.0) * apply_A(k, u).values
        np.testing.assert_allclose(lhs, rhs, rtol=1e-11, atol=1e-13)


def test_pairing_matches_apply_A(rng):
    mesh = build_mesh(-1.0, 1.0, 18)
    for p in (2.0, 2.7):
        k = assemble_kernel(mesh, FracParams(0.55, p))
        u, v = random_gf(mesh, rng), random_gf(mesh, rng)
        assert pairing(k, u, v) == pytest.approx(
            float(np.dot(apply_A(k, u).values, v.values)), rel=1e-11
        )
        assert pairing(k, u, u) == pytest.approx(seminorm_p(k, u), rel=1e-12)
        zero = grid_function(mesh, np.zeros(mesh.n))
        assert pairing(k, zero, v) == 0.0


def test_pairing_hoelder_bound(rng):
    mesh = build_mesh(-1.0, 1.0, 16)
    for p in (2.0, 2.5, 3.0):
        k = assemble_kernel(mesh, FracParams(0.5, p))
        for _ in range(20):
            u, v = random_gf(mesh, rng), random_gf(mesh, rng)
            su, sv = seminorm_p(k, u), seminorm_p(k, v)
            bound = su ** ((p - 1.0) / p) * sv ** (1.0 / p)
            assert abs(pairing(k, u, v)) <= bound * (1.0 + 1e-10)


@pytest.mark.parametrize("p", [2.0, 2.5, 3.0])
def test_gradient_identity_finite_differences(p, rng):
    mesh = build_mesh(-1.0, 1.0, 12)
    k = assemble_kernel(mesh, FracParams(0.5, p))
    u = random_gf(mesh, rng)
    w = apply_A(k, u).values
    for i in range(mesh.n):
        eps = 1e-6 * (1.0 + abs(u.values[i]))
        up = u.values.copy()
        um = u.values.copy()
        up[i] += eps
        um[i] -= eps
        fd = (
            seminorm_p(k, grid_function(mesh, up)) / p
            - seminorm_p(k, grid_function(mesh, um)) / p
        ) / (2.0 * eps)
        assert fd == pytest.approx(w[i], rel=1e-5)


def test_operator_monotonicity(rng):
    mesh = build_mesh(0.0, 1.0, 14)
    for p in (2.0, 2.5, 3.0):
        k = assemble_kernel(mesh, FracParams(0.6, p))
        for _ in range(20):
            u, v = random_gf(mesh, rng), random_gf(mesh, rng)
            gap = float(
                np.dot(apply_A(k, u).values - apply_A(k, v).values, u.values - v.values)
            )
            assert gap > 0.0


def test_s_type_coercivity(rng):
    # tiny pairing gap forces tiny pointwise gap
    mesh = build_mesh(0.0, 1.0, 14)
    k = assemble_kernel(mesh, FracParams(0.5, 2.0))
    for _ in range(50):
        u = random_gf(mesh, rng)
        v = grid_function(mesh, u.values + 1e-9 * rng.normal(size=mesh.n))
        gap = float(
            np.dot(apply_A(k, u).values - apply_A(k, v).values, u.values - v.values)
        )
        if gap < 1e-14:
            assert np.max(np.abs(u.values - v.values)) < 1e-7


def test_mesh_mismatch_rejected(rng):
    m1 = build_mesh(0.0, 1.0, 8)
    m2 = build_mesh(0.0, 1.0, 10)
    k = assemble_kernel(m1, FracParams(0.5, 2.0))
    u = random_gf(m2, rng)
    with pytest.raises(ValueError):
        seminorm_p(k, u)
    with pytest.raises(ValueError):
        apply_A(k, u)

"""Independent oracles the test suite checks the package against.

Everything here deliberately avoids the package's own closed forms:
adaptive quadrature for the kernel weights, dense LAPACK eigensolvers for
the p = 2 spectrum, plain central differences for gradients.
"""

from __future__ import annotations

import numpy as np
import scipy.integrate as sint
import scipy.linalg as sla


def pair_weight_quad(d: float, h: float, sp: float) -> float:
    """Adaptive quadrature of the kernel over a cell pair at center distance d.

    Uses the exact geometric reduction of the double integral to a single
    hat-weighted integral over t = |x - y| in [d-h, d+h]; the reduction is
    validated separately against a raw 2-D quadrature.
    """

    def integrand(t):
        return (h - abs(t - d)) * t ** (-1.0 - sp)

    lo, hi = d - h, d + h
    if lo <= 0.0:
        # touching cells: integrable endpoint singularity only for sp < 1
        val, _ = sint.quad(integrand, 0.0, hi, limit=400)
    else:
        val, _ = sint.quad(integrand, lo, hi, points=[d], limit=400)
    return val


def pair_weight_dblquad(xi: float, xj: float, h: float, sp: float) -> float:
    """Raw 2-D quadrature of the kernel over two (non-touching) cells."""
    val, _ = sint.dblquad(
        lambda y, x: abs(x - y) ** (-1.0 - sp),
        xi - h / 2, xi + h / 2,
        lambda x: xj - h / 2, lambda x: xj + h / 2,
        epsabs=1e-13, epsrel=1e-11,
    )
    return val


def exterior_weight_quad(xi: float, a: float, b: float, h: float, sp: float) -> float:
    """Nested adaptive quadrature of the kernel over cell x exterior."""

    def inner(x):
        left, _ = sint.quad(lambda y: (x - y) ** (-1.0 - sp), -np.inf, a, limit=400)
        right, _ = sint.quad(lambda y: (y - x) ** (-1.0 - sp), b, np.inf, limit=400)
        return left + right

    val, _ = sint.quad(inner, xi - h / 2, xi + h / 2, limit=400)
    return val


def dense_p2_matrix(kernel) -> np.ndarray:
    """Stiffness matrix of the p = 2 quadratic form: u^T L u = seminorm_2(u)."""
    K, E = kernel.K, kernel.E
    return 2.0 * (np.diag(K.sum(axis=1) + E) - K)


def dense_p2_eigen(kernel, k: int = 2):
    """Smallest k eigenpairs of L u = lambda h u via LAPACK (p = 2 oracle)."""
    L = dense_p2_matrix(kernel)
    M = kernel.mesh.h * np.eye(kernel.mesh.n)
    w, V = sla.eigh(L, M)
    return w[:k], V[:, :k]


def fd_gradient(fun, x: np.ndarray, scale: float = 1e-6) -> np.ndarray:
    """Central finite differences with per-coordinate step scale*(1+|x_i|)."""
    g = np.empty_like(x)
    for i in range(x.size):
        eps = scale * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += eps
        xm[i] -= eps
        g[i] = (fun(xp) - fun(xm)) / (2.0 * eps)
    return g

"""Singular-kernel assembly and the nonlocal p-energy machinery.

The interaction weights are exact double integrals of the kernel
``|x - y|^(-1-sp)`` over cell pairs (and over cell x exterior strips),
evaluated in closed form through second antiderivatives.  Every weight
factors as ``h^(1-sp)`` times a function of integer cell offsets only, so
the dilation law ``K -> R^(1-sp) K`` under mesh scaling holds to machine
precision by construction.

For ``sp >= 1`` the exact integrals over touching geometry diverge (a
piecewise-constant jump is not admissible for the continuum energy there):
the affected entries — adjacent-cell pair weights and the one-sided exterior
pieces of the two boundary cells — fall back to midpoint quadrature of the
kernel at cell-center distance.  All remaining entries stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import GridFunction, Mesh

__all__ = [
    "FracParams",
    "NonlocalKernel",
    "assemble_kernel",
    "seminorm_p",
    "apply_A",
    "pairing",
    "operator_jacobian",
]

# sp this close to 1 is routed through the logarithmic branch; the power
# branch divides by (sp - 1) and loses all accuracy there.
_SP_LOG_SNAP = 1e-12


@dataclass(frozen=True)
class FracParams:
    """Fractional order s in (0,1) and integrability power p in (1,oo)."""

    s: float
    p: float

    def __post_init__(self):
        if not (0.0 < self.s < 1.0):
            raise ValueError(f"need 0 < s < 1, got s={self.s}")
        if not (1.0 < self.p < math.inf):
            raise ValueError(f"need 1 < p < inf, got p={self.p}")

    @property
    def sp(self) -> float:
        return self.s * self.p

    @property
    def p_star(self) -> float:
        """Critical exponent p/(1 - sp) for sp < 1, +inf otherwise."""
        return self.p / (1.0 - self.sp) if self.sp < 1.0 else math.inf


@dataclass(frozen=True)
class NonlocalKernel:
    """Precomputed pair weights K and exterior weights E for one mesh."""

    params: FracParams
    mesh: Mesh
    K: np.ndarray = field(repr=False)
    E: np.ndarray = field(repr=False)


def _pair_coefficients(n: int, sp: float) -> np.ndarray:
    """Pair weight per unit h^(1-sp) as a function of the offset m = |i-j|.

    Exact value: psi(m+1) - 2 psi(m) + psi(m-1) with psi the second
    antiderivative of r^(-1-sp) (power branch r^(1-sp)/(sp(sp-1)),
    logarithmic branch -ln r at sp = 1).  Returns index 0 unused (0.0).
    """
    m = np.arange(n, dtype=float)
    coeff = np.zeros(n)
    if n < 2:
        return coeff
    if abs(sp - 1.0) <= _SP_LOG_SNAP:
        mm = m[2:]
        coeff[2:] = np.log(mm * mm / (mm * mm - 1.0))
        coeff[1] = 1.0  # midpoint fallback: exact weight diverges at sp = 1
    else:
        denom = sp * (sp - 1.0)
        e = 1.0 - sp
        mm = m[2:]
        coeff[2:] = ((mm + 1.0) ** e - 2.0 * mm**e + (mm - 1.0) ** e) / denom
        if sp < 1.0:
            coeff[1] = (2.0**e - 2.0) / denom
        else:
            coeff[1] = 1.0  # midpoint fallback: exact weight diverges
    return coeff


def _exterior_coefficients(n: int, sp: float) -> np.ndarray:
    """One-sided exterior weight per unit h^(1-sp) for cell offset i from a wall.

    Exact value of the inner integral of the kernel over one exterior
    half-line, integrated over the cell: for the cell spanning
    [i*h, (i+1)*h] measured from the wall, this is
    ((i+1)^(1-sp) - i^(1-sp)) / (sp (1-sp)) (log branch at sp = 1).
    The i = 0 cell touches the wall; its integral diverges for sp >= 1 and
    falls back to the midpoint value (1/2)^(-sp) / sp.
    """
    i = np.arange(n, dtype=float)
    if abs(sp - 1.0) <= _SP_LOG_SNAP:
        out = np.empty(n)
        out[1:] = np.log((i[1:] + 1.0) / i[1:])
        out[0] = 2.0**sp / sp  # midpoint fallback
        return out
    e = 1.0 - sp
    out = np.empty(n)
    out[1:] = ((i[1:] + 1.0) ** e - i[1:] ** e) / (sp * e)
    if sp < 1.0:
        out[0] = 1.0 / (sp * e)
    else:
        out[0] = 2.0**sp / sp  # midpoint fallback
    return out


def assemble_kernel(mesh: Mesh, params: FracParams) -> NonlocalKernel:
    """Assemble the dense pair-weight matrix K and exterior weights E."""
    n = mesh.n
    sp = params.sp
    scale = mesh.h ** (1.0 - sp)

    coeff = _pair_coefficients(n, sp)
    idx = np.arange(n, dtype=np.int32)
    offsets = np.abs(idx[:, None] - idx[None, :])
    K = scale * coeff[offsets]

    ext = _exterior_coefficients(n, sp)
    E = scale * (ext + ext[::-1])

    if not (np.all(np.isfinite(K)) and np.all(np.isfinite(E))):
        raise FloatingPointError("kernel assembly produced non-finite weights")
    K.flags.writeable = False
    E.flags.writeable = False
    return NonlocalKernel(params=params, mesh=mesh, K=K, E=E)


def _check_mesh(kernel: NonlocalKernel, u: GridFunction) -> None:
    if u.mesh != kernel.mesh:
        raise ValueError("grid function lives on a different mesh than the kernel")


def _phi_p(t: np.ndarray, p: float) -> np.ndarray:
    """The odd power map |t|^(p-2) t."""
    if p == 2.0:
        return t
    if p == 3.0:
        return np.abs(t) * t
    return np.abs(t) ** (p - 2.0) * t


def seminorm_p(kernel: NonlocalKernel, u: GridFunction) -> float:
    """p-th power of the nonlocal energy norm of u (pair sum + exterior sum)."""
    _check_mesh(kernel, u)
    p = kernel.params.p
    v = u.values
    du = v[:, None] - v[None, :]
    pairs = float(np.sum(kernel.K * np.abs(du) ** p))
    ext = 2.0 * float(np.dot(kernel.E, np.abs(v) ** p))
    return pairs + ext


def apply_A(kernel: NonlocalKernel, u: GridFunction) -> GridFunction:
    """Gradient of u -> seminorm_p(u)/p; the discrete nonlocal operator."""
    _check_mesh(kernel, u)
    p = kernel.params.p
    v = u.values
    if p == 2.0:
        w = 2.0 * (kernel.K.sum(axis=1) * v - kernel.K @ v) + 2.0 * kernel.E * v
    else:
        du = v[:, None] - v[None, :]
        w = 2.0 * np.sum(kernel.K * _phi_p(du, p), axis=1) + 2.0 * kernel.E * _phi_p(v, p)
    return GridFunction(u.mesh, w)


def operator_jacobian(kernel: NonlocalKernel, v: np.ndarray) -> np.ndarray:
    """Dense derivative of apply_A at v (symmetric n x n matrix).

    Rows: dA_i/dv_j = -2 (p-1) K_ij |v_i - v_j|^(p-2) off the diagonal, plus
    the matching diagonal from the pair and exterior terms.  For p < 2 the
    kink at coinciding values is regularized to 0.
    """
    p = kernel.params.p
    n = v.size
    du = v[:, None] - v[None, :]
    if p == 2.0:
        W = np.ones_like(du)
    elif p > 2.0:
        W = np.abs(du) ** (p - 2.0)
    else:
        W = np.zeros_like(du)
        nz = du != 0.0
        W[nz] = np.abs(du[nz]) ** (p - 2.0)
    np.fill_diagonal(W, 0.0)
    KW = kernel.K * W
    if p == 2.0:
        ext = kernel.E.copy()
    else:
        ext = np.zeros(n)
        nz = v != 0.0
        ext[nz] = kernel.E[nz] * np.abs(v[nz]) ** (p - 2.0)
    J = -2.0 * (p - 1.0) * KW
    J[np.diag_indices(n)] += 2.0 * (p - 1.0) * (KW.sum(axis=1) + ext)
    return J


def pairing(kernel: NonlocalKernel, u: GridFunction, v: GridFunction) -> float:
    """Bilinear action <A(u), v>, computed from the double sum directly."""
    _check_mesh(kernel, u)
    _check_mesh(kernel, v)
    p = kernel.params.p
    uu, vv = u.values, v.values
    du = uu[:, None] - uu[None, :]
    dv = vv[:, None] - vv[None, :]
    pairs = float(np.sum(kernel.K * _phi_p(du, p) * dv))
    ext = 2.0 * float(np.dot(kernel.E, _phi_p(uu, p) * vv))
    return pairs + ext

"""Uniform cell-centered grids on an interval and discrete Lebesgue norms.

Functions live on the cells of a uniform partition of (a, b) and are
implicitly extended by zero outside the interval, so there are no boundary
nodes to constrain: the Dirichlet condition is built into the representation.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mesh",
    "GridFunction",
    "build_mesh",
    "lp_norm",
    "linf_norm",
    "grid_function",
    "save_grid_function",
    "load_grid_function",
]


@dataclass(frozen=True)
class Mesh:
    """Uniform cell-centered grid with n cells on (a, b)."""

    a: float
    b: float
    n: int
    h: float
    centers: np.ndarray = field(repr=False)

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (self.a, self.b, self.n) == (other.a, other.b, other.n)

    def __hash__(self):
        return hash((self.a, self.b, self.n))


@dataclass(frozen=True)
class GridFunction:
    """Cell values of a function on a Mesh, zero outside (a, b)."""

    mesh: Mesh
    values: np.ndarray = field(repr=False)

    def copy(self) -> "GridFunction":
        return GridFunction(self.mesh, self.values.copy())


def build_mesh(a: float, b: float, n: int) -> Mesh:
    """Build the uniform mesh with cells [a + i*h, a + (i+1)*h], h = (b-a)/n."""
    a = float(a)
    b = float(b)
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError(f"endpoints must be finite, got a={a}, b={b}")
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    n = int(n)
    if n < 2:
        raise ValueError(f"need at least 2 cells, got n={n}")
    h = (b - a) / n
    centers = a + (np.arange(n) + 0.5) * h
    centers.flags.writeable = False
    return Mesh(a=a, b=b, n=n, h=h, centers=centers)


def grid_function(mesh: Mesh, values) -> GridFunction:
    """Wrap values as a GridFunction on mesh, validating shape and finiteness."""
    v = np.asarray(values, dtype=float)
    if v.shape != (mesh.n,):
        raise ValueError(f"values must have shape ({mesh.n},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    v = v.copy()
    v.flags.writeable = False
    return GridFunction(mesh, v)


def lp_norm(u: GridFunction, nu: float) -> float:
    """Mass-lumped discrete L^nu norm, (h * sum |u_i|^nu)^(1/nu)."""
    if nu < 1:
        raise ValueError(f"need nu >= 1, got nu={nu}")
    return float((u.mesh.h * np.sum(np.abs(u.values) ** nu)) ** (1.0 / nu))


def linf_norm(u: GridFunction) -> float:
    """Discrete sup norm, max_i |u_i|."""
    return float(np.max(np.abs(u.values)))


def save_grid_function(u: GridFunction, path) -> None:
    """Write a GridFunction as CSV with header ``x,u``, 17 significant digits."""
    with open(path, "w", newline="\n") as fh:
        fh.write(_to_csv(u))


def _to_csv(u: GridFunction) -> str:
    buf = io.StringIO()
    buf.write("x,u\n")
    for x, v in zip(u.mesh.centers, u.values):
        buf.write(f"{x:.17g},{v:.17g}\n")
    return buf.getvalue()


def load_grid_function(mesh: Mesh, path) -> GridFunction:
    """Read a ``x,u`` CSV back onto mesh, checking the cell centers match."""
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    if data.ndim == 1:
        data = data[None, :]
    if data.shape != (mesh.n, 2):
        raise ValueError(
            f"CSV has {data.shape[0]} rows, expected {mesh.n} for this mesh"
        )
    x, v = data[:, 0], data[:, 1]
    if not np.allclose(x, mesh.centers, rtol=0, atol=1e-12 * max(1.0, abs(mesh.b - mesh.a))):
        raise ValueError("CSV cell centers do not match the mesh")
    return grid_function(mesh, v)

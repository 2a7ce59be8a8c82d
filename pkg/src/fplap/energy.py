"""The energy functional, its gradient, and the residual stopping proxy.

A critical point of the energy is a discrete weak solution: the gradient
pairs the nonlocal operator against nodal indicator test functions, which
span the whole piecewise-constant space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import NonlocalKernel, apply_A, seminorm_p
from .mesh import GridFunction, Mesh
from .reaction import Reaction, TruncateMinus, TruncatePlus, nemytskii_integral

__all__ = ["Problem", "phi", "grad_phi", "residual_norm", "dual_norm"]

_VARIANTS = ("full", "plus", "minus")


@dataclass(frozen=True)
class Problem:
    """A reaction-driven problem instance on one mesh/kernel pair.

    variant selects the plain energy or one of the truncated ones: those
    keep the full nonlocal term but read the reaction at +-u^+- only, so
    their critical points have one sign.
    """

    mesh: Mesh
    kernel: NonlocalKernel
    reaction: Reaction
    variant: str = "full"

    def __post_init__(self):
        if self.kernel.mesh != self.mesh:
            raise ValueError("kernel was assembled on a different mesh")
        if self.variant not in _VARIANTS:
            raise ValueError(f"variant must be one of {_VARIANTS}, got {self.variant!r}")

    @property
    def effective_reaction(self) -> Reaction:
        if self.variant == "plus":
            return TruncatePlus(self.reaction)
        if self.variant == "minus":
            return TruncateMinus(self.reaction)
        return self.reaction

    @property
    def p(self) -> float:
        return self.kernel.params.p


def phi(prob: Problem, u: GridFunction) -> float:
    """Energy value: seminorm_p(u)/p minus the reaction integral."""
    return seminorm_p(prob.kernel, u) / prob.p - nemytskii_integral(
        prob.effective_reaction, u
    )


def grad_phi(prob: Problem, u: GridFunction) -> GridFunction:
    """Gradient of phi; a zero is a discrete weak solution."""
    w = apply_A(prob.kernel, u).values - prob.mesh.h * prob.effective_reaction.f(u.values)
    return GridFunction(u.mesh, w)


def dual_norm(g: GridFunction, p: float) -> float:
    """Weighted ell^p' proxy for the dual norm: (sum |g_i|^p' / h^(p'-1))^(1/p')."""
    pp = p / (p - 1.0)
    return float((np.sum(np.abs(g.values) ** pp) / g.mesh.h ** (pp - 1.0)) ** (1.0 / pp))


def residual_norm(prob: Problem, u: GridFunction) -> float:
    """Dual-norm proxy of grad_phi(u); the solvers' stopping criterion."""
    return dual_norm(grad_phi(prob, u), prob.p)

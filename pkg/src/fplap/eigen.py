"""Nonlinear eigenpairs of the nonlocal operator.

The first eigenvalue is the constrained minimum of the Rayleigh quotient
R(u) = seminorm_p(u) / (h * sum |u_i|^p), found by projected normalized
descent from the positive constant.  The second is approximated by a
minimax over discrete paths joining the first eigenfunction to its
negation on the constraint set; the reported value is an upper-bound
approximation of the variational eigenvalue (exact in the p = 2 limit),
never ground truth for p != 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import dual_norm
from .kernel import NonlocalKernel, _phi_p, apply_A, operator_jacobian, seminorm_p
from .mesh import GridFunction, linf_norm, lp_norm

__all__ = [
    "EigenResult",
    "SpectralReport",
    "lambda1",
    "lambda2_approx",
    "check_spectral_properties",
]

_ARMIJO = 1e-4
_BACKTRACK = 0.5
_MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class EigenResult:
    """A converged (or flagged) eigenpair with its Rayleigh history."""

    lam: float
    eigenfunction: GridFunction
    iterations: int
    residual: float
    history: np.ndarray = field(repr=False)
    converged: bool = True


def _p_normalize(kernel: NonlocalKernel, v: np.ndarray) -> np.ndarray:
    h, p = kernel.mesh.h, kernel.params.p
    nrm = (h * np.sum(np.abs(v) ** p)) ** (1.0 / p)
    return v / nrm


class _RayleighState:
    """Rayleigh value, gradient and residual of one normalized iterate."""

    def __init__(self, kernel: NonlocalKernel, v: np.ndarray):
        self.kernel = kernel
        h, p = kernel.mesh.h, kernel.params.p
        self.v = v
        self.Av = apply_A(kernel, GridFunction(kernel.mesh, v)).values
        S = float(np.dot(self.Av, v))
        N = float(h * np.sum(np.abs(v) ** p))
        self.R = S / N
        self.mass_grad = h * _phi_p(v, p)
        self.grad = self.Av - self.R * self.mass_grad

    def residual(self) -> float:
        return dual_norm(
            GridFunction(self.kernel.mesh, self.grad), self.kernel.params.p
        )


def _rayleigh_descent_step(state: _RayleighState, tau: float):
    """One backtracked monotone descent step; returns (new_state, used_tau) or None."""
    kernel = state.kernel
    g = state.grad
    gnorm2 = float(np.dot(g, g))
    if gnorm2 == 0.0:
        return None
    for _ in range(_MAX_BACKTRACKS):
        trial = _p_normalize(kernel, state.v - tau * g)
        new = _RayleighState(kernel, trial)
        if new.R <= state.R - _ARMIJO * tau * gnorm2:
            return new, tau
        tau *= _BACKTRACK
    return None


def _bb_step(v_old, g_old, v_new, g_new, fallback: float) -> float:
    dv = v_new - v_old
    dg = g_new - g_old
    den = float(np.dot(dg, dg))
    if den <= 0.0:
        return fallback
    tau = abs(float(np.dot(dv, dg))) / den
    if not np.isfinite(tau) or tau <= 0.0:
        return fallback
    return tau


def lambda1(kernel: NonlocalKernel, tol: float = 1e-10, max_iter: int | None = None) -> EigenResult:
    """Minimize the Rayleigh quotient from the positive constant start."""
    if not tol > 0.0:
        raise ValueError(f"need tol > 0, got {tol}")
    n = kernel.mesh.n
    if max_iter is None:
        max_iter = 50 * n
    state = _RayleighState(kernel, _p_normalize(kernel, np.ones(n)))
    history = [state.R]
    tau = 1.0 / (1.0 + state.R)
    iterations = 0
    converged = False
    prev = None
    while iterations < max_iter:
        res = state.residual()
        if res < tol:
            converged = True
            break
        if len(history) > 30 and history[-30] - history[-1] < 1e-14 * abs(history[-1]):
            break  # Rayleigh value stagnated; hand over to the polish
        if prev is not None:
            tau = _bb_step(prev.v, prev.grad, state.v, state.grad, tau)
        stepped = _rayleigh_descent_step(state, tau)
        if stepped is None:
            break  # descent exhausted at machine precision
        prev = state
        state, tau = stepped
        history.append(state.R)
        iterations += 1

    v = state.v if np.sum(state.v) >= 0.0 else -state.v
    final = _RayleighState(kernel, v)
    if not converged:
        polished, _ = _eigen_newton_polish(kernel, v, final.R, tol)
        pol = _RayleighState(kernel, polished)
        # keep the polish only if it sharpens the same (constant-sign) eigenpair
        if (
            pol.residual() < final.residual()
            and pol.R <= final.R * (1.0 + 1e-12)
            and (np.min(pol.v) >= 0.0 or np.max(pol.v) <= 0.0)
        ):
            final = pol if np.sum(pol.v) >= 0.0 else _RayleighState(kernel, -pol.v)
    res = final.residual()
    return EigenResult(
        lam=final.R,
        eigenfunction=GridFunction(kernel.mesh, final.v),
        iterations=iterations,
        residual=res,
        history=np.asarray(history),
        converged=converged or res < tol,
    )


def _eigen_newton_polish(kernel: NonlocalKernel, v: np.ndarray, lam: float,
                         tol: float, max_iter: int = 40):
    """Damped Newton on the eigenpair system A(u) = lam h |u|^(p-2) u, N(u) = 1."""
    h, p = kernel.mesh.h, kernel.params.p
    n = v.size

    def residual_vec(v, lam):
        Av = apply_A(kernel, GridFunction(kernel.mesh, v)).values
        return Av - lam * h * _phi_p(v, p)

    def res_norm(v, lam):
        r = residual_vec(v, lam)
        c = h * np.sum(np.abs(v) ** p) - 1.0
        return float(np.sqrt(np.dot(r, r) + c * c))

    v = _p_normalize(kernel, v.copy())
    best = res_norm(v, lam)
    for _ in range(max_iter):
        if best < tol * 1e-3:
            break
        Aprime = operator_jacobian(kernel, v)
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = Aprime - lam * h * (p - 1.0) * np.diag(np.abs(v) ** (p - 2.0))
        J[:n, n] = -h * _phi_p(v, p)
        J[n, :n] = p * h * _phi_p(v, p)
        rhs = np.empty(n + 1)
        rhs[:n] = -residual_vec(v, lam)
        rhs[n] = -(h * np.sum(np.abs(v) ** p) - 1.0)
        try:
            delta = np.linalg.solve(J, rhs)
        except np.linalg.LinAlgError:
            break
        step = 1.0
        improved = False
        for _ in range(30):
            v_try = v + step * delta[:n]
            lam_try = lam + step * delta[n]
            r_try = res_norm(v_try, lam_try)
            if r_try < best:
                v, lam, best = v_try, lam_try, r_try
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return _p_normalize(kernel, v), best


def _redistribute(path: np.ndarray, kernel: NonlocalKernel) -> np.ndarray:
    """Resample the node chain to uniform chord length, then renormalize."""
    m = path.shape[0]
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    if arc[-1] == 0.0:
        return path
    targets = np.linspace(0.0, arc[-1], m)
    out = np.empty_like(path)
    out[0], out[-1] = path[0], path[-1]
    for k in range(1, m - 1):
        j = np.searchsorted(arc, targets[k]) - 1
        j = min(max(j, 0), m - 2)
        w = (targets[k] - arc[j]) / (arc[j + 1] - arc[j]) if arc[j + 1] > arc[j] else 0.0
        out[k] = _p_normalize(kernel, (1.0 - w) * path[j] + w * path[j + 1])
    return out


def lambda2_approx(
    kernel: NonlocalKernel,
    tol: float = 1e-8,
    max_iter: int | None = None,
    path_points: int = 33,
) -> EigenResult:
    """Path-minimax upper bound for the second variational eigenvalue.

    Deforms a discrete path joining phi_1 to -phi_1 on the constraint set by
    descent on the maximal-Rayleigh node (ties broken at the lowest index),
    with chord redistribution to keep the path connected; the converged max
    node is polished by a damped Newton eigenpair solve.
    """
    if path_points < 3:
        raise ValueError(f"need path_points >= 3, got {path_points}")
    n = kernel.mesh.n
    if max_iter is None:
        max_iter = min(50 * n, 60 * path_points)
    first = lambda1(kernel, tol=min(tol, 1e-10))
    phi1 = first.eigenfunction.values

    # sign-flipped seed: phi_1 twisted across the midline, p-normalized
    signs = np.where(np.arange(n) < n / 2.0, 1.0, -1.0)
    w = _p_normalize(kernel, phi1 * signs)

    m = path_points
    thetas = np.linspace(0.0, np.pi, m)
    path = np.empty((m, n))
    for k, th in enumerate(thetas):
        path[k] = _p_normalize(kernel, np.cos(th) * phi1 + np.sin(th) * w)
    path[0], path[-1] = phi1, -phi1

    states = [_RayleighState(kernel, path[k]) for k in range(m)]
    history = []
    taus = np.full(m, 1.0 / (1.0 + first.lam))
    iterations = 0
    converged = False
    stale = 0
    while iterations < max_iter:
        iterations += 1
        values = np.array([st.R for st in states])
        k_star = int(np.argmax(values))
        history.append(values[k_star])
        if 0 < k_star < m - 1 and states[k_star].residual() < tol:
            converged = True
            break
        if len(history) > 40:
            window = history[-40:]
            if max(window) - min(window) < 1e-9 * abs(window[-1]):
                break  # minimax level stagnated; hand over to the polish
        moved = False
        if 0 < k_star < m - 1:
            stepped = _rayleigh_descent_step(states[k_star], taus[k_star])
            if stepped is not None:
                states[k_star], taus[k_star] = stepped
                taus[k_star] *= 2.0
                path[k_star] = states[k_star].v
                moved = True
        if not moved:
            # max node capped by its neighbors: relax the whole path once
            for k in range(1, m - 1):
                stepped = _rayleigh_descent_step(states[k], taus[k])
                if stepped is not None:
                    states[k], taus[k] = stepped
                    taus[k] *= 2.0
                    path[k] = states[k].v
                    moved = True
            stale = 0 if moved else stale + 1
        if iterations % 10 == 0 or not moved:
            path = _redistribute(path, kernel)
            states = [_RayleighState(kernel, path[k]) for k in range(m)]
        if stale >= 5:
            break  # nothing can move at machine precision; polish below

    values = np.array([st.R for st in states])
    k_star = int(np.argmax(values))
    v, lam = states[k_star].v, values[k_star]
    polished, _ = _eigen_newton_polish(kernel, v, lam, tol)
    pol_state = _RayleighState(kernel, polished)
    # accept the polish only if it stays a sign-changing eigenpair above lambda_1
    if (
        pol_state.residual() <= max(states[k_star].residual(), tol)
        and pol_state.R > first.lam * (1.0 + 1e-12)
        and np.any(polished[:-1] * polished[1:] < 0.0)
    ):
        v, lam = polished, pol_state.R
        final_res = pol_state.residual()
        converged = converged or final_res < tol
    else:
        final_res = states[k_star].residual()
    return EigenResult(
        lam=lam,
        eigenfunction=GridFunction(kernel.mesh, v),
        iterations=iterations,
        residual=final_res,
        history=np.asarray(history),
        converged=converged,
    )


@dataclass(frozen=True)
class SpectralReport:
    """Checks from the spectral-properties catalogue for one eigenpair."""

    kind: str
    constant_sign: bool
    sign_changes: int
    rayleigh_bound_ok: bool
    boundedness_ratio: float
    passed: bool


def check_spectral_properties(
    kernel: NonlocalKernel,
    result: EigenResult,
    kind: str,
    probes: int = 50,
    seed: int = 0,
) -> SpectralReport:
    """Verify sign structure and minimality of a computed eigenpair."""
    if kind not in ("first", "higher"):
        raise ValueError(f"kind must be 'first' or 'higher', got {kind!r}")
    u = result.eigenfunction
    vals = u.values
    constant_sign = bool(np.min(vals) >= 0.0 or np.max(vals) <= 0.0)
    sign_changes = int(np.sum(vals[:-1] * vals[1:] < 0.0))

    rayleigh_bound_ok = True
    if kind == "first":
        rng = np.random.default_rng(seed)
        h, p = kernel.mesh.h, kernel.params.p
        for _ in range(probes):
            v = rng.normal(size=kernel.mesh.n)
            gf = GridFunction(kernel.mesh, v)
            R = seminorm_p(kernel, gf) / (h * np.sum(np.abs(v) ** p))
            if R < result.lam - 1e-9 * abs(result.lam):
                rayleigh_bound_ok = False
                break

    ratio = linf_norm(u) / lp_norm(u, kernel.params.p)
    if kind == "first":
        passed = constant_sign and rayleigh_bound_ok
    else:
        passed = sign_changes >= 1
    return SpectralReport(
        kind=kind,
        constant_sign=constant_sign,
        sign_changes=sign_changes,
        rayleigh_bound_ok=rayleigh_bound_ok,
        boundedness_ratio=float(ratio),
        passed=passed,
    )

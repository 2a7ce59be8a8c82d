"""Critical-point finders: global minimization, constant-sign solutions via
the truncated energies, and a numerical mountain-pass method.

All solvers are deterministic given their seed: descent uses backtracking
(halving, sufficient-decrease 1e-4) with an initial step on the 1/(1+lambda_1)
scale, and saddle candidates are sharpened by a Levenberg-damped Newton
iteration on the gradient (plain energy descent cannot approach saddle
points, so "polish" here always means a damped root solve of grad phi = 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eigen import lambda1
from .energy import Problem, dual_norm, grad_phi, phi, residual_norm
from .kernel import operator_jacobian
from .mesh import GridFunction, linf_norm
from .reaction import Reaction, reflect, slope_at_infinity

__all__ = [
    "SolveReport",
    "GeometryAudit",
    "GeometryAuditError",
    "ThreeSolutions",
    "solve_global_min",
    "solve_constant_sign",
    "solve_mountain_pass",
    "refine_solution",
    "find_three_solutions",
    "coercivity_audit",
    "sign_condition_holds",
]

_ARMIJO = 1e-4
_BACKTRACK = 0.5
_MAX_BACKTRACKS = 60
_ENERGY_BLOWUP = -1e12


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one solver run."""

    solution: GridFunction
    energy: float
    residual: float
    iterations: int
    method: str
    flags: frozenset
    history: np.ndarray = field(repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def converged(self) -> bool:
        return "converged" in self.flags

    @property
    def nonzero(self) -> bool:
        return "nonzero" in self.flags


def _flags(values: np.ndarray, residual: float, tol: float) -> frozenset:
    out = set()
    if residual < tol:
        out.add("converged")
    sup = float(np.max(np.abs(values))) if values.size else 0.0
    scale = max(1.0, sup)
    if sup > 1e-6 * scale:
        out.add("nonzero")
        lo, hi = float(np.min(values)), float(np.max(values))
        band = 1e-8 * sup
        if lo >= -band:
            out.add("sign_plus")
        elif hi <= band:
            out.add("sign_minus")
        else:
            out.add("sign_changing")
    return frozenset(out)


def _lambda1_scale(prob: Problem) -> float:
    """Cheap first-eigenvalue estimate fixing the descent step scale."""
    est = lambda1(prob.kernel, tol=1e-6, max_iter=400)
    return est.lam


def coercivity_audit(prob: Problem, lam1: float | None = None) -> dict:
    """Advisory check: reaction slope at infinity below the first eigenvalue."""
    if lam1 is None:
        lam1 = _lambda1_scale(prob)
    slope = slope_at_infinity(prob.effective_reaction, prob.p)
    return {"slope_at_infinity": slope, "lambda1": lam1, "coercive": slope < lam1}


def sign_condition_holds(reaction: Reaction, t_max: float = 1e3, samples: int = 200) -> bool:
    """Sampled check of f(t) t >= 0 on a symmetric log grid."""
    ts = np.geomspace(1e-9, t_max, samples)
    ts = np.concatenate([-ts[::-1], ts])
    return bool(np.all(reaction.f(ts) * ts >= 0.0))


def _descent(prob: Problem, u0: np.ndarray, tol: float, max_iter: int, step0: float):
    """Monotone backtracked gradient descent on the energy."""
    u = u0.copy()
    e = phi(prob, GridFunction(prob.mesh, u))
    g = grad_phi(prob, GridFunction(prob.mesh, u)).values
    history = [e]
    tau = step0
    iterations = 0
    diverged = False
    prev_u = prev_g = None
    while iterations < max_iter:
        res = dual_norm(GridFunction(prob.mesh, g), prob.p)
        if res < tol:
            break
        if e < _ENERGY_BLOWUP:
            diverged = True
            break
        if prev_g is not None:
            dg = g - prev_g
            den = float(np.dot(dg, dg))
            num = abs(float(np.dot(u - prev_u, dg)))
            if den > 0.0 and np.isfinite(num / den) and num > 0.0:
                tau = num / den
        gnorm2 = float(np.dot(g, g))
        accepted = False
        t = tau
        for _ in range(_MAX_BACKTRACKS):
            u_try = u - t * g
            e_try = phi(prob, GridFunction(prob.mesh, u_try))
            if e_try <= e - _ARMIJO * t * gnorm2:
                prev_u, prev_g = u, g
                u, e = u_try, e_try
                g = grad_phi(prob, GridFunction(prob.mesh, u)).values
                history.append(e)
                tau = t * 2.0
                accepted = True
                break
            t *= _BACKTRACK
        iterations += 1
        if not accepted:
            break  # flat to machine precision
    res = dual_norm(GridFunction(prob.mesh, g), prob.p)
    return u, e, res, iterations, np.asarray(history), diverged


def solve_global_min(
    prob: Problem,
    tol: float = 1e-8,
    max_iter: int = 20000,
    start: GridFunction | None = None,
) -> SolveReport:
    """Descent with backtracking from start; the coercive-case minimizer."""
    lam1 = _lambda1_scale(prob)
    audit = coercivity_audit(prob, lam1)
    u0 = np.zeros(prob.mesh.n) if start is None else start.values.copy()
    u, e, res, iters, history, diverged = _descent(
        prob, u0, tol, max_iter, 1.0 / (1.0 + lam1)
    )
    flags = _flags(u, res, tol)
    diagnostics = {"coercivity": audit}
    if diverged:
        diagnostics["non_coercive_divergence"] = True
        flags = flags - {"converged"}
    return SolveReport(
        solution=GridFunction(prob.mesh, u),
        energy=e,
        residual=res,
        iterations=iters,
        method="global_min",
        flags=flags,
        history=history,
        diagnostics=diagnostics,
    )


def _zero_escape_probe(prob: Problem, profile: np.ndarray):
    """Best tau in {2^-k} with phi(tau * profile) < 0, or None."""
    best = None
    for k in range(31):
        tau = 2.0 ** (-k)
        e = phi(prob, GridFunction(prob.mesh, tau * profile))
        if e < 0.0 and (best is None or e < best[1]):
            best = (tau, e)
    return best


def solve_constant_sign(
    prob: Problem,
    sign: str,
    tol: float = 1e-8,
    max_iter: int = 20000,
) -> SolveReport:
    """Minimize the one-signed truncated energy, escaping zero along phi_1.

    The minus run is the exact mirror of a plus run on the odd-reflected
    reaction, so odd reactions produce u_- = -u_+ bit for bit.
    """
    if sign not in ("plus", "minus"):
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")
    method = f"constant_sign_{sign}"
    if sign == "minus":
        mirrored = Problem(
            prob.mesh, prob.kernel, reflect(prob.reaction), variant="full"
        )
        inner = solve_constant_sign(mirrored, "plus", tol=tol, max_iter=max_iter)
        minus_prob = Problem(prob.mesh, prob.kernel, prob.reaction, variant="minus")
        u = GridFunction(prob.mesh, -inner.solution.values)
        res = residual_norm(minus_prob, u)
        flags = _flags(u.values, res, tol)
        return SolveReport(
            solution=u,
            energy=phi(minus_prob, u),
            residual=res,
            iterations=inner.iterations,
            method=method,
            flags=flags,
            history=inner.history,
            diagnostics=inner.diagnostics,
        )

    plus_prob = Problem(prob.mesh, prob.kernel, prob.reaction, variant="plus")
    lam1_res = lambda1(prob.kernel, tol=1e-8)
    profile = lam1_res.eigenfunction.values
    probe = _zero_escape_probe(plus_prob, profile)
    diagnostics = {"strict_sign_audit": sign_condition_holds(prob.reaction)}
    if probe is None:
        # no negative energy near zero: honest failure, zero is returned
        zero = GridFunction(prob.mesh, np.zeros(prob.mesh.n))
        diagnostics["zero_escape"] = None
        return SolveReport(
            solution=zero,
            energy=0.0,
            residual=0.0,
            iterations=0,
            method=method,
            flags=_flags(zero.values, 0.0, tol),
            history=np.asarray([0.0]),
            diagnostics=diagnostics,
        )
    tau, e0 = probe
    diagnostics["zero_escape"] = {"tau": tau, "energy": e0}
    u, e, res, iters, history, diverged = _descent(
        plus_prob, tau * profile, tol, max_iter, 1.0 / (1.0 + lam1_res.lam)
    )
    flags = _flags(u, res, tol)
    if diverged:
        diagnostics["non_coercive_divergence"] = True
        flags = flags - {"converged"}
    return SolveReport(
        solution=GridFunction(prob.mesh, u),
        energy=e,
        residual=res,
        iterations=iters,
        method=method,
        flags=flags,
        history=history,
        diagnostics=diagnostics,
    )


def _hessian_phi(prob: Problem, u: np.ndarray) -> np.ndarray:
    H = operator_jacobian(prob.kernel, u)
    H[np.diag_indices(u.size)] -= prob.mesh.h * prob.effective_reaction.df(u)
    return H


def _newton_root(prob: Problem, u0: np.ndarray, tol: float, max_iter: int = 60):
    """Levenberg-damped Newton iteration on grad_phi(u) = 0."""
    u = u0.copy()
    g = grad_phi(prob, GridFunction(prob.mesh, u)).values
    gnorm = float(np.linalg.norm(g))
    mu = 1e-10
    iterations = 0
    while iterations < max_iter:
        res = dual_norm(GridFunction(prob.mesh, g), prob.p)
        if res < tol:
            return u, res, iterations, True
        H = _hessian_phi(prob, u)
        scale = max(float(np.max(np.abs(np.diag(H)))), 1e-300)
        improved = False
        for _ in range(14):
            try:
                delta = np.linalg.solve(H + mu * scale * np.eye(u.size), -g)
            except np.linalg.LinAlgError:
                mu = max(mu * 10.0, 1e-8)
                continue
            u_try = u + delta
            g_try = grad_phi(prob, GridFunction(prob.mesh, u_try)).values
            gnorm_try = float(np.linalg.norm(g_try))
            if gnorm_try < gnorm:
                u, g, gnorm = u_try, g_try, gnorm_try
                mu = max(mu / 4.0, 1e-14)
                improved = True
                break
            mu = max(mu * 10.0, 1e-8)
        iterations += 1
        if not improved:
            break
    res = dual_norm(GridFunction(prob.mesh, g), prob.p)
    return u, res, iterations, res < tol


def refine_solution(
    prob: Problem,
    u0: GridFunction,
    tol: float = 1e-10,
    max_iter: int = 60,
) -> SolveReport:
    """Polish a candidate to a tight residual by the damped Newton iteration."""
    res0 = residual_norm(prob, u0)
    u, res, iters, ok = _newton_root(prob, u0.values, tol, max_iter)
    if not ok and res >= res0 and res0 >= tol:
        # could not improve: report the (flagged) original
        u, res = u0.values.copy(), res0
    gf = GridFunction(prob.mesh, u)
    return SolveReport(
        solution=gf,
        energy=phi(prob, gf),
        residual=res,
        iterations=iters,
        method="refine",
        flags=_flags(u, res, tol),
        history=np.asarray([res0, res]),
        diagnostics={"initial_residual": res0},
    )


@dataclass(frozen=True)
class GeometryAudit:
    """Mountain-pass geometry probe: positive ring level and a downhill end."""

    ok: bool
    reason: str
    ring_radius: float
    ring_level: float
    endpoint: GridFunction | None
    endpoint_energy: float


class GeometryAuditError(RuntimeError):
    def __init__(self, audit: GeometryAudit):
        super().__init__(audit.reason)
        self.audit = audit


def mountain_pass_geometry_audit(prob: Problem, seed: int = 0, probes: int = 32) -> GeometryAudit:
    """Look for a negative-energy ray endpoint and a positive sphere infimum."""
    from .kernel import seminorm_p

    lam1_res = lambda1(prob.kernel, tol=1e-8)
    profile = lam1_res.eigenfunction.values
    endpoint = None
    endpoint_energy = 0.0
    for direction in (profile, -profile):
        for k in range(-2, 41):
            tau = 2.0**k
            e = phi(prob, GridFunction(prob.mesh, tau * direction))
            if e < 0.0:
                endpoint = tau * direction
                endpoint_energy = e
                break
        if endpoint is not None:
            break
    if endpoint is None:
        return GeometryAudit(
            ok=False,
            reason="geometry audit failed: no ray with negative energy",
            ring_radius=0.0,
            ring_level=0.0,
            endpoint=None,
            endpoint_energy=0.0,
        )

    p = prob.p
    norm_e = seminorm_p(prob.kernel, GridFunction(prob.mesh, endpoint)) ** (1.0 / p)
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(probes, prob.mesh.n))
    best_R, best_c = 0.0, -np.inf
    for j in range(1, 13):
        R = norm_e / 2.0**j
        level = np.inf
        for d in dirs:
            dn = d / seminorm_p(prob.kernel, GridFunction(prob.mesh, d)) ** (1.0 / p)
            level = min(level, phi(prob, GridFunction(prob.mesh, R * dn)))
        if level > best_c:
            best_R, best_c = R, level
    if best_c <= 0.0:
        return GeometryAudit(
            ok=False,
            reason="geometry audit failed: no positive ring infimum",
            ring_radius=best_R,
            ring_level=best_c,
            endpoint=GridFunction(prob.mesh, endpoint),
            endpoint_energy=endpoint_energy,
        )
    return GeometryAudit(
        ok=True,
        reason="",
        ring_radius=best_R,
        ring_level=best_c,
        endpoint=GridFunction(prob.mesh, endpoint),
        endpoint_energy=endpoint_energy,
    )


def _redistribute_path(path: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    if arc[-1] == 0.0:
        return path
    m = path.shape[0]
    targets = np.linspace(0.0, arc[-1], m)
    out = np.empty_like(path)
    out[0], out[-1] = path[0], path[-1]
    for k in range(1, m - 1):
        j = min(max(np.searchsorted(arc, targets[k]) - 1, 0), m - 2)
        w = (targets[k] - arc[j]) / (arc[j + 1] - arc[j]) if arc[j + 1] > arc[j] else 0.0
        out[k] = (1.0 - w) * path[j] + w * path[j + 1]
    return out


def _deform_path(prob: Problem, path: np.ndarray, tol: float, max_iter: int, accept):
    """Highest-node descent deformation with neighbor pulling.

    accept(u, res) decides whether a Newton-polished max node is a valid
    candidate; returns (candidate, residual, iterations, converged, history).
    """
    m = path.shape[0]
    energies = np.array([phi(prob, GridFunction(prob.mesh, path[k])) for k in range(m)])
    taus = np.full(m, 1.0)
    history = []
    iterations = 0
    stale = 0
    while iterations < max_iter:
        iterations += 1
        k_star = int(np.argmax(energies))
        history.append(energies[k_star])
        if 0 < k_star < m - 1:
            res = residual_norm(prob, GridFunction(prob.mesh, path[k_star]))
            if res < tol and accept(path[k_star], res):
                return path[k_star], res, iterations, True, np.asarray(history)
            # polish attempt: damped Newton from the highest node
            if iterations % 25 == 0 or stale >= 3:
                u_pol, res_pol, _, ok = _newton_root(prob, path[k_star], tol)
                if ok and accept(u_pol, res_pol):
                    return u_pol, res_pol, iterations, True, np.asarray(history)
        moved = False
        if 0 < k_star < m - 1:
            moved = _descend_node(prob, path, energies, taus, k_star)
            if moved:
                for j in (k_star - 1, k_star + 1):
                    if 0 < j < m - 1:
                        path[j] += 0.5 * (0.5 * (path[j - 1] + path[j + 1]) - path[j])
                        energies[j] = phi(prob, GridFunction(prob.mesh, path[j]))
        if not moved:
            for k in range(1, m - 1):
                moved = _descend_node(prob, path, energies, taus, k) or moved
            stale = 0 if moved else stale + 1
        if iterations % 10 == 0 or not moved:
            path = _redistribute_path(path)
            energies = np.array(
                [phi(prob, GridFunction(prob.mesh, path[k])) for k in range(m)]
            )
        if stale >= 6:
            break
    k_star = int(np.argmax(energies))
    res = residual_norm(prob, GridFunction(prob.mesh, path[k_star]))
    u_pol, res_pol, _, ok = _newton_root(prob, path[k_star], tol)
    if ok and accept(u_pol, res_pol):
        return u_pol, res_pol, iterations, True, np.asarray(history)
    return path[k_star], res, iterations, res < tol, np.asarray(history)


def _descend_node(prob, path, energies, taus, k) -> bool:
    u = path[k]
    g = grad_phi(prob, GridFunction(prob.mesh, u)).values
    gnorm2 = float(np.dot(g, g))
    if gnorm2 == 0.0:
        return False
    t = taus[k]
    for _ in range(_MAX_BACKTRACKS):
        u_try = u - t * g
        e_try = phi(prob, GridFunction(prob.mesh, u_try))
        if e_try <= energies[k] - _ARMIJO * t * gnorm2:
            path[k] = u_try
            energies[k] = e_try
            taus[k] = t * 2.0
            return True
        t *= _BACKTRACK
    taus[k] = max(taus[k] * _BACKTRACK, 1e-300)
    return False


def solve_mountain_pass(
    prob: Problem,
    tol: float = 1e-6,
    max_iter: int | None = None,
    path_points: int = 21,
    seed: int = 0,
) -> SolveReport:
    """Mountain-pass candidate from highest-node path deformation.

    Runs the geometry audit first (raising GeometryAuditError with the
    diagnostic on failure), deforms a path from 0 to the downhill endpoint,
    and accepts only nonzero candidates at or above the ring level.
    """
    if path_points < 3:
        raise ValueError(f"need path_points >= 3, got {path_points}")
    audit = mountain_pass_geometry_audit(prob, seed=seed)
    if not audit.ok:
        raise GeometryAuditError(audit)
    if max_iter is None:
        max_iter = 200 * path_points
    m = path_points
    e_vec = audit.endpoint.values
    path = np.linspace(0.0, 1.0, m)[:, None] * e_vec[None, :]

    c = audit.ring_level

    def accept(u, res):
        sup = float(np.max(np.abs(u)))
        if sup <= 1e-6 * max(1.0, sup):
            return False
        return phi(prob, GridFunction(prob.mesh, u)) >= c - tol

    u, res, iterations, converged, history = _deform_path(prob, path, tol, max_iter, accept)
    gf = GridFunction(prob.mesh, u)
    flags = _flags(u, res, tol)
    if not converged:
        flags = flags - {"converged"}
    diagnostics = {
        "ring_radius": audit.ring_radius,
        "ring_level": audit.ring_level,
        "endpoint_energy": audit.endpoint_energy,
    }
    if not converged:
        diagnostics["stagnated"] = True
    return SolveReport(
        solution=gf,
        energy=phi(prob, gf),
        residual=res,
        iterations=iterations,
        method="mountain_pass",
        flags=flags,
        history=history,
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class ThreeSolutions:
    """Constant-sign pair plus the mountain-pass-type third, when found."""

    plus: SolveReport
    minus: SolveReport
    third: SolveReport | None


def find_three_solutions(
    prob: Problem,
    tol: float = 1e-8,
    max_iter: int = 20000,
    path_points: int = 21,
) -> ThreeSolutions:
    """Search for the coercive-case multiplicity: u_+, u_-, and a path saddle.

    The third solution is reported when the deformation between the two
    minimizers converges to a distinct nonzero critical point; it is a
    search, not a guarantee.
    """
    plus = solve_constant_sign(prob, "plus", tol=tol, max_iter=max_iter)
    minus = solve_constant_sign(prob, "minus", tol=tol, max_iter=max_iter)
    if not (plus.nonzero and minus.nonzero):
        return ThreeSolutions(plus=plus, minus=minus, third=None)

    m = path_points
    w = np.linspace(0.0, 1.0, m)[:, None]
    path = (1.0 - w) * plus.solution.values[None, :] + w * minus.solution.values[None, :]
    sup_scale = max(linf_norm(plus.solution), linf_norm(minus.solution))

    def accept(u, res):
        sup = float(np.max(np.abs(u)))
        if sup <= 1e-6 * max(1.0, sup):
            return False
        dist_p = float(np.max(np.abs(u - plus.solution.values)))
        dist_m = float(np.max(np.abs(u - minus.solution.values)))
        return min(dist_p, dist_m) > 1e-6 * sup_scale

    mp_tol = max(tol, 1e-8)
    u, res, iterations, converged, history = _deform_path(
        prob, path, mp_tol, 200 * path_points, accept
    )
    third = None
    if converged and accept(u, res):
        gf = GridFunction(prob.mesh, u)
        third = SolveReport(
            solution=gf,
            energy=phi(prob, gf),
            residual=res,
            iterations=iterations,
            method="mountain_pass",
            flags=_flags(u, res, mp_tol),
            history=history,
            diagnostics={"between_minimizers": True},
        )
    return ThreeSolutions(plus=plus, minus=minus, third=third)

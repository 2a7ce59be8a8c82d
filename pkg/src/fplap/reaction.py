"""Closed-form reaction terms f(t) with exact primitives F(t).

A reaction is a small composition tree: power-law and eigenvalue-type
leaves combined by sums and one-sided truncations.  Primitives are exact,
never numerically integrated, so energy/gradient consistency tests have a
single error source.  All trees vanish at t = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import GridFunction

__all__ = [
    "Reaction",
    "Power",
    "EigenTerm",
    "Sum",
    "TruncatePlus",
    "TruncateMinus",
    "f_eval",
    "F_eval",
    "nemytskii_integral",
    "check_ar_condition",
    "ARReport",
    "growth_envelope",
    "slope_at_infinity",
    "reflect",
    "reaction_to_json",
    "reaction_from_json",
]


def _odd_power(t, expo):
    """sign(t) |t|^expo, safe at t = 0 for expo > 0."""
    t = np.asarray(t, dtype=float)
    return np.sign(t) * np.abs(t) ** expo


class Reaction:
    """Base class; subclasses implement f (the term) and F (its primitive)."""

    def f(self, t):
        raise NotImplementedError

    def F(self, t):
        raise NotImplementedError

    def df(self, t):
        """Derivative of f where it exists; 0 by convention at kinks/blowups."""
        raise NotImplementedError


def _even_power(t, expo):
    """|t|^expo with the convention 0 for expo < 0 at t = 0 (kink guard)."""
    t = np.asarray(t, dtype=float)
    if expo >= 0.0:
        return np.abs(t) ** expo
    out = np.zeros_like(t)
    nz = t != 0.0
    out[nz] = np.abs(t[nz]) ** expo
    return out


@dataclass(frozen=True)
class Power(Reaction):
    """f(t) = c |t|^(r-2) t with r > 1; F(t) = c |t|^r / r."""

    c: float
    r: float

    def __post_init__(self):
        if not self.r > 1.0:
            raise ValueError(f"need r > 1, got r={self.r}")

    def f(self, t):
        return self.c * _odd_power(t, self.r - 1.0)

    def F(self, t):
        return self.c / self.r * np.abs(np.asarray(t, dtype=float)) ** self.r

    def df(self, t):
        return self.c * (self.r - 1.0) * _even_power(t, self.r - 2.0)


@dataclass(frozen=True)
class EigenTerm(Reaction):
    """f(t) = lam |t|^(p-2) t; F(t) = lam |t|^p / p."""

    lam: float
    p: float

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError(f"need p > 1, got p={self.p}")

    def f(self, t):
        return self.lam * _odd_power(t, self.p - 1.0)

    def F(self, t):
        return self.lam / self.p * np.abs(np.asarray(t, dtype=float)) ** self.p

    def df(self, t):
        return self.lam * (self.p - 1.0) * _even_power(t, self.p - 2.0)


@dataclass(frozen=True)
class Sum(Reaction):
    """Pointwise sum of reaction terms."""

    terms: tuple

    def __init__(self, *terms):
        if len(terms) == 1 and isinstance(terms[0], (tuple, list)):
            terms = tuple(terms[0])
        if not terms:
            raise ValueError("Sum needs at least one term")
        for t in terms:
            if not isinstance(t, Reaction):
                raise TypeError(f"Sum term is not a Reaction: {t!r}")
        object.__setattr__(self, "terms", tuple(terms))

    def f(self, t):
        return sum(term.f(t) for term in self.terms)

    def F(self, t):
        return sum(term.F(t) for term in self.terms)

    def df(self, t):
        return sum(term.df(t) for term in self.terms)


@dataclass(frozen=True)
class TruncatePlus(Reaction):
    """t -> inner(t^+): vanishes on t <= 0."""

    inner: Reaction

    def f(self, t):
        return self.inner.f(np.maximum(np.asarray(t, dtype=float), 0.0))

    def F(self, t):
        return self.inner.F(np.maximum(np.asarray(t, dtype=float), 0.0))

    def df(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0.0, self.inner.df(np.maximum(t, 0.0)), 0.0)


@dataclass(frozen=True)
class TruncateMinus(Reaction):
    """t -> inner(-t^-): vanishes on t >= 0."""

    inner: Reaction

    def f(self, t):
        return self.inner.f(np.minimum(np.asarray(t, dtype=float), 0.0))

    def F(self, t):
        return self.inner.F(np.minimum(np.asarray(t, dtype=float), 0.0))

    def df(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 0.0, self.inner.df(np.minimum(t, 0.0)), 0.0)


def f_eval(reaction: Reaction, t):
    """Evaluate f at a scalar or array argument."""
    out = reaction.f(t)
    return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out


def F_eval(reaction: Reaction, t):
    """Evaluate the exact primitive F at a scalar or array argument."""
    out = reaction.F(t)
    return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out


def nemytskii_integral(reaction: Reaction, u: GridFunction) -> float:
    """Mass-lumped integral h * sum_i F(u_i)."""
    return float(u.mesh.h * np.sum(reaction.F(u.values)))


@dataclass(frozen=True)
class ARReport:
    """Outcome of the superlinearity (Ambrosetti-Rabinowitz) sampling check."""

    holds: bool
    mu: float
    radius: float
    witnesses: tuple  # (t, mu*F(t), f(t)*t) triples where the inequality failed


def check_ar_condition(
    reaction: Reaction, mu: float, R: float, samples: int = 64
) -> ARReport:
    """Sample 0 < mu*F(t) <= f(t)*t on +-[R, 100R] (log-spaced)."""
    if not mu > 1.0:
        raise ValueError(f"need mu > 1, got mu={mu}")
    if not R > 0.0:
        raise ValueError(f"need R > 0, got R={R}")
    ts = np.geomspace(R, 100.0 * R, int(samples))
    ts = np.concatenate([-ts[::-1], ts])
    muF = mu * reaction.F(ts)
    ft = reaction.f(ts) * ts
    bad = ~((muF > 0.0) & (muF <= ft))
    witnesses = tuple(
        (float(t), float(a), float(b)) for t, a, b in zip(ts[bad], muF[bad], ft[bad])
    )
    return ARReport(holds=not witnesses, mu=mu, radius=R, witnesses=witnesses)


def growth_envelope(reaction: Reaction) -> tuple:
    """Constants (a, r) with |f(t)| <= a (1 + |t|^(r-1)) for the whole tree."""
    if isinstance(reaction, Power):
        return abs(reaction.c), reaction.r
    if isinstance(reaction, EigenTerm):
        return abs(reaction.lam), reaction.p
    if isinstance(reaction, Sum):
        pairs = [growth_envelope(t) for t in reaction.terms]
        return sum(a for a, _ in pairs), max(r for _, r in pairs)
    if isinstance(reaction, (TruncatePlus, TruncateMinus)):
        return growth_envelope(reaction.inner)
    raise TypeError(f"unknown reaction node: {reaction!r}")


def _asymptotic_F(reaction: Reaction, side: int) -> dict:
    """Exponent -> coefficient of F(t) ~ sum c_r |t|^r as t -> side * inf."""
    if isinstance(reaction, Power):
        return {reaction.r: reaction.c / reaction.r}
    if isinstance(reaction, EigenTerm):
        return {reaction.p: reaction.lam / reaction.p}
    if isinstance(reaction, Sum):
        out: dict = {}
        for term in reaction.terms:
            for r, c in _asymptotic_F(term, side).items():
                out[r] = out.get(r, 0.0) + c
        return out
    if isinstance(reaction, TruncatePlus):
        return _asymptotic_F(reaction.inner, side) if side > 0 else {}
    if isinstance(reaction, TruncateMinus):
        return _asymptotic_F(reaction.inner, side) if side < 0 else {}
    raise TypeError(f"unknown reaction node: {reaction!r}")


def slope_at_infinity(reaction: Reaction, p: float) -> float:
    """sup over both tails of lim p F(t)/|t|^p; +-inf when a power beats p."""
    slopes = []
    for side in (+1, -1):
        coeffs = {r: c for r, c in _asymptotic_F(reaction, side).items() if c != 0.0}
        if not coeffs:
            slopes.append(0.0)
            continue
        rmax = max(coeffs)
        if rmax > p:
            slopes.append(math.copysign(math.inf, coeffs[rmax]))
        elif rmax == p:
            slopes.append(p * coeffs[rmax])
        else:
            slopes.append(0.0)
    return max(slopes)


def reflect(reaction: Reaction) -> Reaction:
    """The odd reflection t -> -f(-t) (its primitive is t -> F(-t))."""
    if isinstance(reaction, (Power, EigenTerm)):
        return reaction
    if isinstance(reaction, Sum):
        return Sum(tuple(reflect(t) for t in reaction.terms))
    if isinstance(reaction, TruncatePlus):
        return TruncateMinus(reflect(reaction.inner))
    if isinstance(reaction, TruncateMinus):
        return TruncatePlus(reflect(reaction.inner))
    raise TypeError(f"unknown reaction node: {reaction!r}")


def reaction_to_json(reaction: Reaction):
    """Serialize a reaction tree to the JSON descriptor form."""
    if isinstance(reaction, Power):
        return {"power": {"c": reaction.c, "r": reaction.r}}
    if isinstance(reaction, EigenTerm):
        return {"eigen": {"lambda": reaction.lam, "p": reaction.p}}
    if isinstance(reaction, Sum):
        return {"sum": [reaction_to_json(t) for t in reaction.terms]}
    if isinstance(reaction, TruncatePlus):
        return {"truncate_plus": reaction_to_json(reaction.inner)}
    if isinstance(reaction, TruncateMinus):
        return {"truncate_minus": reaction_to_json(reaction.inner)}
    raise TypeError(f"unknown reaction node: {reaction!r}")


def _require_keys(obj: dict, allowed: set, where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise ValueError(f"unknown field(s) {sorted(extra)} in {where}")
    missing = allowed - set(obj)
    if missing:
        raise ValueError(f"missing field(s) {sorted(missing)} in {where}")


def reaction_from_json(obj) -> Reaction:
    """Parse a JSON descriptor; rejects unknown or missing fields."""
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"reaction descriptor must be a single-key object, got {obj!r}")
    (tag, body), = obj.items()
    if tag == "power":
        _require_keys(body, {"c", "r"}, "power")
        return Power(c=float(body["c"]), r=float(body["r"]))
    if tag == "eigen":
        _require_keys(body, {"lambda", "p"}, "eigen")
        return EigenTerm(lam=float(body["lambda"]), p=float(body["p"]))
    if tag == "sum":
        if not isinstance(body, list) or not body:
            raise ValueError("sum must be a non-empty list")
        return Sum(tuple(reaction_from_json(item) for item in body))
    if tag == "truncate_plus":
        return TruncatePlus(reaction_from_json(body))
    if tag == "truncate_minus":
        return TruncateMinus(reaction_from_json(body))
    raise ValueError(f"unknown reaction tag {tag!r}")

"""Lipschitz estimation, the 2*pi/L period bound, and multiplicity verdicts.

Any nonconstant periodic orbit of a field with Lipschitz constant L has
period at least 2*pi/L, so a forcing period T < 2*pi/L rules out
nonconstant unforced T-periodic orbits near a zero: the zero is then an
ejecting point and a branch of genuinely forced solutions emanates from
it.  The Lipschitz constant is estimated as the sampled maximum of the
Jacobian operator 2-norm over a box; this is a lower estimate, so the
certification comparison applies a safety factor on top of it.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import analysis, chain

__all__ = ["CertReport", "MultiplicityReport", "lipschitz_estimate",
           "yorke_check", "certify_ejecting", "multiplicity_report"]

SAFETY_FACTOR = 1.1
DEFAULT_GRID = 7
DENSE_AXES_CAP = 5
MC_POINTS = 10_000
MC_SEED = 0x5EED


@dataclass(frozen=True)
class CertReport:
    """Certification data for one zero."""

    zero: analysis.ZeroRecord
    box_radius: float
    lipschitz: float
    yorke_period_bound: float
    T: float
    ejecting_certified: bool
    notes: str

    def to_dict(self) -> dict:
        return {
            "zero": self.zero.to_dict(),
            "box_radius": self.box_radius,
            "lipschitz": self.lipschitz,
            "yorke_period_bound": self.yorke_period_bound,
            "T": self.T,
            "ejecting_certified": self.ejecting_certified,
            "notes": self.notes,
        }


@dataclass(frozen=True)
class MultiplicityReport:
    alpha: float
    beta: float
    certified_zeros: tuple[CertReport, ...]
    n: int
    lambda_star_hint: Optional[float]
    verdict: str

    def to_dict(self) -> dict:
        return {
            "interval": [self.alpha, self.beta],
            "certified": [c.to_dict() for c in self.certified_zeros],
            "n": self.n,
            "lambda_star_hint": self.lambda_star_hint,
            "verdict": self.verdict,
        }


def lipschitz_estimate(field: chain.ExpandedField, center, radius: float,
                       grid_per_axis: int = DEFAULT_GRID) -> float:
    """Sampled lower estimate of the local Lipschitz constant of G.

    Maximum of the operator 2-norm of the finite-difference Jacobian over
    the box center +- radius: a full tensor grid up to 5 axes, Monte Carlo
    with 10^4 points (fixed seed) beyond.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if grid_per_axis < 2:
        raise ValueError("grid_per_axis must be >= 2")
    center = chain.as_state(center, field.dim)
    dim = field.dim
    if dim <= DENSE_AXES_CAP:
        axes = [np.linspace(c - radius, c + radius, grid_per_axis) for c in center]
        points = itertools.product(*axes)
        samples = (np.array(pt) for pt in points)
    else:
        rng = np.random.default_rng(MC_SEED)
        samples = (center + rng.uniform(-radius, radius, size=dim)
                   for _ in range(MC_POINTS))
    best = 0.0
    for pt in samples:
        J = analysis.jacobian_fd(field.G, pt)
        best = max(best, float(np.linalg.norm(J, 2)))
    return best


def yorke_check(L: float, T: float) -> tuple[float, bool]:
    """Return (2*pi/L, T < bound); the bound is +inf for L = 0."""
    if L < 0:
        raise ValueError("Lipschitz constant must be nonnegative")
    if T <= 0:
        raise ValueError("period must be positive")
    bound = math.inf if L == 0.0 else 2.0 * math.pi / L
    return bound, T < bound


def certify_ejecting(p: chain.ProblemSpec, z: analysis.ZeroRecord,
                     radius: float | None = None,
                     grid_per_axis: int = DEFAULT_GRID) -> CertReport:
    """Certify a zero as ejecting: a nondegenerate sign-changing zero with
    forcing period strictly below the (safety-scaled) period bound."""
    field = chain.expand(p)
    if radius is None:
        radius = 0.1 * (1.0 + float(np.linalg.norm(z.lifted, np.inf)))
    L = lipschitz_estimate(field, z.lifted, radius, grid_per_axis)
    bound, _ = yorke_check(L, p.T)
    _, passes_safe = yorke_check(SAFETY_FACTOR * L, p.T)
    certified = passes_safe and z.nondegenerate and z.sign_change
    notes = (f"Lipschitz value is a sampled lower estimate "
             f"(grid {grid_per_axis} per axis, radius {radius:.6g}); "
             f"certification compares T against 2*pi/({SAFETY_FACTOR}*L).")
    return CertReport(zero=z, box_radius=float(radius), lipschitz=L,
                      yorke_period_bound=bound, T=p.T,
                      ejecting_certified=certified, notes=notes)


def multiplicity_report(p: chain.ProblemSpec, alpha: float, beta: float,
                        grid_n: int = 256, radius: float | None = None,
                        grid_per_axis: int = DEFAULT_GRID,
                        lambda_star_hint: float | None = None) -> MultiplicityReport:
    """Scan, certify every zero, and count the certified sign changers.

    When n of them certify, the equation has at least n T-periodic
    solutions with pairwise disjoint images for every sufficiently small
    positive forcing amplitude.
    """
    zeros = analysis.scan_zeros(p, alpha, beta, grid_n)
    certs = tuple(certify_ejecting(p, z, radius, grid_per_axis) for z in zeros)
    n = sum(1 for c in certs if c.ejecting_certified and c.zero.sign_change)
    if n > 0:
        verdict = (f"at least {n} T-periodic solutions with pairwise disjoint "
                   f"x-images exist for all sufficiently small lambda > 0 "
                   f"({n} certified ejecting sign-changing zeros)")
    else:
        verdict = ""
    return MultiplicityReport(alpha=float(alpha), beta=float(beta),
                              certified_zeros=certs, n=n,
                              lambda_star_hint=lambda_star_hint,
                              verdict=verdict)

"""Mass hyperplane intersected with the box [-1, 1]^n, and projection onto it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleConstraintError


@dataclass(frozen=True)
class ConstraintSet:
    V0: float
    n: int

    def __post_init__(self):
        if abs(self.V0) > self.n:
            raise InfeasibleConstraintError(
                f"target mass {self.V0} unreachable with {self.n} entries in [-1, 1]")

    @classmethod
    def from_field(cls, phi) -> "ConstraintSet":
        phi = np.asarray(phi, dtype=float)
        return cls(float(np.sum(phi)), phi.size)


def _mass_gap(phi, lam, V0):
    return float(np.sum(np.clip(phi - lam, -1.0, 1.0))) - V0


def project_with_multiplier(phi, cset: ConstraintSet, max_iter: int = 200):
    """Euclidean projection onto C; returns (projection, lambda*).

    The root of f(lam) = 1^T clip(phi - lam) - V0 is bracketed by
    [min(phi) - 1, max(phi) + 1].  f is piecewise linear and nonincreasing
    with slope -(number of free entries), so bisection is accelerated by the
    exact linear root of the current piece whenever that root stays inside
    the bracket.  The final multiplier is recomputed in closed form from
    the identified free set.
    """
    x = np.asarray(phi, dtype=float)
    if x.size != cset.n:
        raise InfeasibleConstraintError(f"field has {x.size} entries, constraint expects {cset.n}")
    flat = x.ravel()
    V0 = cset.V0
    lo, hi = float(flat.min()) - 1.0, float(flat.max()) + 1.0
    lam = 0.0
    tol_f = 1e-15 * cset.n
    for _ in range(max_iter):
        shifted = flat - lam
        free = np.abs(shifted) < 1.0
        nfree = int(np.count_nonzero(free))
        gap = float(np.sum(np.clip(shifted, -1.0, 1.0))) - V0
        if abs(gap) <= tol_f and nfree > 0:
            break
        if gap > 0:
            lo = lam
        elif gap < 0:
            hi = lam
        else:
            break
        if hi - lo <= 1e-14 * (1.0 + abs(lam)):
            break
        cand = lam + gap / nfree if nfree else None
        lam = cand if cand is not None and lo < cand < hi else 0.5 * (lo + hi)

    # closed-form multiplier on the identified active pattern
    shifted = flat - lam
    free = np.abs(shifted) < 1.0
    nfree = int(np.count_nonzero(free))
    if nfree:
        n_up = np.count_nonzero(shifted >= 1.0)
        n_low = np.count_nonzero(shifted <= -1.0)
        exact = (float(np.sum(flat[free])) + n_up - n_low - V0) / nfree
        s = flat - exact
        if (np.array_equal(np.abs(s) < 1.0, free)
                and abs(_mass_gap(flat, exact, V0)) <= abs(_mass_gap(flat, lam, V0))):
            lam = exact
    out = np.clip(x - lam, -1.0, 1.0)
    return out, lam


def project(phi, cset: ConstraintSet) -> np.ndarray:
    """Euclidean projection of ``phi`` onto {1^T phi = V0, |phi|_inf <= 1}."""
    return project_with_multiplier(phi, cset)[0]


def residual(phi, cset: ConstraintSet) -> tuple[float, float]:
    """(relative mass error, box violation)."""
    phi = np.asarray(phi, dtype=float)
    mass_error = (float(np.sum(phi)) - cset.V0) / max(abs(cset.V0), 1.0)
    box = max(0.0, float(np.max(np.abs(phi))) - 1.0)
    return mass_error, box

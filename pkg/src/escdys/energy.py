"""Discrete energy E_h and its convex/concave/indicator splitting.

    F(phi) = (a eps^2 / 2) phi^T L phi + (b / 2) |phi|^2           (convex)
    G(phi) = indicator of {1^T phi = V0, |phi|_inf <= 1}
    H(phi) = sum_k f(phi_k) - (b/2) phi_k^2
             + (eps^2 / 2) (gamma^2(n_k) - a) |p_k|^2                (concave for a, b large)

F + H equals the unweighted node sum E_h on the feasible set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anisotropy import AnisotropyModel
from .grid import GridSpec, adjoint_diff, apply_neg_laplacian, as_field, forward_diff


@dataclass(frozen=True)
class SplittingParams:
    a: float = 10.0
    b: float = 2.0
    eps: float = 0.02
    M: float = 1.0
    use_truncated: bool = True

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError("a and b must be non-negative")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.M < 1:
            raise ValueError("truncation bound M must be >= 1")


@dataclass(frozen=True)
class EnergyReport:
    raw_sum: float
    scaled: float


def double_well(phi, params: SplittingParams):
    """Potential value and derivative, elementwise.

    The truncated variant continues (phi^2 - 1)^2 / 4 beyond |phi| > M by the
    quadratic that matches value and slope at +-M.
    """
    phi = np.asarray(phi, dtype=float)
    # explicit products: integer powers go through a much slower libm path
    sq = phi * phi
    val = 0.25 * (sq - 1.0) * (sq - 1.0)
    der = (sq - 1.0) * phi
    if not params.use_truncated:
        return val, der
    M = params.M
    c2 = (3 * M * M - 1) / 2
    c0 = (3 * M ** 4 + 1) / 4
    hi = phi > M
    lo = phi < -M
    if np.any(hi) or np.any(lo):
        val = np.where(hi, c2 * sq - 2 * M ** 3 * phi + c0, val)
        val = np.where(lo, c2 * sq + 2 * M ** 3 * phi + c0, val)
        der = np.where(hi, 2 * c2 * phi - 2 * M ** 3, der)
        der = np.where(lo, 2 * c2 * phi + 2 * M ** 3, der)
    return val, der


def double_well_curvature(phi, params: SplittingParams) -> np.ndarray:
    """Second derivative of the potential (3 phi^2 - 1, clamped at |phi| = M when truncated)."""
    phi = np.asarray(phi, dtype=float)
    if params.use_truncated:
        phi = np.clip(phi, -params.M, params.M)
    return 3 * phi * phi - 1.0


def discrete_energy(phi, model: AnisotropyModel, params: SplittingParams,
                    spec: GridSpec) -> EnergyReport:
    """E_h = sum_k f(phi_k) + (eps^2/2) gamma^2(n_k) |p_k|^2."""
    phi = as_field(phi, spec)
    p = forward_diff(phi, spec)
    f, _ = double_well(phi, params)
    raw = float(np.sum(f) + 0.5 * params.eps ** 2 * np.sum(model.energy_density(p)))
    return EnergyReport(raw, raw * spec.cell_volume)


def F_value(phi, params: SplittingParams, spec: GridSpec) -> float:
    phi = as_field(phi, spec)
    Lphi = apply_neg_laplacian(phi, spec)
    return float(0.5 * params.a * params.eps ** 2 * np.vdot(phi, Lphi)
                 + 0.5 * params.b * np.vdot(phi, phi))


def grad_F(phi, params: SplittingParams, spec: GridSpec) -> np.ndarray:
    phi = as_field(phi, spec)
    return params.a * params.eps ** 2 * apply_neg_laplacian(phi, spec) + params.b * phi


def H_value(phi, model: AnisotropyModel, params: SplittingParams, spec: GridSpec) -> float:
    phi = as_field(phi, spec)
    p = forward_diff(phi, spec)
    f, _ = double_well(phi, params)
    sq = np.sum(p * p, axis=0)
    aniso = model.energy_density(p) - params.a * sq
    return float(np.sum(f - 0.5 * params.b * phi * phi) + 0.5 * params.eps ** 2 * np.sum(aniso))


def grad_H(phi, model: AnisotropyModel, params: SplittingParams, spec: GridSpec) -> np.ndarray:
    """f'(phi) - b phi + eps^2 D^T A(p), A the per-node flux with stabiliser a."""
    phi = as_field(phi, spec)
    p = forward_diff(phi, spec)
    _, df = double_well(phi, params)
    return df - params.b * phi + params.eps ** 2 * adjoint_diff(model.flux(p, params.a), spec)


def H_and_grad(phi, model: AnisotropyModel, params: SplittingParams, spec: GridSpec):
    """(H(phi), grad H(phi)) sharing one difference and one gamma evaluation."""
    phi = as_field(phi, spec)
    p = forward_diff(phi, spec)
    f, df = double_well(phi, params)
    dens, flux = model.density_and_flux(p, params.a)
    e2 = params.eps ** 2
    value = (np.sum(f - 0.5 * params.b * phi * phi)
             + 0.5 * e2 * (np.sum(dens) - params.a * np.sum(p * p)))
    grad = df - params.b * phi + e2 * adjoint_diff(flux, spec)
    return float(value), grad


def theta_energy(x, y, z, tau: float, model: AnisotropyModel, params: SplittingParams,
                 spec: GridSpec, V0: float | None = None, h_eval=None,
                 feas_tol: float = 1e-9) -> float:
    """Merit function Theta_tau(x, y, z) of the three-operator splitting.

    G(z) is 0 when z is feasible (box always, mass when ``V0`` is given) and
    +inf otherwise.  ``h_eval = (H(y), grad H(y))`` may be passed to reuse
    an evaluation.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    x, y, z = (as_field(v, spec) for v in (x, y, z))
    if np.max(np.abs(z)) > 1.0:
        return np.inf
    if V0 is not None and abs(np.sum(z) - V0) > feas_tol * max(abs(V0), spec.size):
        return np.inf
    Hy, g = H_and_grad(y, model, params, spec) if h_eval is None else h_eval
    r1 = 2 * y - z - x - tau * g
    r2 = x - y + tau * g
    r3 = y - z
    return float(F_value(y, params, spec) + Hy
                 + (np.vdot(r1, r1) - np.vdot(r2, r2)) / (2 * tau) - np.vdot(r3, r3) / tau)


def estimate_concavity_margin(model: AnisotropyModel, samples: int = 720,
                              step: float = 1e-4) -> float:
    """Largest spectral norm of the Hessian of p -> gamma^2(p/|p|)|p|^2 on the unit circle.

    The map is 2-homogeneous, so its Hessian is constant along rays and the
    circle samples cover every direction.  Returns an empirical lower bound
    for the stabiliser ``a``.
    """
    if model.dim != 2:
        raise ValueError("concavity margin estimator is 2D only")
    if samples < 8:
        raise ValueError("need at least 8 samples")
    t = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    p = np.stack([np.cos(t), np.sin(t)])
    q = model.energy_density
    e = np.eye(2)[:, :, None] * step
    H = np.empty((2, 2, samples))
    q0 = q(p)
    for i in range(2):
        H[i, i] = (q(p + e[i]) - 2 * q0 + q(p - e[i])) / step ** 2
    H[0, 1] = H[1, 0] = (q(p + e[0] + e[1]) - q(p + e[0] - e[1])
                         - q(p - e[0] + e[1]) + q(p - e[0] - e[1])) / (4 * step ** 2)
    eig = np.linalg.eigvalsh(np.moveaxis(H, -1, 0))
    return float(np.max(np.abs(eig)))

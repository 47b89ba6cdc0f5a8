"""Baseline H^{-1} gradient flow: anisotropic Cahn-Hilliard with bi-harmonic regularisation.

    phi_t = Delta mu,   mu = f'(phi) - eps^2 div m + beta eps^2 Delta^2 phi

Time stepping is stabilised semi-implicit: the linear terms
b_s phi + a_s eps^2 (-Delta) phi + beta eps^2 Delta^2 phi are implicit, the
remainder of mu explicit, so every step is one diagonal solve in Fourier
space and the zero mode (the mass) is untouched.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .anisotropy import AnisotropyModel
from .dys import Diagnostics, kkt_residual
from .energy import SplittingParams, discrete_energy, double_well, grad_H
from .errors import InstabilityError
from .grid import (GridSpec, _symbol, adjoint_diff, apply_neg_laplacian, as_field,
                   forward_diff, grid_norm)

log = logging.getLogger(__name__)

GF_COLUMNS = ("iter", "time", "energy_raw", "energy_scaled", "energy_reg", "mass_rel",
              "phi_min", "phi_max", "step_norm", "kkt", "wall_s")


@dataclass(frozen=True)
class CahnHilliardParams:
    eps: float = 0.02
    beta: float = 1e-4
    dt: float = 1e-3
    a_s: float = 10.0
    b_s: float = 2.0
    tol: float = 1e-8
    max_steps: int = 200_000
    use_truncated: bool = False
    M: float = 1.0

    def __post_init__(self):
        if self.dt <= 0 or self.eps <= 0:
            raise ValueError("dt and eps must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")

    def splitting(self, a: float | None = None, b: float | None = None) -> SplittingParams:
        """Matching DYS splitting parameters (stabilisers a_s, b_s unless overridden)."""
        return SplittingParams(a=self.a_s if a is None else a, b=self.b_s if b is None else b,
                               eps=self.eps, M=self.M, use_truncated=self.use_truncated)


def chemical_potential(phi, model: AnisotropyModel, params: CahnHilliardParams,
                       spec: GridSpec) -> np.ndarray:
    """mu = f'(phi) + eps^2 D^T m(p) + beta eps^2 L(L phi), m the unstabilised flux."""
    phi = as_field(phi, spec)
    _, df = double_well(phi, params.splitting())
    mu = df + params.eps ** 2 * adjoint_diff(model.flux(forward_diff(phi, spec), 0.0), spec)
    if params.beta:
        mu += params.beta * params.eps ** 2 * apply_neg_laplacian(apply_neg_laplacian(phi, spec), spec)
    return mu


def regularised_energy(phi, model, params: CahnHilliardParams, spec: GridSpec) -> float:
    """Scaled E_h plus (beta eps^2 / 2) |L phi|^2 h^dim."""
    phi = as_field(phi, spec)
    e = discrete_energy(phi, model, params.splitting(), spec).raw_sum
    Lphi = apply_neg_laplacian(phi, spec)
    return (e + 0.5 * params.beta * params.eps ** 2 * float(np.vdot(Lphi, Lphi))) * spec.cell_volume


def step(phi, model: AnisotropyModel, params: CahnHilliardParams, spec: GridSpec) -> np.ndarray:
    """One stabilised semi-implicit step of size ``params.dt``."""
    phi = as_field(phi, spec)
    e2 = params.eps ** 2
    # f' - b_s phi + eps^2 D^T m - a_s eps^2 L phi  ==  grad H with stabilisers (a_s, b_s)
    explicit = grad_H(phi, model, params.splitting(), spec)
    lam = _symbol(spec, True)
    dt = params.dt
    denom = 1.0 + dt * lam * (params.b_s + params.a_s * e2 * lam + params.beta * e2 * lam * lam)
    new_hat = (sfft.rfftn(phi) - dt * lam * sfft.rfftn(explicit)) / denom
    new = sfft.irfftn(new_hat, s=spec.shape)
    if not np.all(np.isfinite(new)):
        raise InstabilityError(f"non-finite values after a step with dt={dt}; try a smaller dt")
    return new


def run_to_steady(phi0, model: AnisotropyModel, params: CahnHilliardParams, spec: GridSpec, *,
                  record_every: int = 10, kkt_every: int = 0, kkt_params: SplittingParams | None = None,
                  norm_mode: str = "grid_weighted"):
    """Step until ||phi^{n+1} - phi^n|| <= tol or ``max_steps``; returns (phi, Diagnostics).

    ``kkt_params`` selects the splitting whose grad F + grad H defines the
    optimality residual (default: stabilisers a_s, b_s).
    """
    phi = np.array(as_field(phi0, spec), dtype=float)
    V0 = float(np.sum(phi))
    mass_scale = max(abs(V0), 1.0)
    diag = Diagnostics(columns=GF_COLUMNS)
    kp = kkt_params or params.splitting()
    t_start = time.perf_counter()
    n = 0
    while n < params.max_steps:
        new = step(phi, model, params, spec)
        n += 1
        change = grid_norm(new - phi, spec, norm_mode)
        phi = new
        done = change <= params.tol
        if n % record_every == 0 or done or n == params.max_steps:
            rep = discrete_energy(phi, model, params.splitting(), spec)
            kkt = (kkt_residual(phi, model, kp, spec)
                   if kkt_every and (n % kkt_every == 0 or done) else float("nan"))
            diag.append(iter=n, time=n * params.dt, energy_raw=rep.raw_sum,
                        energy_scaled=rep.scaled, energy_reg=regularised_energy(phi, model, params, spec),
                        mass_rel=(float(np.sum(phi)) - V0) / mass_scale,
                        phi_min=float(phi.min()), phi_max=float(phi.max()),
                        step_norm=change, kkt=kkt, wall_s=time.perf_counter() - t_start)
        if done:
            diag.converged = True
            break
    diag.iterations = n
    if not diag.converged:
        log.warning("gradient flow stopped at max_steps=%d, last change %.3e", n, change)
    return phi, diag


def steady_residual(phi, model, params: CahnHilliardParams, spec: GridSpec,
                    norm_mode: str = "grid_weighted") -> float:
    """||L mu||; zero exactly at a steady state."""
    return grid_norm(apply_neg_laplacian(chemical_potential(phi, model, params, spec), spec),
                     spec, norm_mode)

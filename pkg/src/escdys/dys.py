"""Davis-Yin splitting with a spectral F-prox, projected G-prox and a halving step size.

One iteration, for the splitting in :mod:`escdys.energy`::

    y <- (I + tau (a eps^2 L + b I))^{-1} x          (FFT diagonal solve)
    z <- P_C(2 y - tau grad H(y) - x)
    x <- x + z - y

The iteration stops once ||y - z|| / tau drops below the tolerance and
returns z, which is feasible by construction.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft as sfft

from .anisotropy import AnisotropyModel
from .constraints import ConstraintSet, project
from .energy import (SplittingParams, F_value, H_and_grad, discrete_energy, grad_F,
                     grad_H)
from .errors import SolverStalledError
from .grid import GridSpec, _symbol, apply_neg_laplacian, as_field, grid_norm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepPolicy:
    """Step-size halving rule.

    With ``rescale_x`` a halving also rescales x so that the next y-step
    returns the same y as the old step size would have; otherwise the jump
    of y caused by the new step size can trigger a chain of halvings.
    """

    tau0: float = 1.0
    c0: float = 1.0
    c1: float = 10.0
    norm_mode: str = "grid_weighted"
    rescale_x: bool = True

    def __post_init__(self):
        if self.tau0 <= 0 or self.c0 <= 0 or self.c1 <= 0:
            raise ValueError("tau0, c0 and c1 must be positive")
        if self.norm_mode not in ("grid_weighted", "raw_l2"):
            raise ValueError(f"unknown norm mode {self.norm_mode!r}")


@dataclass(frozen=True)
class StopRule:
    """Stop once ||y - z|| / tau < tol, measured in ``norm_mode``.

    The default unweighted l2 norm keeps the optimality residual of the
    returned iterate within a small multiple of ``tol`` independent of the
    grid size; the grid-weighted norm is h^(dim/2) times smaller and stops
    correspondingly earlier.
    """

    tol: float = 1e-8
    max_iter: int = 200_000
    norm_mode: str = "raw_l2"

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")
        if self.norm_mode not in ("grid_weighted", "raw_l2"):
            raise ValueError(f"unknown norm mode {self.norm_mode!r}")


@dataclass
class DysState:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray | None
    tau: float
    tau0: float
    n: int = 0
    halvings: int = 0


DIAGNOSTIC_COLUMNS = ("iter", "tau", "energy_raw", "energy_scaled", "theta", "mass_rel",
                      "z_min", "z_max", "step_norm", "kkt", "wall_s")


@dataclass
class Diagnostics:
    """Per-iteration history of a run; ``kkt`` is NaN on iterations where it was skipped."""

    columns: tuple = DIAGNOSTIC_COLUMNS
    rows: dict = field(default_factory=dict)
    converged: bool = False
    iterations: int = 0
    halvings: int = 0
    final_tau: float = float("nan")

    def __post_init__(self):
        for c in self.columns:
            self.rows.setdefault(c, [])

    def append(self, **values):
        for c in self.columns:
            self.rows[c].append(values.get(c, float("nan")))

    def __getitem__(self, name) -> np.ndarray:
        return np.asarray(self.rows[name], dtype=float)

    def __len__(self):
        return len(self.rows["iter"])


def _solve_denominator(spec: GridSpec, tau: float, params: SplittingParams) -> np.ndarray:
    return 1.0 + tau * params.b + tau * params.a * params.eps ** 2 * _symbol(spec, True)


def apply_F_operator(y, tau: float, params: SplittingParams, spec: GridSpec) -> np.ndarray:
    """(I + tau (a eps^2 L + b I)) y."""
    y = as_field(y, spec)
    return y + tau * (params.a * params.eps ** 2 * apply_neg_laplacian(y, spec) + params.b * y)


def init_state(y0, policy: StepPolicy, params: SplittingParams, spec: GridSpec) -> DysState:
    """x0 = y0 + tau0 (a eps^2 L + b I) y0, so the first y-step returns y0."""
    y0 = np.array(as_field(y0, spec), dtype=float)
    x0 = apply_F_operator(y0, policy.tau0, params, spec)
    return DysState(x=x0, y=y0, z=None, tau=policy.tau0, tau0=policy.tau0)


def y_step(x, tau: float, params: SplittingParams, spec: GridSpec) -> np.ndarray:
    """Proximal map of F: solve (I + tau (a eps^2 L + b I)) y = x by FFT."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    x = as_field(x, spec)
    xh = sfft.rfftn(x)
    xh /= _solve_denominator(spec, tau, params)
    return sfft.irfftn(xh, s=spec.shape)


def z_step(state: DysState, model: AnisotropyModel, params: SplittingParams,
           cset: ConstraintSet, spec: GridSpec, gradH_y=None) -> np.ndarray:
    """z = P_C(2y - tau grad H(y) - x)."""
    g = grad_H(state.y, model, params, spec) if gradH_y is None else gradH_y
    return project(2.0 * state.y - state.tau * g - state.x, cset)


def x_step(state: DysState) -> None:
    state.x += state.z - state.y


def tau_update(state: DysState, policy: StepPolicy, y_prev, spec: GridSpec,
               tau_bar: float = 0.0) -> bool:
    """Halve tau when ||y_new - y_old|| > c0/n or ||y_new|| > c1 (and tau > tau_bar)."""
    if state.tau <= tau_bar:
        return False
    nrm = policy.norm_mode
    n = state.n
    jump = grid_norm(state.y - y_prev, spec, nrm)
    fire = (n >= 1 and jump > policy.c0 / n) or grid_norm(state.y, spec, nrm) > policy.c1
    if fire:
        state.tau *= 0.5
        state.halvings += 1
        if state.tau < 1e-12 * state.tau0:
            raise SolverStalledError(f"step size underflow after {state.halvings} halvings "
                                     f"at iteration {n}")
    return fire


def kkt_residual(z, model: AnisotropyModel, params: SplittingParams, spec: GridSpec,
                 gradient=None, scan_points: int = 64, lam_tol: float = 1e-10) -> float:
    """min over lambda of ||P_box(z - grad F(z) - grad H(z) - lambda) - z||_2.

    The 1D problem is continuous and piecewise smooth; a uniform pre-scan picks
    the bracket that a golden-section search then refines.
    """
    z = as_field(z, spec)
    g = grad_F(z, params, spec) + grad_H(z, model, params, spec) if gradient is None else gradient
    w = (z - g).ravel()
    zf = z.ravel()

    def r(lam):
        d = np.clip(w - lam, -1.0, 1.0) - zf
        return float(np.sqrt(np.dot(d, d)))

    gmax = float(np.max(np.abs(g))) + 2.0
    grid = np.linspace(-gmax, gmax, scan_points)
    vals = np.array([r(v) for v in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, scan_points - 1)]
    inv_phi = (math.sqrt(5) - 1) / 2
    c, d = hi - inv_phi * (hi - lo), lo + inv_phi * (hi - lo)
    fc, fd = r(c), r(d)
    while hi - lo > lam_tol * (1.0 + abs(lo)):
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = r(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = r(d)
    return min(fc, fd, float(vals[i]))


def compute_tau_bar(L_F: float, L_H: float) -> float:
    """Step-size threshold guaranteeing descent when F is convex."""
    if L_F <= 0 or L_H <= 0:
        raise ValueError("Lipschitz constants must be positive")
    s = 2 * L_H + 6 * L_F
    # rationalised form of (-s + sqrt(s^2 + 12 L_H L_F)) / (6 L_H L_F); avoids cancellation
    second = 2.0 / (s + math.sqrt(s * s + 12 * L_H * L_F))
    return min(1.0 / L_F, second)


def lipschitz_F(params: SplittingParams, spec: GridSpec) -> float:
    return params.a * params.eps ** 2 * 4 * spec.dim * spec.m ** 2 + params.b


@dataclass
class RunResult:
    z: np.ndarray
    diagnostics: Diagnostics
    state: DysState


def run(y0, model: AnisotropyModel, params: SplittingParams, policy: StepPolicy,
        cset: ConstraintSet | None, stop: StopRule, spec: GridSpec, *,
        kkt_every: int = 100, record_every: int = 1,
        callback: Callable[[DysState, Diagnostics], None] | None = None) -> RunResult:
    """Iterate until ||y - z|| / tau < tol (in the stop rule's norm) or ``max_iter``.

    ``cset`` defaults to the mass of ``y0``.  The callback is invoked after
    every recorded iteration.
    """
    y0 = as_field(y0, spec)
    if cset is None:
        cset = ConstraintSet.from_field(y0)
    state = init_state(y0, policy, params, spec)
    diag = Diagnostics()
    t_start = time.perf_counter()
    mass_scale = max(abs(cset.V0), 1.0)

    while state.n < stop.max_iter:
        y_prev = state.y
        state.y = y_step(state.x, state.tau, params, spec)
        Hy, gH = H_and_grad(state.y, model, params, spec)
        state.z = project(2.0 * state.y - state.tau * gH - state.x, cset)
        x_step(state)
        state.n += 1

        tau = state.tau
        step_norm = grid_norm(state.y - state.z, spec, stop.norm_mode) / tau
        done = step_norm < stop.tol

        if state.n % record_every == 0 or done or state.n == stop.max_iter:
            r1 = 2 * state.y - state.z - state.x - tau * gH
            r2 = state.x - state.y + tau * gH
            r3 = state.y - state.z
            theta = (F_value(state.y, params, spec) + Hy
                     + (np.vdot(r1, r1) - np.vdot(r2, r2)) / (2 * tau) - np.vdot(r3, r3) / tau)
            energy = discrete_energy(state.z, model, params, spec)
            kkt = (kkt_residual(state.z, model, params, spec)
                   if kkt_every and (state.n % kkt_every == 0 or done) else float("nan"))
            diag.append(iter=state.n, tau=tau, energy_raw=energy.raw_sum,
                        energy_scaled=energy.scaled, theta=float(theta),
                        mass_rel=(float(np.sum(state.z)) - cset.V0) / mass_scale,
                        z_min=float(state.z.min()), z_max=float(state.z.max()),
                        step_norm=step_norm, kkt=kkt,
                        wall_s=time.perf_counter() - t_start)
            if callback is not None:
                callback(state, diag)
        if done:
            diag.converged = True
            break
        tau_old = state.tau
        if tau_update(state, policy, y_prev, spec) and policy.rescale_x:
            # x = y' + tau (a eps^2 L + b I) y' with y' = J(x) at the old step
            y_next = y_step(state.x, tau_old, params, spec)
            state.x = y_next + (state.tau / tau_old) * (state.x - y_next)

    diag.iterations = state.n
    diag.halvings = state.halvings
    diag.final_tau = state.tau
    if not diag.converged:
        log.warning("DYS stopped at max_iter=%d without meeting tol=%g", stop.max_iter, stop.tol)
    return RunResult(state.z, diag, state)

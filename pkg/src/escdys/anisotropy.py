"""Surface-energy densities gamma(n) and the per-node flux used by grad H.

Every evaluator is vectorised over a leading component axis: ``n`` and ``p``
have shape ``(dim, ...)`` and results drop (gamma) or keep (gradients,
flux) that axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigurationError, UnsupportedOperationError


class ThetaForm(NamedTuple):
    """gamma and its first two derivatives as functions of the polar angle."""

    gamma: Callable[[np.ndarray], np.ndarray]
    dgamma: Callable[[np.ndarray], np.ndarray]
    d2gamma: Callable[[np.ndarray], np.ndarray]


def _components(n, dim):
    arr = np.asarray(n, dtype=float)
    if arr.shape[0] != dim:
        raise ConfigurationError(f"expected {dim} components, got shape {arr.shape}")
    return arr


class AnisotropyModel:
    """Base class.  Subclasses define ``gamma`` and ``grad_gamma`` on R^dim."""

    dim: int = 2
    recommended_a: float = 10.0

    def gamma(self, n) -> np.ndarray:
        """gamma(n); the zero vector is evaluated as e_1."""
        return self._gamma(self._fix_zero(n))

    def grad_gamma(self, n) -> np.ndarray:
        """Gradient of gamma viewed as a function on R^dim."""
        return self._grad(self._fix_zero(n))

    def _fix_zero(self, n):
        n = np.array(_components(n, self.dim), dtype=float)
        zero = ~np.any(n != 0.0, axis=0)
        if np.any(zero):
            n[0] = np.where(zero, 1.0, n[0])
        return n

    def _gamma(self, n):
        raise NotImplementedError

    def _grad(self, n):
        raise NotImplementedError

    def theta_form(self) -> ThetaForm:
        raise UnsupportedOperationError(f"{type(self).__name__} has no polar-angle form")

    def _tangential(self, n: np.ndarray) -> np.ndarray:
        """(I - n n^T) grad gamma(n) for unit n."""
        g = self._grad(n)
        return g - np.sum(n * g, axis=0) * n

    def _prepare(self, p):
        p = _components(p, self.dim)
        sq = np.sum(p * p, axis=0)
        norm = np.sqrt(sq)
        zero = norm == 0.0
        n = p / np.where(zero, 1.0, norm)
        if np.any(zero):
            n[0] = np.where(zero, 1.0, n[0])
        return p, sq, norm, zero, n

    def flux(self, p, a: float = 0.0) -> np.ndarray:
        """(gamma^2(n) - a) p + gamma(n) |p| (I - n n^T) grad gamma(n), with n = p/|p|.

        Nodes with p = 0 get a zero flux.
        """
        return self.density_and_flux(p, a)[1]

    def energy_density(self, p) -> np.ndarray:
        """gamma^2(p/|p|) |p|^2, zero where p = 0."""
        p, sq, _, zero, n = self._prepare(p)
        g = self._gamma(n)
        return np.where(zero, 0.0, g * g * sq)

    def density_and_flux(self, p, a: float = 0.0):
        """Both ``energy_density(p)`` and ``flux(p, a)`` from one evaluation of gamma."""
        p, sq, norm, zero, n = self._prepare(p)
        g = self._gamma(n)
        g2 = g * g
        out = (g2 - a) * p + (g * norm) * self._tangential(n)
        dens = g2 * sq
        if np.any(zero):
            out = np.where(zero, 0.0, out)
            dens = np.where(zero, 0.0, dens)
        return dens, out

    def polar_hessian_bound(self, samples: int = 2048) -> float:
        """Max spectral norm of the Hessian of gamma^2(p/|p|)|p|^2, from the polar form.

        In the (e_r, e_theta) frame the Hessian of r^2 g(theta), g = gamma^2,
        is [[2g, g'], [g', 2g + g'']].
        """
        tf = self.theta_form()
        t = np.linspace(0, 2 * np.pi, samples, endpoint=False)
        gam, d1, d2 = tf.gamma(t), tf.dgamma(t), tf.d2gamma(t)
        g = gam * gam
        g1 = 2 * gam * d1
        g2 = 2 * (d1 * d1 + gam * d2)
        tr_half = (4 * g + g2) / 2
        rad = np.sqrt(((g2) / 2) ** 2 + g1 ** 2)
        return float(np.max(np.maximum(np.abs(tr_half + rad), np.abs(tr_half - rad))))


@dataclass(frozen=True)
class Isotropic(AnisotropyModel):
    dim: int = 2
    recommended_a: float = 10.0

    def _gamma(self, n):
        n = _components(n, self.dim)
        return np.ones(n.shape[1:])

    def _grad(self, n):
        return np.zeros_like(_components(n, self.dim))

    def _tangential(self, n):
        return np.zeros_like(n)

    def theta_form(self):
        if self.dim != 2:
            return super().theta_form()
        return ThetaForm(lambda t: np.ones_like(np.asarray(t, float)),
                         lambda t: np.zeros_like(np.asarray(t, float)),
                         lambda t: np.zeros_like(np.asarray(t, float)))


@dataclass(frozen=True)
class FourFold(AnisotropyModel):
    """gamma(n) = 1 + alpha (4 sum n_i^4 - 3)."""

    alpha: float = 0.2
    dim: int = 2
    recommended_a: float = 10.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError("alpha must be non-negative")
        if self.dim not in (2, 3):
            raise ConfigurationError("dim must be 2 or 3")
        # minimum over the sphere is 1 - 3 alpha (2D) or 1 - 5 alpha/3 (3D)
        gmin = 1 - self.alpha if self.dim == 2 else 1 - 5 * self.alpha / 3
        if gmin <= 0:
            raise ConfigurationError(f"alpha={self.alpha} makes gamma non-positive")

    def _gamma(self, n):
        n = _components(n, self.dim)
        n2 = n * n
        return 1.0 + self.alpha * (4.0 * np.sum(n2 * n2, axis=0) - 3.0)

    def _grad(self, n):
        n = _components(n, self.dim)
        return 16.0 * self.alpha * (n * n * n)

    def theta_form(self):
        if self.dim != 2:
            return super().theta_form()
        return KFold(self.alpha, 4).theta_form()


@dataclass(frozen=True)
class KFold(AnisotropyModel):
    """gamma(theta) = 1 + alpha cos(k theta), tan theta = n2/n1 (2D only)."""

    alpha: float = 0.2
    k: int = 4
    recommended_a: float = 10.0
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise ConfigurationError("k-fold anisotropy needs 0 <= alpha < 1")
        if int(self.k) != self.k or self.k < 1:
            raise ConfigurationError("k must be a positive integer")
        # keep H concave: a must dominate half the Hessian bound of gamma^2 |p|^2
        need = self.polar_hessian_bound() / 2
        if need > self.recommended_a:
            object.__setattr__(self, "recommended_a", float(10 * np.ceil(need / 10)))

    def _gamma(self, n):
        n = _components(n, 2)
        return 1.0 + self.alpha * np.cos(self.k * np.arctan2(n[1], n[0]))

    def _dgamma_theta(self, n):
        return -self.alpha * self.k * np.sin(self.k * np.arctan2(n[1], n[0]))

    def _grad(self, n):
        # gradient of the degree-0 extension gamma(n/|n|)
        n = _components(n, 2)
        r2 = n[0] * n[0] + n[1] * n[1]
        d = self._dgamma_theta(n) / np.where(r2 == 0, 1.0, r2)
        return np.stack([-n[1] * d, n[0] * d])

    def _tangential(self, n):
        d = self._dgamma_theta(n)
        return np.stack([-n[1] * d, n[0] * d])

    def theta_form(self):
        a, k = self.alpha, self.k
        return ThetaForm(lambda t: 1.0 + a * np.cos(k * np.asarray(t, float)),
                         lambda t: -a * k * np.sin(k * np.asarray(t, float)),
                         lambda t: -a * k * k * np.cos(k * np.asarray(t, float)))


def _rotation(psi):
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[c, s], [-s, c]])


def _quadratic_theta_form(mats) -> ThetaForm:
    """Polar-angle form of sum_k sqrt(n^T G_k n)."""
    def parts(t):
        t = np.asarray(t, float)
        n = np.stack([np.cos(t), np.sin(t)])
        tan = np.stack([-np.sin(t), np.cos(t)])
        out = []
        for G in mats:
            Gn = np.einsum("ij,j...->i...", G, n)
            Gt = np.einsum("ij,j...->i...", G, tan)
            q = np.sum(n * Gn, axis=0)
            dq = 2 * np.sum(tan * Gn, axis=0)
            d2q = 2 * (np.sum(tan * Gt, axis=0) - q)
            out.append((q, dq, d2q))
        return out

    def g(t):
        return sum(np.sqrt(q) for q, _, _ in parts(t))

    def dg(t):
        return sum(dq / (2 * np.sqrt(q)) for q, dq, _ in parts(t))

    def d2g(t):
        return sum(d2q / (2 * np.sqrt(q)) - dq ** 2 / (4 * q ** 1.5) for q, dq, d2q in parts(t))

    return ThetaForm(g, dg, d2g)


@dataclass(frozen=True)
class Riemannian(AnisotropyModel):
    """gamma(n) = sum_k sqrt(G_k n . n), G_k = R(-psi_k) D(delta_k) R(psi_k) (2D)."""

    psis: tuple = (0.0, np.pi / 2)
    deltas: tuple = (0.1, 0.1)
    recommended_a: float = field(default=None)
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        if len(self.psis) != len(self.deltas) or not self.psis:
            raise ConfigurationError("psis and deltas must be non-empty and equally long")
        if any(d <= 0 for d in self.deltas):
            raise ConfigurationError("all deltas must be positive")
        object.__setattr__(self, "psis", tuple(float(p) for p in self.psis))
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        object.__setattr__(self, "_mats", tuple(
            _rotation(-p) @ np.diag([1.0, d * d]) @ _rotation(p)
            for p, d in zip(self.psis, self.deltas)))
        if self.recommended_a is None:
            # splitting constants used with delta^2 = 1e-2, 1e-3, 1e-4
            # compare with a relative slack so sqrt(1e-3)**2 still counts as 1e-3
            d2 = min(self.deltas) ** 2 * (1 + 1e-9)
            a = 10.0 if d2 >= 1e-2 else 50.0 if d2 >= 1e-3 else 100.0
            object.__setattr__(self, "recommended_a", a)

    @classmethod
    def symmetric(cls, K: int, delta: float, **kw) -> "Riemannian":
        """K equally spaced metric terms, psi_k = (k-1) pi / K."""
        return cls(tuple(np.pi * j / K for j in range(K)), (delta,) * K, **kw)

    @property
    def metrics(self) -> tuple[np.ndarray, ...]:
        return self._mats

    def _gamma(self, n):
        n = _components(n, 2)
        total = 0.0
        for G in self.metrics:
            Gn = np.einsum("ij,j...->i...", G, n)
            total = total + np.sqrt(np.sum(n * Gn, axis=0))
        return np.asarray(total)

    def _grad(self, n):
        n = _components(n, 2)
        total = np.zeros_like(n)
        for G in self.metrics:
            Gn = np.einsum("ij,j...->i...", G, n)
            total += Gn / np.sqrt(np.sum(n * Gn, axis=0))
        return total

    def theta_form(self):
        return _quadratic_theta_form(self.metrics)


@dataclass(frozen=True, eq=False)
class Ellipsoidal(AnisotropyModel):
    """gamma(n) = sqrt(R n . n) for a symmetric positive-definite R."""

    R: np.ndarray = field(default_factory=lambda: np.diag([2.0, 1.0, 1.0]))
    recommended_a: float = 10.0
    dim: int = field(default=3, init=False)

    def __post_init__(self):
        R = np.array(self.R, dtype=float)
        if R.ndim != 2 or R.shape[0] != R.shape[1] or R.shape[0] not in (2, 3):
            raise ConfigurationError("R must be a 2x2 or 3x3 matrix")
        if not np.allclose(R, R.T):
            raise ConfigurationError("R must be symmetric")
        if np.linalg.eigvalsh(R).min() <= 0:
            raise ConfigurationError("R must be positive definite")
        R.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "dim", R.shape[0])

    def __eq__(self, other):
        return isinstance(other, Ellipsoidal) and np.array_equal(self.R, other.R)

    def __hash__(self):
        return hash(self.R.tobytes())

    def _gamma(self, n):
        n = _components(n, self.dim)
        Rn = np.einsum("ij,j...->i...", self.R, n)
        return np.sqrt(np.sum(n * Rn, axis=0))

    def _grad(self, n):
        n = _components(n, self.dim)
        Rn = np.einsum("ij,j...->i...", self.R, n)
        return Rn / np.sqrt(np.sum(n * Rn, axis=0))

    def theta_form(self):
        if self.dim != 2:
            return super().theta_form()
        return _quadratic_theta_form([self.R])

"""Initial phase fields."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from ..grid import GridSpec

# fixed interface width of the benchmark circle, independent of eps
CIRCLE_WIDTH = 2.0 * np.sqrt(2.0) * 1e-2


def _radius(spec: GridSpec, center) -> np.ndarray:
    coords = spec.mesh()
    return np.sqrt(sum((c - x0) ** 2 for c, x0 in zip(coords, center)))


def make_initial(kind: str, spec: GridSpec, eps: float, seed: int = 0) -> np.ndarray:
    """Initial field of the given kind on ``spec``.

    circle       -tanh((r - 0.3) / (2 sqrt(2) 1e-2)) around (0.5, 0.5)
    two_circles  sum of two tanh discs (radii 0.25 and 0.16, width eps) plus 1
    random       -0.5 + 1e-3 U(0, 1), PCG64 seeded with ``seed``
    ball         -tanh((r - 0.3) / (sqrt(2) eps)) around the cube centre (3D)
    """
    if kind == "circle":
        if spec.dim != 2:
            raise ConfigurationError("circle initial condition is 2D; use 'ball' in 3D")
        return -np.tanh((_radius(spec, (0.5, 0.5)) - 0.3) / CIRCLE_WIDTH)
    if kind == "two_circles":
        if spec.dim != 2:
            raise ConfigurationError("two_circles initial condition is 2D only")
        return (-np.tanh((_radius(spec, (0.4, 0.6)) - 0.25) / eps)
                - np.tanh((_radius(spec, (0.8, 0.2)) - 0.16) / eps) + 1.0)
    if kind == "random":
        rng = np.random.Generator(np.random.PCG64(seed))
        return -0.5 + 1e-3 * rng.random(spec.shape)
    if kind == "ball":
        if spec.dim != 3:
            raise ConfigurationError("ball initial condition is 3D only")
        return -np.tanh((_radius(spec, (0.5, 0.5, 0.5)) - 0.3) / (np.sqrt(2.0) * eps))
    raise ConfigurationError(f"unknown initial condition {kind!r}")

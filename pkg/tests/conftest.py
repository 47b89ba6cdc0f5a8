"""Shared fixtures and dense-matrix oracles for small grids."""

from __future__ import annotations

import numpy as np
import pytest

from escdys.grid import GridSpec


def dense_D(m: int) -> np.ndarray:
    """1D periodic one-sided difference matrix, (D phi)_i = (phi_{i+1} - phi_i) / h."""
    D = -np.eye(m) + np.eye(m, k=1)
    D[-1, 0] = 1.0
    return D * m


def dense_grad(spec: GridSpec) -> list[np.ndarray]:
    """Dense D_x, D_y[, D_z] acting on the flattened field (x fastest)."""
    m = spec.m
    D, I = dense_D(m), np.eye(m)
    if spec.dim == 2:
        return [np.kron(I, D), np.kron(D, I)]
    return [np.kron(I, np.kron(I, D)), np.kron(I, np.kron(D, I)), np.kron(D, np.kron(I, I))]


def dense_L(spec: GridSpec) -> np.ndarray:
    return sum(Dc.T @ Dc for Dc in dense_grad(spec))


def smooth_field(spec: GridSpec, rng: np.random.Generator, modes: int = 3,
                 amplitude: float = 0.8) -> np.ndarray:
    """Random trigonometric polynomial with a few low modes, scaled to +-amplitude."""
    coords = spec.mesh()
    out = np.zeros(spec.shape)
    for _ in range(modes):
        k = rng.integers(1, 3, size=spec.dim)
        ph = rng.uniform(0, 2 * np.pi)
        out += rng.normal() * np.cos(2 * np.pi * sum(kc * c for kc, c in zip(k, coords)) + ph)
    out += 0.3 * rng.normal()
    return amplitude * out / np.max(np.abs(out))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def smooth_polar(nodes, rng, amp, modes=(1, 2, 3)):
    """Random smooth rotationally symmetric field, sup-normalised to amp."""
    f = np.zeros_like(nodes)
    for m in modes:
        f += rng.normal() * np.cos(m * nodes)
    return amp * f / np.abs(f).max()


def smooth_torus(grid, rng, amp, kmax=1):
    """Random smooth periodic field from low wavenumbers, sup-normalised."""
    x, y, z = grid.coordinates()
    L = grid.length
    f = np.zeros(grid.shape)
    for _ in range(3):
        kx, ky, kz = rng.integers(-kmax, kmax + 1, size=3)
        ph = rng.uniform(0, 2 * np.pi)
        f += rng.normal() * np.cos(2 * np.pi * (kx * x + ky * y + kz * z) / L + ph)
    return amp * f / (np.abs(f).max() + 1e-300)

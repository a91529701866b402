import math

import numpy as np
import pytest

from csmap.manifold import SPHERE, MapField, Q_DEFAULT, exp_map
from csmap.spectral import GridSpec

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])


@pytest.fixture(scope="session")
def grid64():
    return GridSpec(64, 2.0 * math.pi)


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(32, 2.0 * math.pi)


def two_bump_map(grid, target=SPHERE, amp=0.2):
    """Two independent tangent bumps, kept clear of the torus seam so the
    spectra decay to roundoff before the boundary."""
    X1, X2 = grid.coords()
    c = grid.L / 2.0
    scale = grid.L / (2.0 * math.pi)
    b1 = amp * np.exp(-((X1 - c) ** 2 + (X2 - c) ** 2)
                      / (2.0 * (0.45 * scale) ** 2))
    b2 = 0.8 * amp * np.exp(-((X1 - c - 0.4 * scale) ** 2
                              + (X2 - c + 0.3 * scale) ** 2)
                            / (2.0 * (0.35 * scale) ** 2))
    v = b1[..., None] * E1 + b2[..., None] * E2
    return MapField(grid, target, exp_map(Q_DEFAULT, v, target))


def centered_wave_packet(grid, k1=5.0, k2=-3.0, sigma_frac=1 / 16):
    """Smooth complex field localized at the domain center; spatial tails
    and spectral tails both below ~1e-12."""
    X1, X2 = grid.coords()
    c = grid.L / 2.0
    sig = grid.L * sigma_frac
    env = np.exp(-((X1 - c) ** 2 + (X2 - c) ** 2) / (2.0 * sig ** 2))
    return env * np.exp(1j * (k1 * X1 + k2 * X2))

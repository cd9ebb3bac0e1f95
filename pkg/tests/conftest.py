import numpy as np
import pytest

from whinit.signals import FrequencyGrid, SignalKind, design_multisine
from whinit.wh_sim import PolynomialNonlinearity, RationalTF, WhModel


@pytest.fixture
def toy_coupled_spec():
    """Small odd phase-coupled design: N=512, d=10, s=42, 4 couples."""
    return design_multisine(
        SignalKind.ODD_COUPLED, FrequencyGrid(512), d=10, c_shift=4, i_max=3
    )


@pytest.fixture
def toy_model():
    """Low-order stable cascade with a cubic nonlinearity."""
    r = RationalTF(np.array([0.3, 0.15]), np.array([1.0, -0.5]))
    s = RationalTF(np.array([0.25, 0.1]), np.array([1.0, -0.3, 0.1]))
    f = PolynomialNonlinearity(np.array([0.0, 1.0, 0.0, 0.4]))
    return WhModel(r, f, s)


def random_stable_tf(rng, order, max_radius=0.9):
    """Random real-coefficient all-pole-plus-zeros stable transfer function."""
    n_pairs = order // 2
    poles = []
    for _ in range(n_pairs):
        rad = rng.uniform(0.3, max_radius)
        ang = rng.uniform(0.1, np.pi - 0.1)
        poles.extend([rad * np.exp(1j * ang), rad * np.exp(-1j * ang)])
    if order % 2:
        poles.append(complex(rng.uniform(-max_radius, max_radius)))
    den = np.real(np.poly(poles))
    num = rng.uniform(-1.0, 1.0, size=order + 1)
    return RationalTF(num, den)

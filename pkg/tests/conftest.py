import numpy as np
import pytest

from geolp import foliation as fl
from geolp import heat
from geolp import surface as sf


@pytest.fixture(scope="session")
def flat16():
    grid, metric = sf.build_torus_metric(16, "flat")
    return metric


@pytest.fixture(scope="session")
def conformal16():
    grid, metric = sf.build_torus_metric(16, {"recipe": "conformal", "amplitude": 0.1, "modes": 1})
    return metric


@pytest.fixture(scope="session")
def conformal16_bases(conformal16):
    return {0: heat.eigendecompose(conformal16, 0), 1: heat.eigendecompose(conformal16, 1)}


@pytest.fixture(scope="session")
def flat16_basis(flat16):
    return heat.eigendecompose(flat16, 0)


@pytest.fixture(scope="session")
def fol_small():
    """Perturbed cone on the flat torus substrate, desk-small."""
    cfg = fl.perturbed_cone(20.0, {"kind": "torus", "n": 12, "spec": "flat"},
                            eps=0.02, seed=11, n_s=16)
    return fl.build_foliation(cfg)


@pytest.fixture(scope="session")
def cone_small():
    cfg = fl.minkowski_cone(2.0, {"kind": "sphere", "l_max": 12}, n_s=16)
    return fl.build_foliation(cfg)


def band_limited_scalar(metric, seed=0, modes=3):
    rng = np.random.default_rng(seed)
    n = metric.n
    w1, w2 = metric.grid.axes
    f = np.zeros((n, n))
    for m1 in range(-modes, modes + 1):
        for m2 in range(0, modes + 1):
            if m2 == 0 and m1 <= 0:
                continue
            f += rng.normal() / (1 + m1 * m1 + m2 * m2) * np.cos(m1 * w1 + m2 * w2 + rng.uniform(0, 6.3))
    return sf.TensorField(f)


def band_limited_oneform(metric, seed=0, modes=3):
    a = band_limited_scalar(metric, seed, modes)
    b = band_limited_scalar(metric, seed + 101, modes)
    return sf.TensorField(np.stack([a.components, b.components], axis=-1), 1)

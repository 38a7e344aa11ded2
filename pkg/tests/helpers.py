"""Random valid configurations shared by the property and acceptance tests.

Power is chosen through the handover probability it produces, so every draw
lands inside the regime where the closed forms are probabilities.
"""

import math

import numpy as np

from smallcell import CellGeometry, TrafficModel, UniformSpeed, ho_constants


def power_for(geom, traffic, speed, x):
    """Power at which ``C_h * delta - mu * s_h`` equals ``x``."""
    c = ho_constants(geom, traffic)
    mus = traffic.job_rate * traffic.ho_bytes
    return (x + mus) / (geom.half_length ** (1 - geom.pathloss_exp) * speed.mean_inverse() * c.c_h_ho)


def make_config(beta, d0, n, stretch, mu, sh_frac, v_min, v_ratio, lam, servers, x_frac,
                probs=None):
    """Build ``(geom, traffic, speed, power)`` from unit-free draws."""
    geom = CellGeometry(n * d0 * stretch, n, None, d0, beta)
    sh = sh_frac * min(0.8, 0.2 / mu)
    traffic = TrafficModel(lam, mu, sh, servers, probs)
    speed = UniformSpeed(v_min, v_min * v_ratio)
    mus = mu * sh
    power = power_for(geom, traffic, speed, x_frac * (1 - mus))
    return geom, traffic, speed, power


def random_config(rng: np.random.Generator, n_max=6, ho=True, skew=False):
    n = int(rng.integers(1, n_max + 1))
    probs = None
    if skew:
        probs = tuple(rng.dirichlet(np.linspace(0.2, 3.0, 2 * n)))
    return make_config(
        beta=rng.uniform(2.0, 4.0), d0=rng.uniform(2.0, 10.0), n=n, stretch=rng.uniform(1.3, 6.0),
        mu=rng.uniform(0.05, 0.5), sh_frac=rng.uniform(0.05, 1.0) if ho else 0.0,
        v_min=rng.uniform(5.0, 25.0), v_ratio=rng.uniform(1.2, 4.0), lam=rng.uniform(1e-3, 5e-2),
        servers=int(rng.integers(1, 61)), x_frac=rng.uniform(0.05, 0.95), probs=probs,
    )


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def fmt(x):
    return f"{x:.4g}" if isinstance(x, float) and math.isfinite(x) else str(x)

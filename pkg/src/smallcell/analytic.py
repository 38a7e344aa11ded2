"""Closed-form performance chain for one cell of a linear small-cell network.

Geometry, traffic and transmit power map to handover probabilities, service
times, the handover arrival rate, the load factor and the Erlang-B busy
probability. All functions are pure.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ApproximationWarning, InvalidArgument, RegimeViolation, UnsupportableVelocity
from .model import CellGeometry, SpeedModel, TrafficModel, UniformSpeed, region_indices

# psi_n above this is outside the range where 1 - exp(-x) ~ x is trustworthy
LINEARISATION_WARN = 0.3


def attenuation(d, geom: CellGeometry):
    """``min(1, (d / d0) ** -beta)``; works on scalars and arrays."""
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore"):
        far = (d / geom.lossless_radius) ** (-geom.pathloss_exp)
    return np.where(d <= geom.lossless_radius, 1.0, far)


def capacity_rate(d: float, power: float, geom: CellGeometry) -> float:
    """Low-SNR capacity at distance ``d`` for normalised power ``power``."""
    if d < 0:
        raise InvalidArgument(f"distance must be non-negative, got {d}")
    if power <= 0:
        raise InvalidArgument(f"power must be positive, got {power}")
    if d <= geom.lossless_radius:
        return float(power)
    return float(power * geom.r0 * d ** (-geom.pathloss_exp))


def region_rates(geom: CellGeometry, power: float) -> np.ndarray:
    """Rate of each region ``1..N``: the capacity at its outer edge."""
    L, beta = geom.half_length, geom.pathloss_exp
    return geom.r0 * power * L ** (-beta) * geom.phi ** (-beta)


def _suffix_sums(geom: CellGeometry) -> np.ndarray:
    """``sum_{m >= n, m in regions} phi_|m|^-beta`` for every signed region ``n``."""
    labels = region_indices(geom.n_regions)
    w = geom.phi[np.abs(labels) - 1] ** (-geom.pathloss_exp)
    return np.cumsum(w[::-1])[::-1]


def _region_position(n: int, n_regions: int) -> int:
    if n == 0 or abs(n) > n_regions:
        raise InvalidArgument(f"region index must be in -{n_regions}..-1, 1..{n_regions}, got {n}")
    return n + n_regions if n < 0 else n + n_regions - 1


def _bytes_coefficient(n: int, geom: CellGeometry, power: float) -> float:
    """``(L/N) * sum of rates from region n to the boundary`` (bytes per unit 1/V)."""
    pos = _region_position(n, geom.n_regions)
    L, beta = geom.half_length, geom.pathloss_exp
    return L / geom.n_regions * geom.r0 * power * L ** (-beta) * _suffix_sums(geom)[pos]


def completion_prob(n: int, geom: CellGeometry, power: float, speed: SpeedModel,
                    job_rate: float) -> float:
    """Probability that a call born in region ``n`` finishes before the cell edge.

    Linearised form; clamped to [0, 1] with a warning when it is not small.
    """
    psi = job_rate * _bytes_coefficient(n, geom, power) * speed.mean_inverse()
    if psi > LINEARISATION_WARN:
        warnings.warn(f"completion probability {psi:.3g} is outside the linear regime",
                      ApproximationWarning, stacklevel=2)
    return float(min(max(psi, 0.0), 1.0))


def completion_prob_exact(n: int, geom: CellGeometry, power: float, speed: SpeedModel,
                          job_rate: float) -> float:
    """``1 - E[exp(-mu * bytes(n) / V)]`` without linearisation."""
    c = job_rate * _bytes_coefficient(n, geom, power)
    if c == 0:
        return 0.0
    if isinstance(speed, UniformSpeed):
        # antiderivative of exp(-c/v) is v*exp(-c/v) - c*E1(c/v)
        def anti(v):
            return v * math.exp(-c / v) - c * special.exp1(c / v)

        laplace = (anti(speed.v_max) - anti(speed.v_min)) / (speed.v_max - speed.v_min)
    else:
        laplace = speed.expect(lambda v: np.exp(-c / v))
    return float(1.0 - laplace)


@dataclass(frozen=True)
class HoConstants:
    c_e_ho: float
    c_h_ho: float
    c_b_e: float
    c_b_h: float = 2.0

    def optimum_exists(self, job_rate: float, ho_bytes: float) -> bool:
        return self.c_h_ho - job_rate * ho_bytes * self.c_e_ho > 0


def ho_constants(geom: CellGeometry, traffic: TrafficModel) -> HoConstants:
    N = geom.n_regions
    pi = traffic.probs(N)
    suffix = _suffix_sums(geom)
    scale = traffic.job_rate / N * geom.r0
    labels = region_indices(N)
    signed_phi = np.sign(labels) * geom.phi[np.abs(labels) - 1]
    return HoConstants(
        c_e_ho=float(scale * np.dot(pi, suffix)),
        c_h_ho=float(scale * suffix[0]),
        c_b_e=float(np.dot(pi, 1.0 - signed_phi)),
    )


def _delta(geom: CellGeometry, power: float, inv_speed: float) -> float:
    return power * geom.half_length ** (1 - geom.pathloss_exp) * inv_speed


def ho_probabilities(geom: CellGeometry, traffic: TrafficModel, power: float,
                     speed: SpeedModel) -> tuple[float, float]:
    """``(P_e_ho, P_h_ho)``: probability a new / handed-over call is handed over again."""
    c = ho_constants(geom, traffic)
    delta = _delta(geom, power, speed.mean_inverse())
    p_e = 1.0 - delta * c.c_e_ho
    p_h = 1.0 - (c.c_h_ho * delta - traffic.job_rate * traffic.ho_bytes)
    for name, val in (("P_e_ho", p_e), ("P_h_ho", p_h)):
        if not 0.0 <= val <= 1.0:
            raise RegimeViolation(f"{name} = {val:.6g} lies outside [0, 1]", value=val)
    return p_e, p_h


def service_times(geom: CellGeometry, traffic: TrafficModel,
                  speed: SpeedModel) -> tuple[float, float]:
    """Mean time in the cell for new calls and for handed-over calls (seconds)."""
    c = ho_constants(geom, traffic)
    base = geom.half_length * speed.mean_inverse()
    return c.c_b_e * base, c.c_b_h * base


def _ho_denominator(c: HoConstants, delta: float, traffic: TrafficModel, label="") -> float:
    den = delta * c.c_h_ho - traffic.job_rate * traffic.ho_bytes
    if den <= 0:
        raise UnsupportableVelocity(
            f"{label}handover overhead cannot be carried: P L^(1-beta) E[1/V] C_h_ho - mu s_h "
            f"= {den:.6g} <= 0 (speed exceeds the velocity limit for this power)",
            label=label or None,
        )
    return den


def ho_rate(geom: CellGeometry, traffic: TrafficModel, power: float,
            speed: SpeedModel) -> float:
    """Handover arrival rate into a cell (calls per second)."""
    c = ho_constants(geom, traffic)
    delta = _delta(geom, power, speed.mean_inverse())
    den = _ho_denominator(c, delta, traffic)
    return traffic.arrival_density * geom.half_length * (1.0 - delta * c.c_e_ho) / den


def _class_term(c: HoConstants, delta: float, traffic: TrafficModel, label="") -> float:
    den = _ho_denominator(c, delta, traffic, label)
    return c.c_b_e + c.c_b_h * (1.0 - delta * c.c_e_ho) / den


def load_factor(geom: CellGeometry, traffic: TrafficModel, power: float,
                speed: SpeedModel) -> float:
    c = ho_constants(geom, traffic)
    inv = speed.mean_inverse()
    L = geom.half_length
    term = _class_term(c, _delta(geom, power, inv), traffic)
    return traffic.arrival_density * L**2 * inv / traffic.servers * term


def load_factor_classes(geom: CellGeometry, traffic: TrafficModel, classes) -> float:
    """Load factor when class ``i`` (probability ``p``, ``E[1/V|i]``) gets power ``P``.

    ``classes`` is an iterable of ``(p, cond_inv_speed, power)`` triples.
    """
    c = ho_constants(geom, traffic)
    L = geom.half_length
    total = 0.0
    for i, (p, ups, power) in enumerate(classes):
        delta = _delta(geom, power, ups)
        total += p * ups * _class_term(c, delta, traffic, label=f"class {i + 1}: ")
    return traffic.arrival_density * L**2 / traffic.servers * total


def load_factor_continuous(geom: CellGeometry, traffic: TrafficModel, policy,
                           speed: SpeedModel, check_points: int = 513) -> float:
    """Load factor under a speed-dependent power law, by quadrature over ``V``.

    ``policy`` needs an ``evaluate(v)`` method returning the power at speed ``v``.
    """
    c = ho_constants(geom, traffic)
    L, beta = geom.half_length, geom.pathloss_exp
    mus = traffic.job_rate * traffic.ho_bytes
    scale = L ** (1 - beta)

    grid = np.linspace(speed.v_min, speed.v_max, check_points)
    den = np.asarray(policy.evaluate(grid)) * scale * c.c_h_ho / grid - mus
    if np.any(den <= 0):
        v_bad = float(grid[np.argmax(den <= 0)])
        raise UnsupportableVelocity(
            f"power law cannot carry the handover overhead at v = {v_bad:.6g} m/s",
            speed=v_bad,
        )

    def integrand(v):
        a = float(policy.evaluate(v)) * scale / v
        return (c.c_b_e + c.c_b_h * (1.0 - a * c.c_e_ho) / (a * c.c_h_ho - mus)) / v

    return traffic.arrival_density * L**2 / traffic.servers * speed.expect(integrand)


def erlang_b(rho, servers: int):
    """Erlang loss probability via ``B_k = rho B_{k-1} / (k + rho B_{k-1})``."""
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr < 0):
        raise InvalidArgument("load must be non-negative")
    if int(servers) != servers or servers < 1:
        raise InvalidArgument("servers must be a positive integer")
    b = np.ones_like(rho_arr)
    for k in range(1, int(servers) + 1):
        b = rho_arr * b / (k + rho_arr * b)
    return float(b) if b.ndim == 0 else b


def analytic_metrics(geom: CellGeometry, traffic: TrafficModel, power: float,
                     speed: SpeedModel) -> dict:
    """Every closed-form metric for an equal-power cell, keyed by name."""
    p_e, p_h = ho_probabilities(geom, traffic, power, speed)
    b_e, b_h = service_times(geom, traffic, speed)
    rho = load_factor(geom, traffic, power, speed)
    return {
        "p_e_ho": p_e,
        "p_h_ho": p_h,
        "b_e": b_e,
        "b_h": b_h,
        "ho_rate": ho_rate(geom, traffic, power, speed),
        "rho": rho,
        "p_busy": erlang_b(rho, traffic.servers),
    }

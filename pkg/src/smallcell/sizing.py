"""Cell-size selection under beta+ power scaling.

The power budget grows as ``p_tilde * L**(beta + gamma)`` and the joint cost
adds a penalty on total transmitted power to the optimal-law load factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import ho_constants
from .errors import InvalidArgument, PreconditionError, UnsupportableVelocity
from .model import CellGeometry, SpeedModel, TrafficModel
from .power import rho_at_optimum, rho_constants

INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class ScalingSpec:
    p_tilde: float
    gamma: float
    omega_p: float = 0.0

    def __post_init__(self):
        if self.p_tilde <= 0:
            raise InvalidArgument("p_tilde must be positive")
        if self.omega_p < 0:
            raise InvalidArgument("omega_p must be non-negative")

    def budget(self, L: float, beta: float) -> float:
        return self.p_tilde * L ** (beta + self.gamma)


def joint_cost(L: float, geom: CellGeometry, traffic: TrafficModel, speed: SpeedModel,
               scaling: ScalingSpec) -> float:
    """Optimal-law load factor plus ``omega_p * p_tilde * L**(beta + gamma - 1)``.

    ``geom`` is a template; its half length is replaced by ``L``.
    """
    if L <= geom.n_regions * geom.lossless_radius:
        raise InvalidArgument(f"L = {L} must exceed N * d0 = {geom.n_regions * geom.lossless_radius}")
    g = geom.with_length(L)
    beta = geom.pathloss_exp
    rho = rho_at_optimum(g, traffic, speed, scaling.budget(L, beta))
    return rho + scaling.omega_p * scaling.p_tilde * L ** (beta + scaling.gamma - 1)


def cost_coefficients(geom: CellGeometry, traffic: TrafficModel, speed: SpeedModel,
                      scaling: ScalingSpec) -> tuple[float, float, float, float]:
    """``(C1, C2, C3, C4)`` with ``cost = C1 L^2 + C2 L^2/(L^(gamma+1) - C3) + C4 L^(beta+gamma-1)``."""
    c = ho_constants(geom, traffic)
    c1, c2 = rho_constants(c, traffic.job_rate, traffic.ho_bytes)
    lam_k = traffic.arrival_density / traffic.servers
    mus = traffic.job_rate * traffic.ho_bytes
    return (
        lam_k * c1 * speed.mean_inverse(),
        lam_k * c2 / (scaling.p_tilde * c.c_h_ho),
        speed.mean() * mus / (scaling.p_tilde * c.c_h_ho),
        scaling.omega_p * scaling.p_tilde,
    )


def joint_cost_polynomial(L, geom, traffic, speed, scaling) -> float:
    c1, c2, c3, c4 = cost_coefficients(geom, traffic, speed, scaling)
    g, beta = scaling.gamma, geom.pathloss_exp
    return c1 * L**2 + c2 * L**2 / (L ** (g + 1) - c3) + c4 * L ** (beta + g - 1)


def optimal_cell_size_closed_form(geom: CellGeometry, traffic: TrafficModel, speed: SpeedModel,
                                  scaling: ScalingSpec) -> float:
    """Minimiser of the joint cost for path-loss exponent 2 and gamma = 1."""
    if geom.pathloss_exp != 2:
        raise PreconditionError(f"closed form needs pathloss_exp == 2, got {geom.pathloss_exp}")
    if scaling.gamma != 1:
        raise PreconditionError(f"closed form needs gamma == 1, got {scaling.gamma}")
    c = ho_constants(geom, traffic)
    c_r1, c_r2 = rho_constants(c, traffic.job_rate, traffic.ho_bytes)
    if c_r1 <= 0:
        raise PreconditionError(f"closed form needs C_rho_1 > 0, got {c_r1:.6g}")
    mus_ev = traffic.job_rate * traffic.ho_bytes * speed.mean()
    inner = c_r1 * speed.mean_inverse() + scaling.omega_p * scaling.p_tilde * traffic.servers / (
        traffic.arrival_density if traffic.arrival_density > 0 else math.inf)
    return math.sqrt(math.sqrt(mus_ev) / (scaling.p_tilde * c.c_h_ho)
                     * (math.sqrt(c_r2 / inner) + math.sqrt(mus_ev)))


@dataclass(frozen=True)
class CellSizeResult:
    half_length: float
    cost: float
    at_boundary: bool
    unimodal: bool


def golden_section(f, a: float, b: float, rtol: float = 1e-6) -> float:
    """Minimiser of a unimodal ``f`` on ``[a, b]`` to relative width ``rtol``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > rtol * max(abs(a), abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimal_cell_size_numeric(geom: CellGeometry, traffic: TrafficModel, speed: SpeedModel,
                              scaling: ScalingSpec, bracket=None, samples: int = 100,
                              rtol: float = 1e-6) -> CellSizeResult:
    """Sample the joint cost on ``bracket``, then refine the best sample by golden section.

    Infeasible sizes (overhead not carried) count as infinite cost. The result
    is flagged when it sits on the bracket edge or the samples are not unimodal.
    """
    floor = geom.n_regions * geom.lossless_radius
    lo, hi = bracket if bracket is not None else (1.01 * floor, 50 * floor)
    if lo <= floor or hi <= lo:
        raise InvalidArgument(f"bracket must satisfy N * d0 = {floor} < lo < hi")

    def cost(L):
        try:
            return joint_cost(L, geom, traffic, speed, scaling)
        except UnsupportableVelocity:
            return math.inf

    grid = np.linspace(lo, hi, samples)
    vals = np.array([cost(L) for L in grid])
    if not np.any(np.isfinite(vals)):
        raise UnsupportableVelocity("joint cost is infinite on the whole bracket")
    k = int(np.argmin(vals))
    finite = vals[np.isfinite(vals)]
    steps = np.sign(np.diff(finite))
    steps = steps[steps != 0]
    unimodal = bool(np.all(np.diff(steps) >= 0))
    # an edge sample may still hide an interior minimum within one step
    L = golden_section(cost, grid[max(k - 1, 0)], grid[min(k + 1, samples - 1)], rtol)
    best = cost(L)
    if best > vals[k]:
        L, best = grid[k], vals[k]
    edge = math.isclose(L, lo, rel_tol=10 * rtol) or math.isclose(L, hi, rel_tol=10 * rtol)
    return CellSizeResult(float(L), float(best), edge, unimodal)

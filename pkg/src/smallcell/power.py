"""Speed-based power laws and their optimality under an average-power budget.

The discrete law assigns one power per speed class, the continuous law is
affine in speed. Both minimise the cell load factor; a brute-force grid search
over the budget simplex is included to check the discrete closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import HoConstants, ho_constants
from .errors import (InsufficientPowerBudget, InvalidArgument, PreconditionError,
                     UnsupportableVelocity, UnsupportedDimension)
from .model import CellGeometry, SpeedModel, TrafficModel, region_indices

DEFAULT_FLOOR_MARGIN = 0.05


@dataclass(frozen=True)
class SpeedClasses:
    """Disjoint speed intervals ``[edges[i], edges[i+1]]`` with their mass and ``E[1/V|i]``."""

    edges: tuple
    probs: tuple
    cond_inv_speed: tuple

    def __post_init__(self):
        if len(self.edges) != len(self.probs) + 1 or len(self.probs) != len(self.cond_inv_speed):
            raise InvalidArgument("inconsistent class sizes")
        if np.any(np.diff(self.edges) <= 0):
            raise InvalidArgument("class edges must be strictly increasing")
        if not math.isclose(sum(self.probs), 1.0, abs_tol=1e-9):
            raise InvalidArgument("class probabilities must sum to 1")

    @classmethod
    def from_edges(cls, speed: SpeedModel, edges) -> "SpeedClasses":
        edges = tuple(float(e) for e in edges)
        if not (math.isclose(edges[0], speed.v_min) and math.isclose(edges[-1], speed.v_max)):
            raise InvalidArgument("class edges must cover [v_min, v_max]")
        probs = [speed.prob(a, b) for a, b in zip(edges[:-1], edges[1:])]
        # renormalise away the quadrature/cdf round-off
        total = sum(probs)
        probs = tuple(p / total for p in probs)
        ups = tuple(speed.cond_mean_inverse(a, b) for a, b in zip(edges[:-1], edges[1:]))
        return cls(edges, probs, ups)

    @classmethod
    def uniform(cls, speed: SpeedModel, n_classes: int) -> "SpeedClasses":
        """``n_classes`` intervals of equal width."""
        return cls.from_edges(speed, np.linspace(speed.v_min, speed.v_max, n_classes + 1))

    @property
    def size(self) -> int:
        return len(self.probs)

    @property
    def midpoints(self) -> np.ndarray:
        e = np.asarray(self.edges)
        return 0.5 * (e[:-1] + e[1:])

    def triples(self, powers):
        return list(zip(self.probs, self.cond_inv_speed, powers))


# ---------------------------------------------------------------- policies


class PowerPolicy:
    """Maps a user speed (m/s) to a normalised transmit power."""

    def evaluate(self, v):
        raise NotImplementedError

    def average(self, speed: SpeedModel) -> float:
        return speed.expect(lambda v: float(self.evaluate(v)))

    def check_positive(self, speed: SpeedModel, points: int = 257):
        grid = np.linspace(speed.v_min, speed.v_max, points)
        vals = np.asarray(self.evaluate(grid))
        if np.any(vals <= 0):
            raise InvalidArgument(
                f"policy assigns non-positive power {vals.min():.4g} at "
                f"v = {grid[np.argmin(vals)]:.4g} m/s"
            )


@dataclass(frozen=True)
class EqualPower(PowerPolicy):
    p_bar: float

    def evaluate(self, v):
        return np.full_like(np.asarray(v, dtype=float), self.p_bar)

    def average(self, speed):
        return self.p_bar


@dataclass(frozen=True)
class DiscretePower(PowerPolicy):
    classes: SpeedClasses
    powers: tuple

    def evaluate(self, v):
        idx = np.searchsorted(np.asarray(self.classes.edges[1:-1]), v, side="right")
        return np.asarray(self.powers)[idx]

    def average(self, speed):
        return float(np.dot(self.classes.probs, self.powers))


@dataclass(frozen=True)
class LinearPower(PowerPolicy):
    """``p_bar + slope * (v - mean_speed)``."""

    p_bar: float
    slope: float
    mean_speed: float

    def evaluate(self, v):
        return self.p_bar + self.slope * (np.asarray(v, dtype=float) - self.mean_speed)

    def average(self, speed):
        # affine, so the mean maps through exactly
        return self.p_bar + self.slope * (speed.mean() - self.mean_speed)


@dataclass(frozen=True)
class AlphaRule(PowerPolicy):
    """``alpha * p_bar + (1 - alpha) * p_bar * v / mean_speed``; alpha = 1 is equal power."""

    p_bar: float
    alpha: float
    mean_speed: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgument(f"alpha must lie in [0, 1], got {self.alpha}")

    def evaluate(self, v):
        v = np.asarray(v, dtype=float)
        return self.alpha * self.p_bar + self.p_bar * (1.0 - self.alpha) * v / self.mean_speed

    def average(self, speed):
        return self.alpha * self.p_bar + self.p_bar * (1.0 - self.alpha) * speed.mean() / self.mean_speed


@dataclass(frozen=True)
class MonomialPower(PowerPolicy):
    """``scale * v ** exponent``."""

    exponent: float
    scale: float

    @classmethod
    def with_budget(cls, speed: SpeedModel, p_bar: float, exponent: float) -> "MonomialPower":
        return cls(exponent, p_bar / speed.moment(exponent))

    def evaluate(self, v):
        return self.scale * np.asarray(v, dtype=float) ** self.exponent


# ------------------------------------------------------------ optimisation


def pv_matrix(probs) -> tuple[np.ndarray, bool]:
    """The ``(I-1) x (I-1)`` Hessian factor ``diag(p) + p p^T / p_I`` and whether it is PD."""
    p = np.asarray(probs, dtype=float)
    if np.any(p <= 0):
        raise InvalidArgument("class probabilities must be positive")
    q = p[:-1]
    m = np.diag(q) + np.outer(q, q) / p[-1]
    if m.size == 0:
        return m, True
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return m, False
    return m, True


def _handover_slope(geom: CellGeometry, traffic: TrafficModel, c: HoConstants) -> float:
    """``mu s_h L^(beta-1) / C_h_ho``: the power increment per unit of speed."""
    if c.c_h_ho == 0:
        return 0.0
    return (traffic.job_rate * traffic.ho_bytes
            * geom.half_length ** (geom.pathloss_exp - 1) / c.c_h_ho)


def class_power_floor(geom: CellGeometry, traffic: TrafficModel, cond_inv_speed) -> np.ndarray:
    """Smallest power at which a class can still carry its handover overhead."""
    c = ho_constants(geom, traffic)
    return _handover_slope(geom, traffic, c) / np.asarray(cond_inv_speed, dtype=float)


def _check_hypothesis(traffic: TrafficModel, c: HoConstants):
    if not c.optimum_exists(traffic.job_rate, traffic.ho_bytes):
        raise PreconditionError(
            f"need C_h_ho - mu s_h C_e_ho > 0, got "
            f"{c.c_h_ho - traffic.job_rate * traffic.ho_bytes * c.c_e_ho:.6g}"
        )


def discrete_optimal_power(geom: CellGeometry, traffic: TrafficModel, classes: SpeedClasses,
                           p_bar: float, floor_margin: float = DEFAULT_FLOOR_MARGIN) -> np.ndarray:
    """Per-class powers minimising the load factor subject to ``sum p_i P_i = p_bar``."""
    c = ho_constants(geom, traffic)
    _check_hypothesis(traffic, c)
    ups = np.asarray(classes.cond_inv_speed)
    probs = np.asarray(classes.probs)
    if np.allclose(ups, ups[0], rtol=1e-14, atol=0):
        powers = np.full(ups.size, float(p_bar))
    else:
        _, pd = pv_matrix(probs)
        if not pd:
            raise PreconditionError("class-probability matrix is not positive definite")
        inv = 1.0 / ups
        powers = p_bar + _handover_slope(geom, traffic, c) * (inv - np.dot(probs, inv))
    floor = class_power_floor(geom, traffic, ups) * (1.0 + floor_margin)
    short = powers <= floor
    if np.any(short):
        i = int(np.argmax(short))
        raise InsufficientPowerBudget(
            f"budget {p_bar} too small: class {i + 1} gets {powers[i]:.6g}, "
            f"needs more than {floor[i]:.6g}"
        )
    return powers


def continuous_optimal_power(geom: CellGeometry, traffic: TrafficModel, speed: SpeedModel,
                             p_bar: float) -> LinearPower:
    """Affine-in-speed power law minimising the load factor for budget ``p_bar``."""
    c = ho_constants(geom, traffic)
    _check_hypothesis(traffic, c)
    policy = LinearPower(p_bar, _handover_slope(geom, traffic, c), speed.mean())
    low = float(policy.evaluate(speed.v_min))
    if low <= 0:
        raise InsufficientPowerBudget(
            f"budget {p_bar} too small: optimal law gives {low:.6g} at v_min"
        )
    return policy


def rho_constants(c: HoConstants, job_rate: float, ho_bytes: float) -> tuple[float, float]:
    """The two coefficients of the load factor at the optimal law."""
    ratio = c.c_e_ho / c.c_h_ho
    return c.c_b_e - c.c_b_h * ratio, c.c_b_h * (1.0 - job_rate * ho_bytes * ratio)


def rho_at_optimum(geom: CellGeometry, traffic: TrafficModel, speed: SpeedModel,
                   p_bar: float) -> float:
    """Load factor achieved by :func:`continuous_optimal_power`."""
    c = ho_constants(geom, traffic)
    L, beta = geom.half_length, geom.pathloss_exp
    c1, c2 = rho_constants(c, traffic.job_rate, traffic.ho_bytes)
    den = p_bar * L ** (1 - beta) * c.c_h_ho - speed.mean() * traffic.job_rate * traffic.ho_bytes
    if den <= 0:
        raise UnsupportableVelocity(
            f"budget {p_bar} cannot carry the handover overhead at the mean speed "
            f"(denominator {den:.6g})"
        )
    return traffic.arrival_density * L**2 / traffic.servers * (c1 * speed.mean_inverse() + c2 / den)


def velocity_limit(geom: CellGeometry, traffic: TrafficModel, power: float) -> float:
    """Largest speed for which the bytes moved across a cell of half length ``N d0``
    still exceed the handover overhead."""
    if traffic.ho_bytes == 0:
        return math.inf
    N, beta = geom.n_regions, geom.pathloss_exp
    labels = region_indices(N)
    weight = np.sum(geom.phi[np.abs(labels) - 1] ** (-beta))
    shortest = N * geom.lossless_radius
    return float(geom.r0 / N * weight * power * shortest ** (1 - beta) / traffic.ho_bytes)


@dataclass(frozen=True)
class GridOptimum:
    powers: np.ndarray
    rho: float
    resolution: float


def _class_terms(geom, traffic, c, p, ups, powers):
    """Vectorised ``p * ups * (C_b_e + C_b_h (1 - d C_e)/(d C_h - mu s_h))``; inf where infeasible."""
    delta = np.asarray(powers) * ups * geom.half_length ** (1 - geom.pathloss_exp)
    den = delta * c.c_h_ho - traffic.job_rate * traffic.ho_bytes
    with np.errstate(divide="ignore", invalid="ignore"):
        val = p * ups * (c.c_b_e + c.c_b_h * (1.0 - delta * c.c_e_ho) / den)
    return np.where(den > 0, val, np.inf)


def oracle_minimize_discrete(geom: CellGeometry, traffic: TrafficModel, classes: SpeedClasses,
                             p_bar: float, resolution: float = 1e-4,
                             chunk: int = 256) -> GridOptimum:
    """Exhaustive grid search for the load-factor minimiser on the budget simplex.

    The first ``I - 1`` powers run over ``floor_i + k * resolution`` and the
    last is fixed by the budget. Ties go to the lowest grid index.
    """
    I = classes.size
    if I > 3:
        raise UnsupportedDimension(f"grid search supports at most 3 classes, got {I}")
    scale = traffic.arrival_density * geom.half_length**2 / traffic.servers
    c = ho_constants(geom, traffic)
    p = np.asarray(classes.probs)
    ups = np.asarray(classes.cond_inv_speed)
    if I == 1:
        rho = float(_class_terms(geom, traffic, c, p[0], ups[0], p_bar)) * scale
        return GridOptimum(np.array([float(p_bar)]), rho, resolution)

    floor = class_power_floor(geom, traffic, ups)

    def last_power(partial):
        return (p_bar - partial) / p[-1]

    def axis(i, spent=0.0):
        hi = (p_bar - spent - p[-1] * floor[-1]) / p[i]
        n = int(math.floor((hi - floor[i]) / resolution))
        return floor[i] + resolution * np.arange(1, max(n, 0) + 1)

    if I == 2:
        g1 = axis(0)
        total = (_class_terms(geom, traffic, c, p[0], ups[0], g1)
                 + _class_terms(geom, traffic, c, p[1], ups[1], last_power(p[0] * g1)))
        k = int(np.argmin(total))
        powers = np.array([g1[k], last_power(p[0] * g1[k])])
        return GridOptimum(powers, float(total[k]) * scale, resolution)

    g1 = axis(0, spent=p[1] * floor[1])
    g2 = axis(1, spent=p[0] * floor[0])
    f1 = _class_terms(geom, traffic, c, p[0], ups[0], g1)
    f2 = _class_terms(geom, traffic, c, p[1], ups[1], g2)
    L1b = geom.half_length ** (1 - geom.pathloss_exp)
    mus = traffic.job_rate * traffic.ho_bytes
    best = (np.inf, -1, -1)
    for start in range(0, g1.size, chunk):
        rows = slice(start, start + chunk)
        # P3 = (p_bar - p1 P1 - p2 P2) / p3, evaluated in place to keep memory flat
        p3 = (p_bar - p[0] * g1[rows])[:, None] - p[1] * g2[None, :]
        p3 /= p[-1]
        delta = p3 * (ups[-1] * L1b)
        den = delta * c.c_h_ho - mus
        with np.errstate(divide="ignore", invalid="ignore"):
            val = c.c_b_h * (1.0 - delta * c.c_e_ho) / den
        val += c.c_b_e
        val *= p[-1] * ups[-1]
        val[den <= 0] = np.inf
        val += f1[rows, None]
        val += f2[None, :]
        k = int(np.argmin(val))
        v = val.flat[k]
        if v < best[0]:
            best = (v, start + k // g2.size, k % g2.size)
    _, i1, i2 = best
    powers = np.array([g1[i1], g2[i2], last_power(p[0] * g1[i1] + p[1] * g2[i2])])
    return GridOptimum(powers, float(best[0]) * scale, resolution)


def first_order_residual(geom: CellGeometry, traffic: TrafficModel, classes: SpeedClasses,
                         powers) -> float:
    """Spread of ``(d rho / d P_i) / p_i`` across classes; zero at a constrained stationary point.

    Used in place of the grid search when there are more than three classes.
    """
    c = ho_constants(geom, traffic)
    L1b = geom.half_length ** (1 - geom.pathloss_exp)
    ups = np.asarray(classes.cond_inv_speed)
    delta = np.asarray(powers) * ups * L1b
    den = delta * c.c_h_ho - traffic.job_rate * traffic.ho_bytes
    # d/dP of ups * (1 - d C_e)/(d C_h - mu s_h) with d = P ups L^(1-beta)
    grad = c.c_b_h * ups * ups * L1b * (traffic.job_rate * traffic.ho_bytes * c.c_e_ho - c.c_h_ho)
    grad = grad / den**2
    scale = abs(grad).max()
    return float((grad.max() - grad.min()) / scale) if scale > 0 else 0.0

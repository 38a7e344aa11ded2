"""Cell geometry, traffic and user-speed models.

Units throughout: metres, seconds, normalised power (transmit power over the
noise variance) and bytes. Speeds are m/s; use :data:`KMPH` to convert.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, stats

from .errors import ApproximationWarning, InvalidArgument

KMPH = 1.0 / 3.6


def region_indices(n_regions: int) -> np.ndarray:
    """Signed region labels ``-N..-1, 1..N`` in travel order."""
    return np.concatenate([np.arange(-n_regions, 0), np.arange(1, n_regions + 1)])


@dataclass(frozen=True)
class CellGeometry:
    """One cell ``[-L, L]`` split into ``2N`` rate regions.

    ``edges[n-1]`` is the outer edge of region ``n`` as a fraction of the half
    length, so region ``n > 0`` spans ``[edges[n-2], edges[n-1]] * L``.
    """

    half_length: float
    n_regions: int = 5
    edges: tuple = None
    lossless_radius: float = 10.0
    pathloss_exp: float = 2.5

    def __post_init__(self):
        if self.edges is None:
            object.__setattr__(
                self, "edges", tuple((i + 1) / self.n_regions for i in range(self.n_regions))
            )
        else:
            object.__setattr__(self, "edges", tuple(float(e) for e in self.edges))
        if self.n_regions < 1:
            raise InvalidArgument("n_regions must be a positive integer")
        if len(self.edges) != self.n_regions:
            raise InvalidArgument(f"expected {self.n_regions} edges, got {len(self.edges)}")
        e = np.asarray(self.edges)
        if e[0] <= 0 or np.any(np.diff(e) <= 0) or e[-1] != 1.0:
            raise InvalidArgument("edges must satisfy 0 < phi_1 < ... < phi_N = 1")
        if self.lossless_radius <= 0:
            raise InvalidArgument("lossless_radius must be positive")
        if self.half_length <= self.n_regions * self.lossless_radius:
            raise InvalidArgument(
                f"half_length {self.half_length} must exceed n_regions * lossless_radius "
                f"= {self.n_regions * self.lossless_radius}"
            )
        if self.pathloss_exp <= 1:
            raise InvalidArgument("pathloss_exp must be > 1")

    @property
    def r0(self) -> float:
        return self.lossless_radius ** self.pathloss_exp

    @property
    def phi(self) -> np.ndarray:
        return np.asarray(self.edges)

    def with_length(self, half_length: float) -> "CellGeometry":
        return replace(self, half_length=half_length)


@dataclass(frozen=True)
class TrafficModel:
    """Arrivals, job sizes, handover overhead and servers per cell.

    ``arrival_density`` is scaled so that a cell of half length ``L`` sees new
    calls at rate ``arrival_density * L``. ``arrival_probs`` is ordered like
    :func:`region_indices`; ``None`` means uniform over the ``2N`` regions.
    """

    arrival_density: float
    job_rate: float
    ho_bytes: float
    servers: int
    arrival_probs: tuple = None

    def __post_init__(self):
        if self.arrival_density < 0:
            raise InvalidArgument("arrival_density must be non-negative")
        if self.job_rate < 0:
            raise InvalidArgument("job_rate must be non-negative")
        if self.ho_bytes < 0:
            raise InvalidArgument("ho_bytes must be non-negative")
        if int(self.servers) != self.servers or self.servers < 1:
            raise InvalidArgument("servers must be a positive integer")
        if self.arrival_probs is not None:
            p = np.asarray(self.arrival_probs, dtype=float)
            if np.any(p < 0) or not math.isclose(p.sum(), 1.0, rel_tol=0, abs_tol=1e-9):
                raise InvalidArgument("arrival_probs must be non-negative and sum to 1")
            object.__setattr__(self, "arrival_probs", tuple(float(x) for x in p))
        if self.job_rate * self.ho_bytes > 0.2:
            warnings.warn(
                f"job_rate * ho_bytes = {self.job_rate * self.ho_bytes:.3g} is not small",
                ApproximationWarning,
                stacklevel=2,
            )

    def probs(self, n_regions: int) -> np.ndarray:
        if self.arrival_probs is None:
            return np.full(2 * n_regions, 1.0 / (2 * n_regions))
        p = np.asarray(self.arrival_probs)
        if p.size != 2 * n_regions:
            raise InvalidArgument(f"arrival_probs has {p.size} entries, need {2 * n_regions}")
        return p


class SpeedModel:
    """Distribution of user speed on ``[v_min, v_max]``."""

    v_min: float
    v_max: float

    def _check_support(self):
        if not (0 < self.v_min < self.v_max < math.inf):
            raise InvalidArgument(
                f"speed support must satisfy 0 < v_min < v_max < inf, got "
                f"[{self.v_min}, {self.v_max}]"
            )

    def pdf(self, v):
        raise NotImplementedError

    def cdf(self, v):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def moment(self, k: float, lo: float = None, hi: float = None) -> float:
        """Partial moment ``E[V**k ; lo <= V <= hi]`` (unnormalised)."""
        lo = self.v_min if lo is None else lo
        hi = self.v_max if hi is None else hi
        val, _ = integrate.quad(lambda v: v**k * self.pdf(v), lo, hi, epsabs=0, epsrel=1e-12,
                                limit=200)
        return val

    def breakpoints(self) -> list:
        return []

    def expect(self, fn) -> float:
        """``E[fn(V)]`` by adaptive quadrature over the support."""
        val, _ = integrate.quad(lambda v: fn(v) * self.pdf(v), self.v_min, self.v_max,
                                points=self.breakpoints() or None, epsabs=0, epsrel=1e-11,
                                limit=400)
        return val

    def mean(self) -> float:
        return self.moment(1.0)

    def mean_inverse(self) -> float:
        return self.moment(-1.0)

    def prob(self, lo: float, hi: float) -> float:
        return float(self.cdf(hi) - self.cdf(lo))

    def cond_mean_inverse(self, lo: float, hi: float) -> float:
        """``E[1/V | lo <= V <= hi]``."""
        return self.moment(-1.0, lo, hi) / self.prob(lo, hi)


@dataclass(frozen=True)
class UniformSpeed(SpeedModel):
    v_min: float
    v_max: float

    def __post_init__(self):
        self._check_support()

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        inside = (v >= self.v_min) & (v <= self.v_max)
        return np.where(inside, 1.0 / (self.v_max - self.v_min), 0.0)

    def cdf(self, v):
        return np.clip((np.asarray(v, dtype=float) - self.v_min) / (self.v_max - self.v_min), 0, 1)

    def sample(self, rng, size):
        return rng.uniform(self.v_min, self.v_max, size)

    def moment(self, k, lo=None, hi=None):
        lo = self.v_min if lo is None else max(lo, self.v_min)
        hi = self.v_max if hi is None else min(hi, self.v_max)
        if hi <= lo:
            return 0.0
        w = self.v_max - self.v_min
        if k == -1:
            return math.log(hi / lo) / w
        return (hi ** (k + 1) - lo ** (k + 1)) / ((k + 1) * w)


@dataclass(frozen=True)
class TruncatedGaussianSpeed(SpeedModel):
    """Gaussian conditioned on ``[v_min, v_max]``; ``centre`` defaults to the midpoint.

    ``variance`` is that of the untruncated Gaussian.
    """

    v_min: float
    v_max: float
    variance: float
    centre: float = None
    _dist: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._check_support()
        if self.variance <= 0:
            raise InvalidArgument("variance must be positive")
        if self.centre is None:
            object.__setattr__(self, "centre", 0.5 * (self.v_min + self.v_max))
        sd = math.sqrt(self.variance)
        a = (self.v_min - self.centre) / sd
        b = (self.v_max - self.centre) / sd
        object.__setattr__(self, "_dist", stats.truncnorm(a, b, loc=self.centre, scale=sd))

    def pdf(self, v):
        return self._dist.pdf(v)

    def breakpoints(self):
        return [self.centre]

    def cdf(self, v):
        return self._dist.cdf(v)

    def moment(self, k, lo=None, hi=None):
        # quad misses a narrow peak on a wide interval; split at the centre.
        lo = self.v_min if lo is None else max(lo, self.v_min)
        hi = self.v_max if hi is None else min(hi, self.v_max)
        if hi <= lo:
            return 0.0
        points = [c for c in (self.centre,) if lo < c < hi]
        val, _ = integrate.quad(lambda v: v**k * self._dist.pdf(v), lo, hi, points=points or None,
                                epsabs=0, epsrel=1e-12, limit=200)
        return val

    def sample(self, rng, size):
        # rejection from the parent Gaussian
        sd = math.sqrt(self.variance)
        out = np.empty(size)
        filled = 0
        while filled < size:
            draw = rng.normal(self.centre, sd, max(2 * (size - filled), 16))
            draw = draw[(draw >= self.v_min) & (draw <= self.v_max)]
            take = min(draw.size, size - filled)
            out[filled:filled + take] = draw[:take]
            filled += take
        return out

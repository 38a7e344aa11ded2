"""Time-stepped Monte-Carlo simulator for a ring of small cells along a road.

Cars arrive as a Poisson stream at uniform positions, move left to right at a
speed frozen for the life of the call, and are served by the tower of the cell
they are in. Each cell has ``K`` servers; a new call finding them all busy is
blocked and a handover into a full cell is dropped. Every handover adds
``ho_bytes`` to the outstanding work. The rate in each step is the largest
rate in the rate set not exceeding the received SNR (or SINR). Calls leaving
the last cell enter the first.

Estimates use batch means over the post-warmup window.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel as K
from .analytic import attenuation
from .errors import ConfigError
from .model import CellGeometry, SpeedModel, TrafficModel
from .power import PowerPolicy

Z95 = 1.959963984540054
MIN_BATCHES = 30
_POOL = 4096
_STEP_BLOCK = 65536


@dataclass(frozen=True)
class SimConfig:
    """One simulation run.

    ``rate_set=None`` serves each user from its own region rates, i.e. the
    edge-of-region capacities at its transmit power; this is the setting the
    closed-form model describes. Otherwise ``rate_set`` is a common,
    strictly decreasing tuple of rates.
    """

    towers: int
    dt: float
    geom: CellGeometry
    traffic: TrafficModel
    speed: SpeedModel
    policy: PowerPolicy
    horizon_s: float
    rate_set: tuple = None
    sigma2: float = None
    interference: bool = False
    seed: int = 0
    warmup_s: float = None
    batches: int = MIN_BATCHES

    def __post_init__(self):
        if int(self.towers) != self.towers or self.towers < 1:
            raise ConfigError("towers must be a positive integer")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        seg = self.geom.half_length / self.geom.n_regions
        if self.speed.v_max * self.dt >= seg / 4:
            raise ConfigError(
                f"dt = {self.dt} too coarse: a car moves {self.speed.v_max * self.dt:.4g} m per "
                f"step, limit is a quarter region ({seg / 4:.4g} m)"
            )
        if self.rate_set is not None:
            r = np.asarray(self.rate_set, dtype=float)
            if r.size == 0 or np.any(r <= 0) or np.any(np.diff(r) >= 0):
                raise ConfigError("rate_set must be non-empty, positive and strictly decreasing")
            object.__setattr__(self, "rate_set", tuple(float(x) for x in r))
        if self.interference and (self.sigma2 is None or self.sigma2 <= 0):
            raise ConfigError("interference needs a positive sigma2")
        if self.warmup_s is None:
            object.__setattr__(self, "warmup_s", default_warmup(self))
        if not self.horizon_s > self.warmup_s > 0:
            raise ConfigError(
                f"need horizon_s > warmup_s > 0, got horizon {self.horizon_s}, "
                f"warmup {self.warmup_s}"
            )
        if self.batches < 1:
            raise ConfigError("batches must be positive")
        self.policy.check_positive(self.speed)

    @property
    def ring_length(self) -> float:
        return 2.0 * self.geom.half_length * self.towers


def default_warmup(cfg: SimConfig) -> float:
    """10% of the horizon or 200 mean cell crossings, whichever is larger."""
    crossing = 2.0 * cfg.geom.half_length * cfg.speed.mean_inverse()
    return max(0.1 * cfg.horizon_s, 200.0 * crossing)


@dataclass
class UserState:
    uid: int
    position: float
    speed: float
    remaining_bytes: float
    assigned_power: float
    serving_tower: int
    is_handover: bool = False


_METRICS = K.METRICS


@dataclass(frozen=True)
class MetricsReport:
    """Point estimates with 95% batch-means half widths (``*_hw``)."""

    p_busy: float
    p_busy_hw: float
    p_drop: float
    p_drop_hw: float
    p_e_ho: float
    p_e_ho_hw: float
    p_h_ho: float
    p_h_ho_hw: float
    b_e: float
    b_e_hw: float
    b_h: float
    b_h_hw: float
    counts: dict
    cell_ho_arrivals: tuple
    insufficient_data: bool
    seeds: tuple
    batch_data: dict = field(repr=False)


def select_rate(snr: float, rate_set) -> float:
    """Largest rate not above ``snr``; 0 when none qualifies."""
    best = 0.0
    for r in rate_set:
        if r <= snr and r > best:
            best = r
    return float(best)


def sinr(tagged: UserState, others, cfg: SimConfig) -> float:
    """SINR of ``tagged``; interferers are in-service users of other cells.

    Each interferer's power is attenuated over the distance from its serving
    tower to the tagged user.
    """
    L = cfg.geom.half_length
    ring = cfg.ring_length

    def dist(x, tower):
        d = abs(x - (2 * L * tower + L))
        return min(d, ring - d)

    signal = tagged.assigned_power * float(attenuation(dist(tagged.position, tagged.serving_tower),
                                                       cfg.geom))
    if not cfg.interference:
        return signal
    interf = sum(
        u.assigned_power * float(attenuation(dist(tagged.position, u.serving_tower), cfg.geom))
        for u in others
        if u.serving_tower != tagged.serving_tower and u.uid != tagged.uid
    )
    return signal / (1.0 + interf / cfg.sigma2)


def _ratio(num: np.ndarray, den: np.ndarray) -> tuple[float, float, int]:
    """Pooled ratio and batch-means half width over batches with ``den > 0``."""
    total = den.sum()
    if total == 0:
        return 0.0, math.nan, 0
    est = float(num.sum() / total)
    ok = den > 0
    m = int(ok.sum())
    if m < 2:
        return est, math.nan, m
    r = num[ok] / den[ok]
    return est, float(Z95 * r.std(ddof=1) / math.sqrt(m)), m


def summarize(batch_data: dict, counts: dict, cell_ho: tuple, seeds: tuple) -> MetricsReport:
    values = {}
    enough = True
    for name in _METRICS:
        num = np.asarray(batch_data[name + "_num"], dtype=float)
        den = np.asarray(batch_data[name + "_den"], dtype=float)
        est, hw, m = _ratio(num, den)
        values[name] = (est, hw)
        if name in ("busy", "drop") and m < MIN_BATCHES:
            enough = False
    return MetricsReport(
        p_busy=values["busy"][0], p_busy_hw=values["busy"][1],
        p_drop=values["drop"][0], p_drop_hw=values["drop"][1],
        p_e_ho=values["e_ho"][0], p_e_ho_hw=values["e_ho"][1],
        p_h_ho=values["h_ho"][0], p_h_ho_hw=values["h_ho"][1],
        b_e=values["b_e"][0], b_e_hw=values["b_e"][1],
        b_h=values["b_h"][0], b_h_hw=values["b_h"][1],
        counts=dict(counts), cell_ho_arrivals=tuple(cell_ho),
        insufficient_data=not enough, seeds=tuple(seeds), batch_data=batch_data,
    )


def merge_reports(reports) -> MetricsReport:
    """Pool independent replications; the result does not depend on input order."""
    reports = sorted(reports, key=lambda r: r.seeds)
    batch = {k: tuple(x for r in reports for x in r.batch_data[k]) for k in reports[0].batch_data}
    counts = {k: sum(r.counts[k] for r in reports) for k in reports[0].counts}
    cell = tuple(np.sum([r.cell_ho_arrivals for r in reports], axis=0).tolist())
    seeds = tuple(s for r in reports for s in r.seeds)
    return summarize(batch, counts, cell, seeds)


def _twice_beta(beta: float) -> int:
    """``2 * beta`` when it is a small integer (fast attenuation), else -1."""
    tb = 2.0 * beta
    return int(tb) if tb == int(tb) and tb <= 16 else -1


class _Arrivals:
    """Pre-drawn arrival attributes (position, speed, job, power) as a 4 x n array.

    Refills keep the unused tail, so the sequence depends only on the seed.
    """

    def __init__(self, cfg: SimConfig, rng: np.random.Generator):
        self.cfg, self.rng = cfg, rng
        self.pool = np.empty((4, 0))

    def refill(self, ptr: int) -> np.ndarray:
        cfg, rng = self.cfg, self.rng
        pos = rng.uniform(0.0, cfg.ring_length, _POOL)
        vel = cfg.speed.sample(rng, _POOL)
        if cfg.traffic.job_rate > 0:
            job = rng.exponential(1.0 / cfg.traffic.job_rate, _POOL)
        else:
            job = np.full(_POOL, np.inf)
        power = np.asarray(cfg.policy.evaluate(vel), dtype=float) * np.ones(_POOL)
        fresh = np.vstack([pos, vel, job, power])
        self.pool = np.ascontiguousarray(np.hstack([self.pool[:, ptr:], fresh]))
        return self.pool


class Simulator:
    """Mutable world state for one run; drive it with :meth:`step` or :meth:`run`.

    The per-step work happens in a compiled kernel; this class owns the
    buffers, random draws and trace output.
    """

    def __init__(self, cfg: SimConfig, trace=None):
        self.cfg = cfg
        self.trace = trace
        self.rng = np.random.default_rng(cfg.seed)
        self.arrivals = _Arrivals(cfg, self.rng)
        g = cfg.geom
        self.L = g.half_length
        self.n = cfg.towers
        self.K = cfg.traffic.servers
        self.spawn_rate = cfg.traffic.arrival_density * self.L * self.n
        if cfg.rate_set is None:
            # per-user region rates are power * factor_n, ascending
            levels = (g.r0 * self.L ** (-g.pathloss_exp) * g.phi ** (-g.pathloss_exp))[::-1]
        else:
            levels = np.asarray(cfg.rate_set)[::-1]
        self.levels = np.ascontiguousarray(levels, dtype=float)
        cap = self.K * self.n
        nb = cfg.batches
        self.batch_len = (cfg.horizon_s - cfg.warmup_s) / nb
        self.n_steps = int(round(cfg.horizon_s / cfg.dt))
        self.fs = np.zeros((K.N_FSTATE, cap))
        self.is_ = np.zeros((K.N_ISTATE, cap), dtype=np.int64)
        self.occ = np.zeros(self.n, dtype=np.int64)
        self._counts = np.zeros(6, dtype=np.int64)
        self.cell_ho = np.zeros(self.n, dtype=np.int64)
        self.acc = np.zeros((2 * len(K.METRICS), nb))
        self.cursor = np.zeros(4, dtype=np.int64)
        self.fpar = np.array([cfg.dt, self.L, cfg.ring_length, cfg.traffic.ho_bytes,
                              cfg.warmup_s, self.batch_len, g.lossless_radius, g.pathloss_exp,
                              cfg.sigma2 if cfg.sigma2 else 1.0])
        self.ipar = np.array([self.n, self.K, nb, int(cfg.rate_set is not None),
                              int(cfg.interference), int(trace is not None),
                              _twice_beta(g.pathloss_exp)], dtype=np.int64)
        ev = 4 * cap + 4096 if trace is not None else 1
        self.ev_f = np.zeros((2, ev))
        self.ev_i = np.zeros((3, ev), dtype=np.int64)
        self._keep = np.ones(cap, dtype=np.bool_)
        self._crossing = np.zeros(cap, dtype=np.int64)
        self._load = np.zeros(self.n)
        self._rate = np.zeros(cap)
        self.pool = self.arrivals.refill(0)
        self.step_index = 0
        self._pois = None
        self._pois_start = 0

    # -- views

    @property
    def counts(self) -> dict:
        return {name: int(v) for name, v in zip(K.COUNT_NAMES, self._counts)}

    @property
    def n_active(self) -> int:
        return int(self.cursor[K.N_ACTIVE])

    def users(self) -> list:
        fs, is_ = self.fs, self.is_
        return [UserState(int(is_[K.UID, j]), float(fs[K.POS, j]), float(fs[K.VEL, j]),
                          float(fs[K.REM, j]), float(fs[K.PW, j]), int(is_[K.CELL, j]),
                          bool(is_[K.HO, j]))
                for j in range(self.n_active)]

    def batch_data(self) -> dict:
        out = {}
        for m, name in enumerate(K.METRICS):
            out[name + "_num"] = tuple(self.acc[2 * m].tolist())
            out[name + "_den"] = tuple(self.acc[2 * m + 1].tolist())
        return out

    # -- dynamics

    def _flush(self):
        k = int(self.cursor[K.EV_N])
        if k and self.trace is not None:
            t, val = self.ev_f[:, :k]
            kind, uid, cell = self.ev_i[:, :k]
            lines = []
            for i in range(k):
                kd = int(kind[i])
                v = "" if kd in (1, 5) else f"{val[i]:.6g}"
                lines.append(f"{t[i]:.6f},{K.EVENT_NAMES[kd]},{uid[i]},{cell[i]},{v}\n")
            self.trace.write("".join(lines))
        self.cursor[K.EV_N] = 0

    def add_user(self, position: float, speed: float, job: float, t: float = 0.0) -> bool:
        """Offer a new call now; returns False if it is blocked."""
        power = float(self.cfg.policy.evaluate(speed))
        ok = K.admit(self.fs, self.is_, self.occ, self._counts, self.acc, self.cursor,
                     self.fpar, self.ipar, self.ev_f, self.ev_i, float(t), float(position),
                     float(speed), float(job), power)
        self._flush()
        return bool(ok)

    def _advance(self, stop: int):
        while self.step_index < stop:
            if self._pois is None or self.step_index >= self._pois_start + _STEP_BLOCK:
                self._pois_start = self.step_index
                self._pois = self.rng.poisson(self.spawn_rate * self.cfg.dt, _STEP_BLOCK)
            end = min(stop, self._pois_start + _STEP_BLOCK)
            off = self.step_index - self._pois_start
            nxt = K.advance(self.fs, self.is_, self.occ, self._counts, self.cell_ho, self.acc,
                            self.cursor, self.fpar, self.ipar, self.levels, self.pool,
                            self._pois[off:end - self._pois_start], self.step_index, end,
                            self.ev_f, self.ev_i, self._keep, self._crossing, self._load,
                            self._rate)
            self.step_index = int(nxt)
            self._flush()
            if self.step_index < end:
                # stopped early: arrival pool ran short
                need = int(self._pois[self.step_index - self._pois_start])
                if self.cursor[K.PTR] + need > self.pool.shape[1]:
                    self.pool = self.arrivals.refill(int(self.cursor[K.PTR]))
                    self.cursor[K.PTR] = 0

    def step(self):
        """Advance one step: arrivals, motion, handovers, service, completions."""
        self._advance(self.step_index + 1)

    def run(self) -> MetricsReport:
        self._advance(self.n_steps)
        counts = self.counts
        n = self.n_active
        counts["in_flight"] = int(np.count_nonzero(self.is_[K.ABATCH, :n] >= 0))
        return summarize(self.batch_data(), counts, tuple(self.cell_ho.tolist()),
                         (self.cfg.seed,))


def run(cfg: SimConfig, trace=None) -> MetricsReport:
    return Simulator(cfg, trace).run()


def _run_seed(args):
    cfg, seed = args
    return run(replace(cfg, seed=seed))


def run_replications(cfg: SimConfig, seeds, parallel: int = 1) -> MetricsReport:
    """Independent runs, one per seed, pooled with :func:`merge_reports`."""
    jobs = [(cfg, s) for s in seeds]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as ex:
            reports = list(ex.map(_run_seed, jobs))
    else:
        reports = [_run_seed(j) for j in jobs]
    return merge_reports(reports)


@dataclass(frozen=True)
class IntermediateEstimates:
    p_e_ho: float
    p_e_ho_hw: float
    p_h_ho: float
    p_h_ho_hw: float
    b_e: float
    b_e_hw: float
    b_h: float
    b_h_hw: float
    insufficient_data: bool


def estimate_intermediate(cfg: SimConfig, seeds=None, parallel: int = 1) -> IntermediateEstimates:
    """Simulated handover probabilities and per-cell service times."""
    rep = run_replications(cfg, seeds or (cfg.seed,), parallel)
    den = [np.asarray(rep.batch_data[m + "_den"]) for m in ("e_ho", "h_ho")]
    short = any(int(np.count_nonzero(d > 0)) < MIN_BATCHES for d in den)
    return IntermediateEstimates(rep.p_e_ho, rep.p_e_ho_hw, rep.p_h_ho, rep.p_h_ho_hw,
                                 rep.b_e, rep.b_e_hw, rep.b_h, rep.b_h_hw, short)

"""Experiment orchestration: one result row per grid point (or per class)."""

from __future__ import annotations

import csv
import io
import json
import math
import numbers
from dataclasses import dataclass, field, replace

from . import analytic, power, sizing
from .config import SIM_MODES, ExperimentSpec, build
from .errors import ConfigError, PreconditionError, SmallCellError
from .scns import MetricsReport, Simulator, merge_reports, run_replications

SCHEMA_VERSION = 1
METRIC_COLUMNS = ("p_busy", "p_busy_hw", "p_drop", "p_drop_hw", "p_e_ho", "p_e_ho_hw",
                  "p_h_ho", "p_h_ho_hw", "b_e", "b_e_hw", "b_h", "b_h_hw")
COUNT_COLUMNS = ("arrivals", "blocked", "admitted", "ho_attempts", "ho_drops", "completions",
                 "in_flight")
INTERMEDIATE = ("p_e_ho", "p_h_ho", "b_e", "b_h")


@dataclass
class ResultTable:
    mode: str
    columns: tuple
    rows: list = field(default_factory=list)
    insufficient_data: bool = False

    def add(self, **values):
        missing = set(self.columns) - set(values)
        if missing:
            raise KeyError(f"row is missing {sorted(missing)}")
        self.rows.append(tuple(values[c] for c in self.columns))

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# smallcell-results v{SCHEMA_VERSION} mode={self.mode}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, numbers.Integral):
        return str(int(v))
    if isinstance(v, numbers.Real):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def improvement(baseline: float, variant: float) -> float:
    """Percent reduction of ``variant`` relative to ``baseline``; negative when it got worse."""
    if baseline == 0:
        return math.nan
    return 100.0 * (baseline - variant) / baseline


def _tag(err: SmallCellError, point: dict) -> SmallCellError:
    if point:
        err.args = (f"at grid point {point}: {err.args[0] if err.args else ''}",) + err.args[1:]
    return err


def _simulate(sim, seeds, parallel: int, trace) -> MetricsReport:
    if trace is None:
        return run_replications(sim, seeds, parallel)
    # tracing forces serial runs so the event stream is ordered
    reports = []
    for s in seeds:
        trace.write(f"# seed={s}\n")
        reports.append(Simulator(replace(sim, seed=s), trace).run())
    return merge_reports(reports)


def _metric_values(rep: MetricsReport) -> dict:
    out = {c: getattr(rep, c) for c in METRIC_COLUMNS}
    out.update({c: rep.counts[c] for c in COUNT_COLUMNS})
    return out


def run_experiment(spec: ExperimentSpec, parallel: int = 1, trace=None) -> ResultTable:
    """Evaluate every grid point of ``spec`` in grid order."""
    axes = tuple(a for a, _ in spec.axes)
    mode = spec.mode
    if mode == "analytic":
        cols = axes + ("p_bar",) + INTERMEDIATE + ("ho_rate", "rho", "p_busy")
    elif mode == "optimize-power":
        cols = axes + ("law", "n_classes", "class", "v_lo", "v_hi", "prob", "cond_inv_speed",
                       "power_lo", "power_hi", "rho")
    elif mode == "cell-size":
        cols = axes + ("method", "half_length_m", "cost", "at_boundary", "unimodal")
    elif mode == "validate":
        cols = axes + ("p_bar",) + tuple("analytic_" + m for m in INTERMEDIATE) + tuple(
            "sim_" + m for m in INTERMEDIATE) + tuple("sim_" + m + "_hw" for m in INTERMEDIATE) + tuple(
            "diff_" + m for m in INTERMEDIATE)
    else:
        cols = axes + ("replications",) + METRIC_COLUMNS + COUNT_COLUMNS
        if mode == "sweep-alpha" or "policy" in axes:
            cols += ("improvement_pct",)
    # the row each variant is compared against: alpha = 1, or equal power
    base_axis, base_value = ("alpha", 1.0) if mode == "sweep-alpha" else ("policy", "equal")
    table = ResultTable(mode, cols)
    baselines = {}
    pending = []
    for point, doc in spec.grid():
        key = json.dumps({k: v for k, v in point.items() if k != base_axis}, sort_keys=True)
        row = dict(point)
        try:
            sc = build(doc, mode)
            if mode == "analytic":
                row.update(p_bar=sc.p_bar, **analytic.analytic_metrics(sc.geom, sc.traffic, sc.p_bar,
                                                                      sc.speed))
                pending.append((key, row))
            elif mode == "optimize-power":
                _optimize_rows(table, row, sc, doc)
            elif mode == "cell-size":
                _cell_size_rows(table, row, sc, doc)
            elif mode in SIM_MODES:
                rep = _simulate(sc.sim, spec.seeds, parallel, trace)
                table.insufficient_data |= rep.insufficient_data
                vals = _metric_values(rep)
                if mode == "validate":
                    ana = dict(zip(INTERMEDIATE,
                                   analytic.ho_probabilities(sc.geom, sc.traffic, sc.p_bar, sc.speed)
                                   + analytic.service_times(sc.geom, sc.traffic, sc.speed)))
                    row["p_bar"] = sc.p_bar
                    for m in INTERMEDIATE:
                        row["analytic_" + m] = ana[m]
                        row["sim_" + m] = vals[m]
                        row["sim_" + m + "_hw"] = vals[m + "_hw"]
                        row["diff_" + m] = abs(vals[m] - ana[m]) / abs(ana[m]) if ana[m] else math.nan
                else:
                    row.update(replications=len(spec.seeds), **vals)
                    if point.get(base_axis) == base_value:
                        baselines[key] = vals["p_drop"]
                pending.append((key, row))
        except SmallCellError as e:
            raise _tag(e, point)
    for key, row in pending:
        if "improvement_pct" in cols:
            if key not in baselines:
                raise ConfigError(f"no {base_axis} = {base_value!r} baseline row for {key}")
            row["improvement_pct"] = improvement(baselines[key], row["p_drop"])
        table.add(**row)
    return table


def _optimize_rows(table, row, sc, doc):
    v_scale = 3.6 if doc["speed"]["units"] == "kmph" else 1.0
    for n in sc.classes or (1,):
        classes = power.SpeedClasses.uniform(sc.speed, n)
        powers = power.discrete_optimal_power(sc.geom, sc.traffic, classes, sc.p_bar)
        rho = analytic.load_factor_classes(sc.geom, sc.traffic, classes.triples(powers))
        for i in range(n):
            table.add(**row, law="discrete", n_classes=n, **{"class": i + 1},
                      v_lo=classes.edges[i] * v_scale, v_hi=classes.edges[i + 1] * v_scale,
                      prob=classes.probs[i], cond_inv_speed=classes.cond_inv_speed[i],
                      power_lo=float(powers[i]), power_hi=float(powers[i]), rho=rho)
    law = power.continuous_optimal_power(sc.geom, sc.traffic, sc.speed, sc.p_bar)
    table.add(**row, law="linear", n_classes=0, **{"class": 0},
              v_lo=sc.speed.v_min * v_scale, v_hi=sc.speed.v_max * v_scale, prob=1.0,
              cond_inv_speed=sc.speed.mean_inverse(),
              power_lo=float(law.evaluate(sc.speed.v_min)),
              power_hi=float(law.evaluate(sc.speed.v_max)),
              rho=power.rho_at_optimum(sc.geom, sc.traffic, sc.speed, sc.p_bar))


def _cell_size_rows(table, row, sc, doc):
    try:
        L = sizing.optimal_cell_size_closed_form(sc.geom, sc.traffic, sc.speed, sc.scaling)
        table.add(**row, method="closed_form", half_length_m=L,
                  cost=sizing.joint_cost(L, sc.geom, sc.traffic, sc.speed, sc.scaling),
                  at_boundary=False, unimodal=True)
    except PreconditionError:
        pass
    bracket = doc["scaling"]["bracket_m"]
    res = sizing.optimal_cell_size_numeric(sc.geom, sc.traffic, sc.speed, sc.scaling,
                                           tuple(bracket) if bracket else None)
    table.add(**row, method="numeric", half_length_m=res.half_length, cost=res.cost,
              at_boundary=res.at_boundary, unimodal=res.unimodal)

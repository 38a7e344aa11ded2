"""``smallcell`` command line: one subcommand per experiment mode."""

from __future__ import annotations

import sys

import click

from .config import load_config
from .errors import (ConfigError, InvalidArgument, PreconditionError, RegimeViolation,
                     UnsupportableVelocity, UnsupportedDimension)
from .experiment import run_experiment

EXIT_CONFIG = 2
EXIT_REGIME = 3
EXIT_DATA = 4


def _seed_list(ctx, param, value):
    if value is None:
        return None
    try:
        return [int(s) for s in value.split(",") if s.strip()]
    except ValueError:
        raise click.BadParameter("expected a comma-separated list of integers") from None


def _options(fn):
    fn = click.option("--parallel", type=click.IntRange(min=1), default=1, show_default=True,
                      help="Worker processes for replications.")(fn)
    fn = click.option("--trace", type=click.Path(dir_okay=False),
                      help="Write the per-event stream (time,kind,uid,cell,value) here.")(fn)
    fn = click.option("--replications", type=click.IntRange(min=1),
                      help="Number of consecutive seeds starting at --seed.")(fn)
    fn = click.option("--out", type=click.Path(dir_okay=False),
                      help="CSV output path (default: config 'output' or stdout).")(fn)
    fn = click.option("--seed", callback=_seed_list, help="Seed or comma-separated seeds.")(fn)
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=True, dir_okay=False), help="JSON config file.")(fn)
    return fn


def _execute(mode, config_path, seed, out, replications, trace, parallel):
    try:
        spec = load_config(config_path, {"mode": mode, "seeds": seed, "replications": replications,
                                         "output": out})
        trace_fh = open(trace, "w", encoding="utf-8") if trace else None
        try:
            table = run_experiment(spec, parallel=parallel, trace=trace_fh)
        finally:
            if trace_fh:
                trace_fh.close()
    except (ConfigError, InvalidArgument, PreconditionError, UnsupportedDimension) as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    except (RegimeViolation, UnsupportableVelocity) as e:
        click.echo(f"model error: {e}", err=True)
        sys.exit(EXIT_REGIME)
    if spec.output:
        table.write(spec.output)
    else:
        click.echo(table.to_csv(), nl=False)
    if table.insufficient_data:
        click.echo("insufficient data: fewer than 30 usable batches for a confidence interval",
                   err=True)
        sys.exit(EXIT_DATA)


@click.group()
def main():
    """Small-cell handover analytics, optimal power laws and the network simulator."""


def _register(mode, help_text):
    @main.command(mode, help=help_text)
    @_options
    def cmd(**kw):
        _execute(mode, **kw)

    return cmd


analytic = _register("analytic", "Closed-form metrics under equal power.")
optimize_power = _register("optimize-power", "Discrete and affine optimal power laws.")
cell_size = _register("cell-size", "Optimal cell size under beta+ power scaling.")
simulate = _register("simulate", "Run the simulator and report metrics with 95% CIs.")
sweep_alpha = _register("sweep-alpha", "Simulate the alpha rule; improvement vs alpha = 1.")
validate = _register("validate", "Analytic vs simulated handover metrics side by side.")


if __name__ == "__main__":
    main()

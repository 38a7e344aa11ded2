import argparse
import sys
from pathlib import Path

from smallcell.config import load_config
from smallcell.experiment import run_experiment

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main(config_name: str, description: str, summarise) -> None:
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--config", default=str(CONFIGS / config_name))
    ap.add_argument("--out", help="also write the CSV here")
    ap.add_argument("--parallel", type=int, default=1)
    args = ap.parse_args()
    table = run_experiment(load_config(args.config), parallel=args.parallel)
    if args.out:
        table.write(args.out)
    sys.stdout.write(table.to_csv())
    rows = [dict(zip(table.columns, r)) for r in table.rows]
    print(file=sys.stderr)
    summarise(rows)

"""Simulated handover probabilities and cell times against the closed form."""

import sys

from _common import main

METRICS = ("p_e_ho", "p_h_ho", "b_e", "b_h")


def summarise(rows):
    for r in rows:
        cells = "  ".join(f"{m}: {r['analytic_' + m]:.4f}/{r['sim_' + m]:.4f} ({r['diff_' + m]:.3f})"
                          for m in METRICS)
        print(f"P={r['power']}  {cells}", file=sys.stderr)
    worst = max(r["diff_" + m] for r in rows for m in METRICS)
    print(f"worst relative difference {worst:.4f}", file=sys.stderr)


if __name__ == "__main__":
    main("validate_reference.json", __doc__, summarise)

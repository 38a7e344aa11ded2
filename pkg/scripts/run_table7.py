"""Linear power rule (alpha = 0.7) against equal power, no interference."""

import sys

from _common import main


def summarise(rows):
    for r in rows:
        print(f"alpha={r['alpha']:<4} P_busy={r['p_busy']:.3e}  "
              f"P_drop={r['p_drop']:.3e} +- {r['p_drop_hw']:.1e}  "
              f"improvement={r['improvement_pct']:.1f}%", file=sys.stderr)


if __name__ == "__main__":
    main("table7.json", __doc__, summarise)

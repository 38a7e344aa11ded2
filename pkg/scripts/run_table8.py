"""Alpha rule with and without interference, Gaussian speeds."""

import sys

from _common import main


def summarise(rows):
    for r in rows:
        print(f"interference={str(r['interference']):<5} alpha={r['alpha']:<4} "
              f"P_drop={r['p_drop']:.3e} +- {r['p_drop_hw']:.1e}  "
              f"improvement={r['improvement_pct']:.1f}%", file=sys.stderr)


if __name__ == "__main__":
    main("table8.json", __doc__, summarise)

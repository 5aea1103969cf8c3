"""What one baiter changes: m-1 versus m baiters against the same coalition.

    python demos/baiter_count.py [seeds]
"""

import sys
from collections import Counter

from trapsim.game_params import FinancialParams, ProtocolParams
from trapsim.net_sim import PARTITION
from trapsim.strategies import compute_utilities, simulate


def main(seeds=20):
    params = ProtocolParams.corollary(10, 2, 2, 60)
    fin = FinancialParams.from_params(params)
    print(f"n=10 k=2 t=2 m={params.m} L={float(fin.deposit):.2f} R={float(fin.reward):.2f} G/k={params.gain_share}")
    for baiters in (params.m - 1, params.m):
        classes = Counter()
        by_role: dict = {}
        for s in range(seeds):
            out = simulate(params, PARTITION, s, baiter_count=baiters)
            rep = compute_utilities(out, fin, params)
            classes.update(out.run_class.values())
            for p in out.rational:
                by_role.setdefault(out.roles[p], []).append(rep.per_player[p])
        means = {r: round(float(sum(v) / len(v)), 2) for r, v in sorted(by_role.items())}
        print(f"{baiters} baiter(s): run classes {dict(sorted(classes.items()))}, "
              f"mean payoff of rational members by strategy {means}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 20)

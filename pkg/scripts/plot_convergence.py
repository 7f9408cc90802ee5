"""Plot a convergence CSV produced by `ltswaves converge`.

    python scripts/plot_convergence.py results/converge.csv out.png
"""

import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main(path, out):
    series = defaultdict(list)
    with open(path) as f:
        rows = csv.DictReader(r for r in f if not r.startswith("#"))
        for row in rows:
            key = (row["family"], int(row["k"]), int(row["p"]))
            series[key].append((float(row["h"]), float(row["l2_error"])))
    fig, ax = plt.subplots(figsize=(6, 5))
    for (family, k, p), pts in sorted(series.items()):
        pts.sort()
        hs, errs = zip(*pts)
        ax.loglog(hs, errs, "o-", label=f"{family} k={k} p={p}")
    hs = sorted({h for pts in series.values() for h, _ in pts})
    if hs:
        k = min(k for _, k, _ in series)
        anchor = max(e for pts in series.values() for _, e in pts)
        ref = [anchor * (h / hs[-1]) ** k for h in hs]
        ax.loglog(hs, ref, "k--", label=f"slope {k}")
    ax.set_xlabel("mesh size h")
    ax.set_ylabel("L2 error at final time")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2] if len(sys.argv) > 2 else "convergence.png")

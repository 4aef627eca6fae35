"""Plot accuracy against epsilon from ``*_sweep_<attack>.csv`` files (needs matplotlib).

    python3 scripts/plot_sweeps.py runs/*_sweep_*.csv --out runs/sweeps.png
"""
import argparse
from collections import defaultdict
from pathlib import Path

from uwbnet.harness import read_csv


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("csvs", nargs="+", type=Path)
    p.add_argument("--out", type=Path, default=Path("sweeps.png"))
    args = p.parse_args(argv)

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_attack = defaultdict(list)
    for path in args.csvs:
        rows = read_csv(path)
        if rows:
            by_attack[rows[0]["attack"]].append(rows)
    fig, axes = plt.subplots(1, len(by_attack), figsize=(4 * len(by_attack), 3.5), squeeze=False, sharey=True)
    for ax, (kind, series) in zip(axes[0], sorted(by_attack.items())):
        for rows in series:
            ax.plot([float(r["epsilon"]) for r in rows], [float(r["accuracy"]) for r in rows],
                    marker="o", label=rows[0]["model"])
        ax.set_title(kind.upper())
        ax.set_xlabel("epsilon")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("accuracy")
    axes[0][-1].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()

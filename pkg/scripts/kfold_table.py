"""Mean test accuracy of each model kind over 1, 10 and 100 resplits.

    python3 scripts/kfold_table.py --folds 1 10 --epochs 1000 --out runs/kfold
"""
import argparse
import logging
from pathlib import Path

from uwbnet.harness import RunConfig, cmd_kfold, header_lines, write_csv
from uwbnet.models import KINDS, ModelSpec


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--kinds", nargs="+", default=list(KINDS))
    p.add_argument("--folds", nargs="+", type=int, default=[1, 10])
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("runs/kfold"))
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    table = []
    for kind in args.kinds:
        row = {"model": ModelSpec.for_kind(kind).name}
        for folds in args.folds:
            cfg = RunConfig(spec=ModelSpec.for_kind(kind), epochs=args.epochs, folds=folds, seed=args.seed,
                            out_dir=args.out)
            _, rows = cmd_kfold(cfg)
            row[f"folds_{folds}"] = rows[-1]["test_acc"]
        logging.info("%s", row)
        table.append(row)
    cols = ("model", *(f"folds_{f}" for f in args.folds))
    path = write_csv(args.out / "summary.csv", header_lines(args.seed, None, epochs=args.epochs), cols, table)
    logging.info("wrote %s", path)


if __name__ == "__main__":
    main()

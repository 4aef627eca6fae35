"""Clean and attacked accuracy at one epsilon for several model kinds, averaged over seeds.

    python3 scripts/robustness_table.py --seeds 5 --eps 0.1 --out runs/robustness.csv

Pass --separation to make the synthetic classes harder or easier.
"""
import argparse
import logging
from pathlib import Path

import numpy as np

from uwbnet.attacks import KINDS as ATTACKS, AttackConfig, attack
from uwbnet.data import SynthConfig, generate_synthetic
from uwbnet.harness import header_lines, split_fold, write_csv
from uwbnet.models import ModelSpec, accuracy
from uwbnet.training import TrainConfig, train_model

DEFAULT_KINDS = ("mlp", "single_rbf", "multi_rbf", "multi_rbf_l4_nr", "multi_rbf_nr_l4_mh", "multi_rbf_nr_l4_mh_adx")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--kinds", nargs="+", default=DEFAULT_KINDS)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--out", type=Path, default=Path("runs/robustness.csv"))
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    synth = SynthConfig(separation=args.separation)
    train, test = split_fold(generate_synthetic(synth), 1, 0)
    rows = []
    for kind in args.kinds:
        spec = ModelSpec.for_kind(kind)
        scores = []
        for seed in range(args.seeds):
            model, _ = train_model(spec, train, test, TrainConfig(epochs=args.epochs, seed=seed))
            accs = [accuracy(model, test.features, test.labels)]
            for a in ATTACKS:
                x_adv = attack(model, test.features, test.labels, AttackConfig.default(a, args.eps, seed))
                accs.append(accuracy(model, x_adv, test.labels))
            scores.append(accs)
        mean = np.mean(scores, axis=0)
        rows.append({"model": spec.name, "clean": mean[0], **dict(zip(ATTACKS, mean[1:]))})
        logging.info("%-26s clean %.3f  fgsm %.3f  bim %.3f  pgd %.3f", spec.name, *mean)
    comments = header_lines(0, None, eps=args.eps, seeds=args.seeds, epochs=args.epochs, separation=args.separation)
    write_csv(args.out, comments, ("model", "clean", *ATTACKS), rows)
    logging.info("wrote %s", args.out)


if __name__ == "__main__":
    main()

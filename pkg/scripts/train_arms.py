"""Train the pooling baseline, SoftHGNN and SoftHGNN-SeS on the same data.

    python scripts/train_arms.py --out-dir runs/
"""

import argparse
from pathlib import Path

from softhgnn.train import ModelKind, TrainConfig, make_dataset, train_loop, write_metrics_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", type=Path, default=Path("runs"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=10)
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    data = make_dataset(TrainConfig().data)
    for kind in ModelKind:
        cfg = TrainConfig(model=kind, seed=args.seed, epochs=args.epochs)
        res = train_loop(cfg, data)
        write_metrics_csv(args.out_dir / f"{kind.value}.csv", res.metrics)
        final = res.final("test")
        line = f"{kind.value:<14} test_acc={final.accuracy:.3f} test_loss={final.loss:.4f}"
        if res.ses_state is not None:
            line += f" l_lb={res.metrics[-1].l_lb:.4f}"
        print(line)


if __name__ == "__main__":
    main()

"""Token-count sweep for SoftHGNN, self-attention and k-NN HGNN.

Writes a CSV and, if matplotlib is available, a log-log plot next to it.

    python scripts/scaling.py --out runs/scaling.csv
"""

import argparse
from pathlib import Path

from softhgnn.bench import format_table, parse_n_range, rows_to_csv, scaling_run, slopes


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("runs/scaling.csv"))
    ap.add_argument("--n", default="256..8192")
    ap.add_argument("--d", type=int, default=64)
    ap.add_argument("--m", type=int, default=8)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    args.out.parent.mkdir(parents=True, exist_ok=True)

    rows = scaling_run(["softhgnn", "attention", "hgnn"], parse_n_range(args.n), args.d, args.m, args.repeats)
    args.out.write_text(rows_to_csv(rows))
    print(format_table(rows))
    for op, s in slopes(rows).items():
        print(f"{op}: slope {s:.2f}")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for op in dict.fromkeys(r.op for r in rows):
        sel = [r for r in rows if r.op == op]
        axes[0].loglog([r.n for r in sel], [r.median_seconds for r in sel], "o-", label=op)
        axes[1].loglog([r.n for r in sel], [r.workspace_bytes for r in sel], "o-", label=op)
    axes[0].set(xlabel="tokens N", ylabel="median seconds")
    axes[1].set(xlabel="tokens N", ylabel="workspace bytes")
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(args.out.with_suffix(".png"), dpi=120)


if __name__ == "__main__":
    main()

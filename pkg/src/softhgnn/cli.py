"""``softhg`` command-line entry point.

Exit codes: 0 success, 1 numeric or acceptance failure, 2 usage/config error.
Every failure prints one line starting with ``error:`` or ``FAIL:``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, gradcheck, reference
from .errors import ConfigError, SoftHGError
from .message import softhgnn_forward
from .ses import SeSConfig, SeSState, record_and_balance
from .softhg import NormMode, init_params, save_params
from .train import ModelKind, TrainConfig, make_dataset, train_loop, write_metrics_csv

ORACLE_TOL = 1e-10


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser, *, norm=True, block=True, ses=False) -> None:
    p.add_argument("--seed", type=int, help="RNG seed (default 0; train: config value)")
    p.add_argument("--out", type=Path, help="output file (CSV, or JSON for gradcheck)")
    if norm:
        p.add_argument("--norm", choices=[m.value for m in NormMode])
    if block:
        p.add_argument("--heads", type=int, help="attention-style heads (default 8)")
        p.add_argument("--hyperedges", type=int, help="soft hyperedges M (default 8)")
    if ses:
        p.add_argument("--fixed", type=int, help="always-active hyperedges (default 16)")
        p.add_argument("--dyn", type=int, help="dynamic candidate hyperedges (default 32)")
        p.add_argument("--topk", type=int, help="dynamic hyperedges kept per pass (default 16)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softhg", description="Soft hypergraph neural network toolkit")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="{gradcheck,oracle,bench,train,ses-demo}")

    p = sub.add_parser("gradcheck", help="finite-difference check of the block backward")
    _common(p)
    p.add_argument("--n", type=int, default=5, help="vertices")
    p.add_argument("--d", type=int, default=4, help="feature width")
    p.add_argument("--tol", type=float, default=gradcheck.DEFAULT_TOL)
    p.add_argument("--activation", choices=["relu", "gelu", "identity"], default="relu")

    p = sub.add_parser("oracle", help="matrix form vs element-wise loops on random instances")
    _common(p, norm=False, block=False)
    p.add_argument("--instances", type=int, default=100)

    p = sub.add_parser("bench", help="scaling benchmark, CSV output")
    _common(p, norm=False)
    p.add_argument("--ops", default="softhgnn,attention,hgnn", help=f"comma list of {','.join(bench.VALID_OPS)}")
    p.add_argument("--n", default="256..8192", help="'lo..hi' doubling range or comma list")
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--quiet", action="store_true", help="skip the text table")

    p = sub.add_parser("train", help="train on the synthetic group task")
    _common(p, ses=True)
    p.add_argument("--config", type=Path, help="JSON file with TrainConfig fields")
    p.add_argument("--model", choices=[k.value for k in ModelKind])
    p.add_argument("--epochs", type=int)
    p.add_argument("--save-params", type=Path, help="write trained parameters as JSON")

    p = sub.add_parser("ses-demo", help="run sparse selection on random inputs and show balance stats")
    _common(p, ses=True, norm=False)
    p.add_argument("--passes", type=int, help="forward passes (default: window size)")
    p.add_argument("--window", type=int, default=64)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--state", type=Path, help="write the final SeS state as JSON")
    return parser


def _check_out(path: Path | None) -> None:
    if path is not None and not path.parent.exists():
        raise UsageError(f"output directory {path.parent} does not exist")


def cmd_gradcheck(args) -> int:
    shape = gradcheck.BlockShape(
        n=args.n, d=args.d, m=args.hyperedges or 3, heads=args.heads or 2, activation=args.activation
    )
    modes = [args.norm] if args.norm else [NormMode.ENORM, NormMode.VNORM]
    report = gradcheck.check_block(shape, args.seed, norm_modes=modes, tol=args.tol)
    print(report.format())
    if args.out:
        args.out.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    if not report.passed:
        w = report.worst
        print(f"FAIL: gradcheck {w.variant}/{w.name} rel={w.max_rel:.3e} tol={args.tol:g}")
        return 1
    return 0


def oracle_deviation(seed: int, instances: int) -> tuple[float, float]:
    """Worst |matrix - loop| over random instances: (message passing, full block)."""
    rng = np.random.default_rng(seed)
    worst_mp = worst_block = 0.0
    for _ in range(instances):
        h = int(rng.integers(1, 3))
        d = h * int(rng.integers(1, 8 // h + 1))
        n, m = int(rng.integers(1, 17)), int(rng.integers(1, 17))
        mode = NormMode.ENORM if rng.random() < 0.5 else NormMode.VNORM
        params = init_params(d, m, h, rng=rng, norm_mode=mode, residual=bool(rng.random() < 0.5))
        x = rng.normal(size=(n, d))
        out = softhgnn_forward(x, params)
        loops = reference.loop_message_passing(out.cache.a, x, params.w_e, params.w_n, params.activation)
        worst_mp = max(worst_mp, float(np.abs(out.cache.x_msg - loops).max()))
        worst_block = max(worst_block, float(np.abs(out.x_out - reference.loop_block_forward(x, params)).max()))
    return worst_mp, worst_block


def cmd_oracle(args) -> int:
    mp, block = oracle_deviation(args.seed, args.instances)
    print(f"instances={args.instances} seed={args.seed}")
    print(f"message passing  max_abs_dev={mp:.3e}")
    print(f"full block       max_abs_dev={block:.3e}")
    if args.out:
        args.out.write_text(f"instances,seed,message_passing,full_block\n{args.instances},{args.seed},{mp:.6e},{block:.6e}\n")
    if max(mp, block) >= ORACLE_TOL:
        print(f"FAIL: oracle deviation {max(mp, block):.3e} >= {ORACLE_TOL:g}")
        return 1
    return 0


def cmd_bench(args) -> int:
    ops = [op.strip() for op in args.ops.split(",") if op.strip()]
    n_list = bench.parse_n_range(args.n)
    rows = bench.scaling_run(
        ops, n_list, d=args.d, m=args.hyperedges or 8, repeats=args.repeats, heads=args.heads or 8, seed=args.seed
    )
    text = bench.rows_to_csv(rows)
    if args.out:
        args.out.write_text(text)
    if not args.quiet:
        print(bench.format_table(rows))
    status = 0
    # slopes are only judged over at least a factor-8 span of N
    judged = len(n_list) >= 3 and n_list[-1] >= 8 * n_list[0]
    for op, slope in bench.slopes(rows).items():
        lo, hi = bench.SLOPE_BANDS[op]
        ok = bench.in_band(op, slope)
        print(f"slope {op}={slope:.3f} band=[{lo},{hi}]" + ("" if judged else " (not judged)"))
        if judged and not ok:
            print(f"FAIL: slope {op}={slope:.3f} outside [{lo},{hi}]")
            status = 1
    return status


def _train_config(args) -> TrainConfig:
    if args.config is not None:
        if not args.config.is_file():
            raise UsageError(f"config file {args.config} not found")
        cfg = TrainConfig.from_json(args.config).to_dict()
    else:
        cfg = TrainConfig().to_dict()
    if args.seed is not None:
        cfg["seed"] = args.seed
    for key in ("model", "epochs", "heads", "hyperedges"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    if args.norm:
        cfg["norm_mode"] = args.norm
    for flag, key in (("fixed", "m_fixed"), ("dyn", "m_dyn"), ("topk", "k")):
        if getattr(args, flag) is not None:
            cfg["ses"][key] = getattr(args, flag)
    return TrainConfig.from_dict(cfg)


def cmd_train(args) -> int:
    _check_out(args.save_params)
    cfg = _train_config(args)
    data = make_dataset(cfg.data)
    result = train_loop(cfg, data)
    if args.out:
        write_metrics_csv(args.out, result.metrics)
    for m in result.metrics:
        print(f"epoch={m.epoch} split={m.split} loss={m.loss:.6f} accuracy={m.accuracy:.4f} l_lb={m.l_lb:.6f}")
    if result.ses_state is not None:
        print("ses_p=" + json.dumps([round(v, 6) for v in result.ses_state.p.tolist()]))
    if args.save_params:
        model = result.model
        head = {"head_w": model.head_w, "head_b": model.head_b}
        if model.block is not None:
            save_params(args.save_params, model.block, head)
        else:
            args.save_params.write_text(json.dumps(
                {k: {"shape": list(v.shape), "values": v.ravel().tolist()} for k, v in head.items()}
            ))
    return 0


def cmd_ses_demo(args) -> int:
    _check_out(args.state)
    cfg = SeSConfig(
        m_fixed=16 if args.fixed is None else args.fixed,
        m_dyn=32 if args.dyn is None else args.dyn,
        k=16 if args.topk is None else args.topk,
        window=args.window,
    )
    rng = np.random.default_rng(args.seed)
    params = init_params(args.d, cfg.m_total, args.heads or 8, rng=rng)
    state = SeSState(cfg)
    passes = args.passes or cfg.window
    lines = ["pass,l_lb,selected"]
    for t in range(1, passes + 1):
        x = rng.normal(size=(args.n, args.d))
        sel = softhgnn_forward(x, params, cfg).cache.sel
        lb = record_and_balance(state, sel)
        lines.append(f"{t},{lb:.10g},{' '.join(map(str, sel.tolist()))}")
    print(f"m_fixed={cfg.m_fixed} m_dyn={cfg.m_dyn} k={cfg.k} window={cfg.window} p_target={cfg.p_target:g}")
    print("p=" + " ".join(f"{v:.4f}" for v in state.p))
    print("l_lb trajectory: " + " ".join(line.split(",")[1] for line in lines[1:]))
    if args.out:
        args.out.write_text("\n".join(lines) + "\n")
    if args.state:
        args.state.write_text(json.dumps(state.dump()) + "\n")
    return 0


COMMANDS = {
    "gradcheck": cmd_gradcheck,
    "oracle": cmd_oracle,
    "bench": cmd_bench,
    "train": cmd_train,
    "ses-demo": cmd_ses_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(message)s")
    if args.seed is None and args.command != "train":
        args.seed = 0
    try:
        _check_out(args.out)
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, json.JSONDecodeError) as exc:
        print(f"error: {args.command}: {exc}")
        return 2
    except SoftHGError as exc:
        print(f"FAIL: {args.command}: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())

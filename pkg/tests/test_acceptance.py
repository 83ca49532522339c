"""Exit criteria A1-A8, each at its fixed tolerance and time budget."""

import csv
import io
import itertools
import json
import time

import numpy as np
import pytest

from softhgnn import reference
from softhgnn.baselines import Incidence, hgnn_conv, knn_hypergraph
from softhgnn.bench import SLOPE_BANDS, parse_n_range, scaling_run, slopes
from softhgnn.cli import main, oracle_deviation
from softhgnn.gradcheck import BlockShape, check_block
from softhgnn.ses import (
    SeSConfig,
    SeSState,
    activation_scores,
    record_and_balance,
    ses_participation,
)
from softhgnn.softhg import normalize
from softhgnn.train import ModelKind, TrainConfig, make_dataset, train_loop


def brute_topk(g, k):
    best = None
    for combo in itertools.combinations(range(len(g)), k):
        key = tuple(sorted((-g[i], i) for i in combo))
        if best is None or key < best[0]:
            best = (key, combo)
    return list(best[1])


def test_a1_oracle_equivalence(criterion):
    t0 = time.perf_counter()
    mp, block = oracle_deviation(seed=2024, instances=100)
    elapsed = time.perf_counter() - t0
    ok = max(mp, block) < 1e-10 and elapsed < 5
    criterion("A1", ok, f"max_abs_dev mp={mp:.2e} block={block:.2e} (<1e-10) in {elapsed:.2f}s (<5s)")
    assert ok


def test_a2_gradient_correctness(criterion):
    t0 = time.perf_counter()
    reports = [check_block(BlockShape(n=5, d=4, m=3, heads=2), seed=s) for s in range(5)]
    elapsed = time.perf_counter() - t0
    worst = max((r.worst for r in reports), key=lambda c: c.max_rel)
    names = {c.name for r in reports for c in r.checks}
    variants = {c.variant for r in reports for c in r.checks}
    ok = all(r.passed for r in reports) and len(names) == 7 and len(variants) == 4 and elapsed < 60
    criterion("A2", ok, f"worst {worst.variant}/{worst.name} rel={worst.max_rel:.2e} (<1e-4) "
                        f"over {len(names)} tensors x {len(variants)} variants in {elapsed:.1f}s (<60s)")
    assert ok


def test_a3_normalization_invariants(criterion):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        s = rng.normal(scale=rng.uniform(0.1, 20), size=(rng.integers(1, 17), rng.integers(1, 17)))
        worst = max(worst, np.abs(normalize(s, "enorm").a.sum(axis=0) - 1).max())
        worst = max(worst, np.abs(normalize(s, "vnorm").a.sum(axis=1) - 1).max())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5
    criterion("A3", ok, f"worst |sum-1|={worst:.2e} (<=1e-9) over 1000 matrices in {elapsed:.2f}s (<5s)")
    assert ok


def test_a4_ses_semantics(criterion):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    mismatches = bad_shape = 0
    worst = 0.0
    for t in range(1000):
        m_fixed, m_dyn = int(rng.integers(0, 5)), int(rng.integers(1, 9))
        cfg = SeSConfig(m_fixed=m_fixed, m_dyn=m_dyn, k=int(rng.integers(1, m_dyn + 1)))
        n = int(rng.integers(1, 17))
        s = rng.normal(size=(n, cfg.m_total))
        if t % 2:
            s = np.round(s)  # integer scores produce ties in the column sums
        part, sel = ses_participation(s, cfg)
        g = activation_scores(s[:, m_fixed:])
        mismatches += sel.tolist() != brute_topk(g, cfg.k)
        bad_shape += part.a.shape != (n, m_fixed + cfg.k)
        worst = max(worst, np.abs(part.a.sum(axis=0) - 1).max())

    balanced = SeSState(SeSConfig(m_fixed=0, m_dyn=4, k=1, window=4))
    for j in range(4):
        lb_bal = record_and_balance(balanced, [j])
    degenerate = SeSState(SeSConfig(m_fixed=0, m_dyn=4, k=1, window=4))
    for _ in range(4):
        lb_deg = record_and_balance(degenerate, [0])
    p_target = SeSConfig(m_fixed=16, m_dyn=32, k=16).p_target
    elapsed = time.perf_counter() - t0

    ok = (mismatches == 0 and bad_shape == 0 and worst <= 1e-9 and lb_bal == 0.0
          and abs(lb_deg - 0.1875) < 1e-15 and p_target == 0.5 and elapsed < 5)
    criterion("A4", ok, f"topk mismatches={mismatches} shape errors={bad_shape} col-sum dev={worst:.1e}; "
                        f"L_LB balanced={lb_bal} degenerate={lb_deg} p_target={p_target} in {elapsed:.2f}s (<5s)")
    assert ok


def test_a5_high_order_benefit(criterion):
    base = TrainConfig()
    assert base.epochs <= 10
    data = make_dataset(base.data)
    acc, cpu = {}, {}
    for kind in ModelKind:
        cfg = TrainConfig(model=kind)
        t0 = time.process_time()
        res = train_loop(cfg, data)
        cpu[kind] = time.process_time() - t0
        acc[kind] = res.final("test").accuracy
    pool, soft, ses = (100 * acc[k] for k in ModelKind)
    ok = soft - pool >= 5 and ses >= soft - 1 and max(cpu.values()) <= 120
    criterion("A5", ok, f"test acc pool={pool:.1f} softhgnn={soft:.1f} ses={ses:.1f} "
                        f"(gap {soft - pool:.1f} >= 5, ses >= softhgnn-1); max cpu {max(cpu.values()):.1f}s (<=120s)")
    assert ok


def test_a6_complexity_scaling(criterion):
    t0 = time.perf_counter()
    rows = scaling_run(["softhgnn", "attention", "hgnn"], parse_n_range("256..8192"), d=64, m=8, repeats=5)
    elapsed = time.perf_counter() - t0
    sl = slopes(rows)
    ok_each = {op: SLOPE_BANDS[op][0] <= v <= SLOPE_BANDS[op][1] for op, v in sl.items()}
    ok = all(ok_each.values()) and elapsed < 600
    detail = " ".join(f"{op}={v:.2f}{list(SLOPE_BANDS[op])}" for op, v in sl.items())
    criterion("A6", ok, f"log-log slopes {detail} in {elapsed:.0f}s (<600s)")
    assert ok


def test_a7_baseline_fidelity(criterion, rng):
    hand = hgnn_conv(np.array([[2.0], [4.0]]), Incidence(np.ones((2, 1))), np.eye(1))
    x = rng.normal(size=(5, 3))
    ident = hgnn_conv(x, Incidence(np.eye(5)), np.eye(3))
    worst_const = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 12))
        c = rng.normal(scale=10)
        inc = knn_hypergraph(rng.normal(size=(n, 3)), int(rng.integers(0, n)))
        worst_const = max(worst_const, np.abs(hgnn_conv(np.full((n, 3), c), inc, np.eye(3)) - c).max())
    loop_dev = np.abs(hgnn_conv(x, knn_hypergraph(x, 2), np.eye(3))
                      - reference.loop_hgnn_conv(x, knn_hypergraph(x, 2).h, np.eye(3))).max()
    ok = np.array_equal(hand, [[3.0], [3.0]]) and np.array_equal(ident, x) and worst_const <= 1e-12
    criterion("A7", ok, f"hand case {hand.ravel().tolist()}, H=I exact={np.array_equal(ident, x)}, "
                        f"constant dev={worst_const:.1e} (<=1e-12), loop dev={loop_dev:.1e}")
    assert ok


def _run_cli(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr().out


def _drop_column(text, name):
    rows = list(csv.reader(io.StringIO(text)))
    idx = rows[0].index(name)
    return [r[:idx] + r[idx + 1:] for r in rows]


def test_a8_cli_determinism(criterion, capsys, tmp_path):
    train_cfg = tmp_path / "train.json"
    train_cfg.write_text(json.dumps({
        "model": "softhgnn_ses", "epochs": 2, "heads": 2,
        "ses": {"m_fixed": 2, "m_dyn": 6, "k": 3, "window": 16},
        "data": {"n_samples": 90, "n_tokens": 12, "d": 8},
    }))
    commands = {
        "gradcheck": ["gradcheck", "--seed", "7", "--out", "{out}.json"],
        "oracle": ["oracle", "--seed", "7", "--instances", "20", "--out", "{out}.csv"],
        "bench": ["bench", "--seed", "7", "--ops", "softhgnn,attention,hgnn", "--n", "32..64", "--d", "8",
                  "--quiet", "--out", "{out}.csv"],
        "train": ["train", "--seed", "7", "--config", str(train_cfg), "--out", "{out}.csv"],
        "ses-demo": ["ses-demo", "--seed", "7", "--window", "8", "--out", "{out}.csv", "--state", "{out}.state"],
    }
    results = {}
    for name, argv in commands.items():
        outs = []
        for rep in range(2):
            stem = str(tmp_path / f"{name}{rep}")
            code, stdout = _run_cli(capsys, [a.replace("{out}", stem) for a in argv])
            files = sorted(p for p in tmp_path.iterdir() if p.name.startswith(f"{name}{rep}"))
            contents = {p.suffix: p.read_text() for p in files}
            if name == "bench":
                contents[".csv"] = _drop_column(contents[".csv"], "median_seconds")
                stdout = ""  # slope lines are timing-derived
            outs.append((code, stdout, contents))
        results[name] = outs[0] == outs[1] and outs[0][0] == 0
    ok = all(results.values())
    criterion("A8", ok, " ".join(f"{k}={'same' if v else 'DIFF'}" for k, v in results.items()))
    assert ok

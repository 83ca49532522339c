"""Wall-time and workspace scaling of SoftHGNN against quadratic baselines."""

from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import astuple, dataclass, fields
from typing import Callable, Iterable, Sequence

import numpy as np

from .baselines import AttnParams, hgnn_conv, knn_hypergraph, self_attention
from .errors import ConfigError
from .message import softhgnn_forward
from .softhg import SoftHGParams, init_params

CSV_HEADER = ("op", "n", "d", "m", "repeats", "median_seconds", "workspace_bytes")

# log-log slope bands of median time vs N
SLOPE_BANDS = {
    "softhgnn": (0.8, 1.3),
    "attention": (1.6, 2.3),
    "hgnn": (1.6, 2.5),
}

KNN_K = 8


@dataclass
class BenchRow:
    op: str
    n: int
    d: int
    m: int
    repeats: int
    median_seconds: float
    workspace_bytes: int


def softhgnn_workspace_bytes(n: int, params: SoftHGParams, itemsize: int) -> int:
    """Bytes of the named forward intermediates, a closed form a*N + b."""
    d, m = params.d, params.m
    d_edge, d_out = params.w_e.shape[0], params.d_out
    # per-vertex: x_proj, s, a, x_tilde, z_n, x_msg (+ x_out with residual)
    per_vertex = d + 2 * m + d_edge + 2 * d_out + (d_out if params.residual else 0)
    # per-sample: f_global, offsets, p, f_e, z_e, f_e_act (+ hidden layer)
    fixed = 2 * d + 2 * m * d + m * d + 2 * m * d_edge
    if params.two_layer_phi:
        fixed += params.w_phi.shape[1]
    return itemsize * (per_vertex * n + fixed)


def attention_workspace_bytes(n: int, d: int, itemsize: int) -> int:
    # q, k, v, output (N x D each); scores and weights (N x N each)
    return itemsize * (4 * n * d + 2 * n * n)


def hgnn_workspace_bytes(n: int, d: int, itemsize: int) -> int:
    # distance matrix and incidence (N x N); edge feats, vertex feats, output
    return itemsize * (2 * n * n + 3 * n * d)


def _make_ops(d: int, m: int, heads: int, seed: int, dtype) -> dict[str, tuple[Callable, Callable]]:
    rng = np.random.default_rng(seed)
    block = init_params(d, m, heads, rng=rng, dtype=dtype)
    attn = AttnParams.init(d, rng, dtype=dtype)
    theta = init_params(d, 1, 1, rng=rng, dtype=dtype).w_pre
    itemsize = np.dtype(dtype).itemsize

    def run_hgnn(x):
        return hgnn_conv(x, knn_hypergraph(x, KNN_K), theta)

    return {
        "softhgnn": (lambda x: softhgnn_forward(x, block), lambda n: softhgnn_workspace_bytes(n, block, itemsize)),
        "attention": (lambda x: self_attention(x, attn), lambda n: attention_workspace_bytes(n, d, itemsize)),
        "hgnn": (run_hgnn, lambda n: hgnn_workspace_bytes(n, d, itemsize)),
    }


VALID_OPS = tuple(SLOPE_BANDS)


def _median_time(fn: Callable, x: np.ndarray, repeats: int) -> float:
    fn(x)  # warm-up, discarded
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(x)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def scaling_run(
    ops: Iterable[str],
    n_list: Sequence[int],
    d: int = 64,
    m: int = 8,
    repeats: int = 5,
    *,
    heads: int = 8,
    seed: int = 0,
    dtype=np.float32,
) -> list[BenchRow]:
    """Median wall time (monotonic clock) per op and token count."""
    ops = list(ops)
    unknown = [op for op in ops if op not in VALID_OPS]
    if unknown:
        raise ConfigError(f"unknown op(s) {unknown}; valid ops: {', '.join(VALID_OPS)}")
    if repeats < 5:
        raise ConfigError(f"repeats must be at least 5, got {repeats}")
    if list(n_list) != sorted(n_list) or len(set(n_list)) != len(n_list):
        raise ConfigError(f"n_list must be strictly ascending, got {list(n_list)}")
    table = _make_ops(d, m, heads, seed, dtype)
    rows = []
    for op in ops:
        fn, workspace = table[op]
        for n in n_list:
            x = np.random.default_rng([seed, n]).normal(size=(n, d)).astype(dtype)
            rows.append(BenchRow(op, n, d, m, repeats, _median_time(fn, x, repeats), workspace(n)))
    return rows


def loglog_slope(ns: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(values) against log(ns)."""
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


def slopes(rows: list[BenchRow]) -> dict[str, float]:
    out = {}
    for op in dict.fromkeys(r.op for r in rows):
        sel = [r for r in rows if r.op == op]
        if len(sel) >= 2:
            out[op] = loglog_slope([r.n for r in sel], [r.median_seconds for r in sel])
    return out


def in_band(op: str, slope: float) -> bool:
    lo, hi = SLOPE_BANDS[op]
    return lo <= slope <= hi


def rows_to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.op, r.n, r.d, r.m, r.repeats, f"{r.median_seconds:.6e}", r.workspace_bytes])
    return buf.getvalue()


def format_table(rows: list[BenchRow]) -> str:
    names = [f.name for f in fields(BenchRow)]
    lines = ["  ".join(f"{n:>15}" for n in names)]
    for r in rows:
        cells = [f"{v:.4e}" if isinstance(v, float) else str(v) for v in astuple(r)]
        lines.append("  ".join(f"{c:>15}" for c in cells))
    return "\n".join(lines)


def parse_n_range(spec: str) -> list[int]:
    """``"256..8192"`` -> doubling sequence; ``"100,200,400"`` -> explicit list."""
    spec = spec.strip()
    if ".." in spec:
        lo_s, hi_s = spec.split("..", 1)
        lo, hi = int(lo_s), int(hi_s)
        if lo < 1 or hi < lo:
            raise ConfigError(f"bad N range {spec!r}")
        out = []
        n = lo
        while n <= hi:
            out.append(n)
            n *= 2
        return out
    return [int(tok) for tok in spec.split(",") if tok]

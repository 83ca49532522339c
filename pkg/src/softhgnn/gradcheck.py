"""Central finite differences against the hand-written block backward."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import NumericError
from .message import BlockOutput, softhgnn_backward, softhgnn_forward
from .softhg import Activation, NormMode, SoftHGParams, init_params

DEFAULT_STEP = 1e-5
DEFAULT_TOL = 1e-4
# distance a pre-activation / max-pool gap must keep from a kink
KINK_MARGIN = 1e-3


def finite_diff(loss_fn: Callable[[np.ndarray], float], theta, step: float = DEFAULT_STEP) -> np.ndarray:
    """Central-difference gradient of ``loss_fn`` at ``theta`` (flat vector)."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    theta = np.array(theta, dtype=np.float64).ravel()
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + step
        up = float(loss_fn(theta))
        theta[i] = orig - step
        down = float(loss_fn(theta))
        theta[i] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericError(f"non-finite loss while perturbing coordinate {i}")
        grad[i] = (up - down) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


@dataclass(frozen=True)
class BlockShape:
    n: int = 5
    d: int = 4
    m: int = 3
    heads: int = 2
    d_edge: Optional[int] = None
    d_out: Optional[int] = None
    phi_hidden: Optional[int] = None
    activation: str = "relu"


@dataclass
class TensorCheck:
    variant: str
    name: str
    max_rel: float
    max_abs: float
    worst_index: tuple
    passed: bool


@dataclass
class GradReport:
    tol: float
    seed: int
    checks: list[TensorCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def worst(self) -> TensorCheck:
        return max(self.checks, key=lambda c: c.max_rel)

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "seed": self.seed,
            "passed": self.passed,
            "worst": self.worst.name if self.checks else None,
            "checks": [asdict(c) | {"worst_index": list(c.worst_index)} for c in self.checks],
        }

    def format(self) -> str:
        lines = [f"{'variant':<14} {'tensor':<8} {'max_rel':>10} {'max_abs':>10}  worst_index  ok"]
        for c in self.checks:
            lines.append(
                f"{c.variant:<14} {c.name:<8} {c.max_rel:10.3e} {c.max_abs:10.3e}  "
                f"{str(c.worst_index):<11}  {'yes' if c.passed else 'NO'}"
            )
        w = self.worst
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(f"gradcheck {verdict}: tol={self.tol:g} worst={w.variant}/{w.name} rel={w.max_rel:.3e}")
        return "\n".join(lines)


def _sq_loss(out: BlockOutput) -> tuple[float, np.ndarray]:
    return float(np.sum(out.x_out**2)), 2.0 * out.x_out


def _kink_distance(out: BlockOutput) -> float:
    c = out.cache
    gaps = []
    if out.params.activation is Activation.RELU:
        gaps += [np.abs(c.z_e).min(), np.abs(c.z_n).min()]
    if c.phi_hidden is not None:
        gaps.append(np.abs(c.phi_hidden).min())
    if c.x.shape[0] > 1:
        top2 = np.sort(c.x, axis=0)[-2:]
        gaps.append((top2[1] - top2[0]).min())
    return min(gaps) if gaps else np.inf


def _away_from_kinks(x, params, rng, tries: int = 50):
    """Jitter ``x`` until no ReLU input or max-pool gap sits near a kink."""
    for _ in range(tries):
        if _kink_distance(softhgnn_forward(x, params)) > KINK_MARGIN:
            return x
        x = x + rng.normal(scale=0.05, size=x.shape)
    return x


def check_params(
    x: np.ndarray,
    params: SoftHGParams,
    *,
    variant: str = "",
    step: float = DEFAULT_STEP,
    tol: float = DEFAULT_TOL,
    backward: Callable = softhgnn_backward,
) -> list[TensorCheck]:
    """Compare analytic and numeric gradients of sum(out**2) for one setting."""
    out = softhgnn_forward(x, params)
    _, d_out = _sq_loss(out)
    grads = backward(out, d_out)

    targets = dict(params.tensors())
    targets["x"] = x
    analytic = dict(grads.params)
    analytic["x"] = grads.d_x

    checks = []
    for name, base in targets.items():
        shape = base.shape

        def loss_fn(theta, name=name, shape=shape):
            arr = theta.reshape(shape)
            if name == "x":
                return _sq_loss(softhgnn_forward(arr, params))[0]
            return _sq_loss(softhgnn_forward(x, params.with_tensors(**{name: arr})))[0]

        num = finite_diff(loss_fn, base, step).reshape(shape)
        ana = analytic[name]
        rel = relative_error(ana, num)
        worst = np.unravel_index(int(np.argmax(rel)), shape)
        checks.append(
            TensorCheck(
                variant=variant,
                name=name,
                max_rel=float(rel.max()),
                max_abs=float(np.abs(ana - num).max()),
                worst_index=tuple(int(i) for i in worst),
                passed=bool(rel.max() < tol),
            )
        )
    return checks


def check_block(
    shape: BlockShape = BlockShape(),
    seed: int = 0,
    *,
    norm_modes: Iterable[NormMode | str] = (NormMode.ENORM, NormMode.VNORM),
    residual: Iterable[bool] = (True, False),
    step: float = DEFAULT_STEP,
    tol: float = DEFAULT_TOL,
    backward: Callable = softhgnn_backward,
) -> GradReport:
    """Gradient-check every tensor and the input across the given variants."""
    report = GradReport(tol=tol, seed=seed)
    for mode in norm_modes:
        mode = NormMode(mode)
        for res in residual:
            rng = np.random.default_rng(seed)
            params = init_params(
                shape.d, shape.m, shape.heads, rng=rng, d_edge=shape.d_edge, d_out=shape.d_out,
                phi_hidden=shape.phi_hidden, norm_mode=mode, activation=shape.activation, residual=res,
            )
            x = rng.normal(size=(shape.n, shape.d))
            x = _away_from_kinks(x, params, rng)
            variant = f"{mode.value}/{'res' if res else 'nores'}"
            report.checks += check_params(x, params, variant=variant, step=step, tol=tol, backward=backward)
    return report

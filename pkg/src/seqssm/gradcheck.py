"""Oracle equivalence suite: analytic backward vs central differences.

Runs a grid of small random models in 64-bit spanning both losses, both
readouts, timestamped and plain stepping, and input modulation on and off.
Every parameter family appears in the report; nothing is skipped silently.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .backprop import (finite_difference_gradients, loss_and_gradients,
                       relative_error)
from .model import Model, ModelConfig, init_model, named_params
from .reparam import ReparamConfig, stability_map, stability_map_derivative

FAMILIES = ("encoder", "enc_bias", "decoder", "lam_raw", "lam_proj", "lam_bias",
            "b_in", "c_out", "d_skip", "state_bias", "gate_w", "norm_scale",
            "norm_bias", "b_mod", "c_mod")


def family_of(name: str) -> str:
    return name.split(".")[-1]


@dataclass
class GradcheckReport:
    tol: float
    h: float
    n_configs: int
    worst: Dict[str, float] = field(default_factory=dict)  # family -> max rel err
    failures: List[str] = field(default_factory=list)

    @property
    def max_error(self) -> float:
        return max(self.worst.values()) if self.worst else float("inf")

    @property
    def passed(self) -> bool:
        return not self.failures and self.worst and self.max_error <= self.tol \
            and set(self.worst) == set(FAMILIES)

    def lines(self) -> List[str]:
        out = [f"gradcheck: {self.n_configs} configs, h={self.h:g}, tol={self.tol:g}"]
        for fam in FAMILIES:
            err = self.worst.get(fam)
            if err is None:
                out.append(f"  {fam:<12} MISSING")
            else:
                mark = "ok" if err <= self.tol else "FAIL"
                out.append(f"  {fam:<12} {err:.3e}  {mark}")
        for f in self.failures:
            out.append(f"  ERROR: {f}")
        out.append(f"gradcheck: {'PASS' if self.passed else 'FAIL'} "
                   f"(max {self.max_error:.3e})")
        return out


def _random_case(rng, i):
    """One small random model plus a matching random batch."""
    modulated = i % 2 == 0
    timestamped = (i // 2) % 2 == 0
    loss = "cross_entropy" if (i // 4) % 2 == 0 else "mse"
    readout = "pooled" if loss == "cross_entropy" or i % 3 == 0 else "per_step"
    m = int(rng.integers(2, 9))
    d = int(rng.integers(2, 5))
    depth = int(rng.integers(1, 3))
    in_w = int(rng.integers(1, 4))
    out_w = int(rng.integers(2, 5)) if loss == "cross_entropy" else int(rng.integers(1, 4))
    T = int(rng.integers(3, 33))
    cfg = ModelConfig(in_width=in_w, out_width=out_w, depth=depth, d=d, m=m,
                      input_dep_b=modulated, input_dep_c=modulated,
                      readout=readout, timestamped=timestamped, precision=64)
    model = init_model(cfg, seed=int(rng.integers(0, 2 ** 31)))
    for name, arr, _ in named_params(model):
        fam = family_of(name)
        if fam == "lam_raw":
            arr += rng.normal(0.0, 0.2, arr.shape)
        elif modulated or fam not in ("lam_proj", "lam_bias"):
            arr[...] = rng.normal(0.0, 0.4, arr.shape)
        else:
            arr[...] = 0.0  # modulation off: transition ignores the input
    seq = rng.normal(0.0, 1.0, (T, in_w))
    dts = rng.uniform(0.05, 1.5, T) if timestamped else None
    if loss == "cross_entropy":
        targets = int(rng.integers(0, out_w))
        targets = np.asarray(targets)
    elif readout == "pooled":
        targets = rng.normal(0.0, 1.0, out_w)
    else:
        targets = rng.normal(0.0, 1.0, (T, out_w))
    return model, seq, targets, loss, dts


def gradcheck_suite(seed=0, n_configs=24, h=1e-6, tol=1e-5,
                    corrupt_family: Optional[str] = None) -> GradcheckReport:
    """corrupt_family deliberately breaks one analytic gradient; the
    negative-control test uses it to prove the suite can fail.

    h=1e-6 keeps central-difference truncation well below tol even through
    the normalization's curvature (error scales as h^2 and sits near 1e-5
    at h=1e-5); 64-bit roundoff is still far below tol at this step."""
    rng = np.random.default_rng(seed)
    report = GradcheckReport(tol=tol, h=h, n_configs=n_configs)
    for i in range(n_configs):
        model, seq, targets, loss, dts = _random_case(rng, i)
        try:
            _, grads, _, _ = loss_and_gradients(model, seq, targets, loss, dts=dts)
            fd = finite_difference_gradients(model, seq, targets, loss, dts=dts, h=h)
        except Exception as e:  # a crash in any case is a suite failure
            report.failures.append(f"config {i}: {e}")
            continue
        for name, _, _ in named_params(model):
            a = grads[name]
            if corrupt_family is not None and family_of(name) == corrupt_family:
                a = a + 1e-3
            if not np.all(np.isfinite(a)):
                report.failures.append(f"config {i}: non-finite analytic gradient {name}")
                continue
            err = relative_error(a, fd[name])
            fam = family_of(name)
            report.worst[fam] = max(report.worst.get(fam, 0.0), err)
    return report


@dataclass
class RatioRow:
    layer: int
    index: int
    grad_abs: float       # |dL/dw_j| summed over steps by the backward pass
    deriv_abs: float      # |f'(w_j)| at the unmodulated raw weight
    ratio: float          # grad_abs / deriv_abs; the per-weight bound constant


def gradient_ratio_table(model: Model, seq, targets, loss_kind, dts=None) -> List[RatioRow]:
    """How large each raw-weight gradient is relative to the squash slope.
    Across a dataset the max ratio estimates the constant tying gradient
    magnitude to |f'|; with the squash disabled the slope is 1."""
    _, grads, _, _ = loss_and_gradients(model, seq, targets, loss_kind, dts=dts)
    tcfg = model.config.transition
    rows = []
    for li, lp in enumerate(model.layers):
        g = np.abs(grads[f"layers.{li}.lam_raw"])
        if tcfg.enabled:
            # both squash forms share one derivative
            deriv = np.abs(stability_map_derivative(lp.lam_raw, tcfg.discrete))
        else:
            deriv = np.ones_like(lp.lam_raw)
        for j in range(lp.m):
            r = float(g[j] / deriv[j]) if deriv[j] != 0 else float("inf")
            rows.append(RatioRow(li, j, float(g[j]), float(deriv[j]), r))
    return rows


def gf_sweep(cfg: ReparamConfig, lo=-10.0, hi=10.0, n=401):
    """(w, f, f', |f'|/f^2) rows for plotting the gradient-over-weight
    profile of a squash member."""
    w = np.linspace(lo, hi, n)
    f = stability_map(w, cfg)
    fp = stability_map_derivative(w, cfg)
    ratio = np.full_like(w, np.nan)
    ok = f != 0
    ratio[ok] = np.abs(fp[ok]) / (f[ok] * f[ok])
    return np.column_stack([w, f, fp, ratio])

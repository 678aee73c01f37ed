"""Stability-preserving reparameterization of the diagonal transition.

Raw weights w live on the whole real line; the map squashes them into a
region where the recurrence cannot blow up, for every w:

    discrete    f(w) = 1 - 1/(a w^2 + b)   with codomain [1 - 1/b, 1)
    continuous  f(w) = -1/(a w^2 + b)      with codomain [-1/b, 0)

Both share the derivative f'(w) = 2 a w / (a w^2 + b)^2.  With b >= 0.5 the
discrete form satisfies |f| <= 1 everywhere, so any raw weight the optimizer
reaches yields a stable step.  At b = 0.5 the magnitude touches 1 only at
w = 0; initialization keeps raw weights away from that point.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DomainError

FORMS = ("discrete", "continuous")


@dataclass(frozen=True)
class ReparamConfig:
    a: float = 1.0
    b: float = 0.5
    form: str = "discrete"

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ArgumentError(f"reparam constants must be positive, got a={self.a} b={self.b}")
        if self.form not in FORMS:
            raise ArgumentError(f"reparam form must be one of {FORMS}, got {self.form!r}")


def _as_float(w):
    w = np.asarray(w)
    return w if w.dtype.kind == "f" else w.astype(np.float64)


def stability_map(w, cfg: ReparamConfig):
    """f(w) elementwise; w may be scalar or any array."""
    w = _as_float(w)
    inv = 1.0 / (cfg.a * w * w + cfg.b)
    return 1.0 - inv if cfg.form == "discrete" else -inv


def stability_map_derivative(w, cfg: ReparamConfig):
    """f'(w) = 2 a w / (a w^2 + b)^2, identical for both forms."""
    w = _as_float(w)
    den = cfg.a * w * w + cfg.b
    return 2.0 * cfg.a * w / (den * den)


def gradient_over_weight_ratio(w, cfg: ReparamConfig):
    """|f'(w)| / f(w)^2, the factor by which the map rescales gradients
    relative to the squared transition value.

    For the continuous form this equals 2 a |w| identically.  The discrete
    form has a pole where f(w) = 0 (w^2 = (1 - b)/a when b <= 1); those
    points are rejected.
    """
    w_arr = np.asarray(w, dtype=float)
    f = stability_map(w_arr, cfg)
    if np.any(f == 0.0):
        raise DomainError(
            f"ratio undefined where f(w) = 0 (form={cfg.form}, a={cfg.a}, b={cfg.b})"
        )
    out = np.abs(stability_map_derivative(w_arr, cfg)) / (f * f)
    return float(out) if np.isscalar(w) or w_arr.ndim == 0 else out


def inverse_stability_map(target, cfg: ReparamConfig):
    """Nonnegative w with f(w) = target.

    Attainable targets: [1 - 1/b, 1) discrete, [-1/b, 0) continuous; the
    lower boundary maps back to w = 0.
    """
    t = np.asarray(target, dtype=float)
    lo = 1.0 - 1.0 / cfg.b if cfg.form == "discrete" else -1.0 / cfg.b
    hi = 1.0 if cfg.form == "discrete" else 0.0
    if np.any(t < lo) or np.any(t >= hi):
        raise DomainError(
            f"target outside attainable range [{lo}, {hi}) for {cfg.form} form"
        )
    inv = 1.0 / (hi - t)  # = 1/(1-t) discrete, 1/(-t) continuous
    w2 = (inv - cfg.b) / cfg.a
    w = np.sqrt(np.maximum(w2, 0.0))
    return float(w) if np.isscalar(target) or t.ndim == 0 else w

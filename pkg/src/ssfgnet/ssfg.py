"""Stochastic scaling of node features and gradients.

During training each row of a feature matrix is multiplied by a random
factor lambda. The factor starts as a Beta(alpha, alpha) draw shifted by
0.5; draws above 1 are mapped through 1/(2 - x) so the support becomes
[0.5, 2] and log(lambda) is symmetric around 0. The backward pass does
NOT differentiate through the forward factor: it multiplies the upstream
gradient by a fresh, independently drawn factor. That deliberate break
in the chain rule is the regularizer.

alpha = inf is the identity: all factors are exactly 1.0 and no random
numbers are consumed, so a run with alpha = inf is bit-identical to a
run with the mechanism switched off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .autodiff import Tensor, scale
from .errors import ConfigError
from .sampling import beta_sample, beta_variates  # noqa: F401  (re-export)

MODES = ("full", "forward_only", "backward_only", "off")
PHASES = ("train", "eval")


@dataclass(frozen=True)
class SsfgConfig:
    """Settings for one stochastic-scaling regularizer.

    alpha: Beta shape; larger concentrates factors near 1. math.inf
        disables the noise exactly.
    mode: which passes get scaled ("full", "forward_only",
        "backward_only", "off").
    test_scale: constant multiplier applied at eval time.
    """

    alpha: float = math.inf
    mode: str = "off"
    test_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (self.alpha == math.inf or self.alpha > 0):
            raise ConfigError(f"alpha must be positive or inf, got {self.alpha}")
        if not (self.test_scale > 0):
            raise ConfigError(f"test_scale must be positive, got {self.test_scale}")


@dataclass(frozen=True)
class DropoutConfig:
    """Element-wise dropout with inverted scaling at train time."""

    p: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.p < 1.0):
            raise ConfigError(f"dropout p must be in [0, 1), got {self.p}")


@dataclass
class FactorSample:
    """Per-row scaling factors from one draw."""

    factors: np.ndarray


def sample_lambda(alpha: float, count: int, rng: Optional[np.random.Generator]) -> FactorSample:
    """Draw ``count`` scaling factors in [0.5, 2].

    Each factor is a Beta(alpha, alpha) variate plus 0.5; values above 1
    are folded through x -> 1/(2 - x) so multiplying up and multiplying
    down are equally likely in log space. alpha = inf returns exact ones
    without touching the generator.
    """
    if count < 0:
        raise ConfigError(f"count must be non-negative, got {count}")
    if alpha == math.inf:
        return FactorSample(np.ones(count))
    if not (alpha > 0):
        raise ConfigError(f"alpha must be positive or inf, got {alpha}")
    lam = beta_variates(alpha, count, rng) + 0.5
    high = lam > 1.0
    lam[high] = 1.0 / (2.0 - lam[high])
    return FactorSample(lam)


class ScalingSite:
    """RNG streams plus optional factor capture for one scaling point.

    Forward and backward draws come from separate generators so ablation
    modes that share a pass consume identical randomness on that pass.
    """

    def __init__(
        self,
        forward_rng: np.random.Generator,
        backward_rng: np.random.Generator,
        capture: bool = False,
    ) -> None:
        self.forward_rng = forward_rng
        self.backward_rng = backward_rng
        self.capture = capture
        self.forward_factors: List[np.ndarray] = []
        self.backward_factors: List[np.ndarray] = []


def ssfg_apply(x: Tensor, cfg: SsfgConfig, phase: str, site: ScalingSite) -> Tensor:
    """Scale rows of ``x`` stochastically according to ``cfg``.

    Train phase multiplies row i of the output by a fresh forward factor
    and row i of the upstream gradient by a fresh, independent backward
    factor (all-ones on whichever pass the mode leaves unscaled). Eval
    phase multiplies by the constant cfg.test_scale and consumes no
    randomness. mode = "off" returns ``x`` unchanged.
    """
    if phase not in PHASES:
        raise ConfigError(f"phase must be one of {PHASES}, got {phase!r}")
    if cfg.mode == "off":
        return x
    if x.data.ndim != 2:
        raise ConfigError(f"expected a 2-d feature matrix, got shape {x.data.shape}")
    if phase == "eval":
        return scale(x, cfg.test_scale)

    n = x.data.shape[0]
    if cfg.mode in ("full", "forward_only"):
        lam_f = sample_lambda(cfg.alpha, n, site.forward_rng).factors
    else:
        lam_f = np.ones(n)
    if site.capture:
        site.forward_factors.append(lam_f)
    scale_backward = cfg.mode in ("full", "backward_only")

    def _backward(grad: np.ndarray, accumulate) -> None:
        if scale_backward:
            lam_b = sample_lambda(cfg.alpha, n, site.backward_rng).factors
        else:
            lam_b = np.ones(n)
        if site.capture:
            site.backward_factors.append(lam_b)
        accumulate(x, lam_b[:, None] * grad)

    return Tensor(lam_f[:, None] * x.data, parents=(x,), backward=_backward, op="ssfg")


def dropout_apply(
    x: Tensor,
    cfg: Optional[DropoutConfig],
    phase: str,
    rng: Optional[np.random.Generator],
) -> Tensor:
    """Inverted dropout: zero elements with probability p at train time.

    Surviving elements are scaled by 1/(1 - p) so the expectation is
    unchanged; the backward pass reuses the same mask. Eval phase and
    p = 0 are exact identities.
    """
    if phase not in PHASES:
        raise ConfigError(f"phase must be one of {PHASES}, got {phase!r}")
    if cfg is None or cfg.p == 0.0 or phase == "eval":
        return x
    keep = rng.random(x.data.shape) >= cfg.p
    mask = keep / (1.0 - cfg.p)

    def _backward(grad: np.ndarray, accumulate) -> None:
        accumulate(x, grad * mask)

    return Tensor(x.data * mask, parents=(x,), backward=_backward, op="dropout")


def cumulated_factor(layers: int, alpha: float, rng: Optional[np.random.Generator]) -> float:
    """Product of ``layers`` independent single-row factor draws."""
    if layers < 0:
        raise ConfigError(f"layers must be non-negative, got {layers}")
    value = 1.0
    for _ in range(layers):
        value *= float(sample_lambda(alpha, 1, rng).factors[0])
    return value


def cumulated_factors(
    layers: int, alpha: float, trials: int, rng: Optional[np.random.Generator]
) -> np.ndarray:
    """Vector of ``trials`` cumulated factors, drawn in one batch."""
    if layers < 0:
        raise ConfigError(f"layers must be non-negative, got {layers}")
    if trials < 0:
        raise ConfigError(f"trials must be non-negative, got {trials}")
    if layers == 0:
        return np.ones(trials)
    lam = sample_lambda(alpha, layers * trials, rng).factors
    return lam.reshape(trials, layers).prod(axis=1)
